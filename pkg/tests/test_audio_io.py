"""Tests for WAV parsing, writing, resampling and segmentation"""

import struct

import numpy as np
import pytest

from backend.audio.audio_io import (
    AudioBuffer,
    UnsupportedFormatError,
    WavParseError,
    load_canonical,
    read_wav,
    resample,
    segment_audio,
    write_wav,
)
from tests.conftest import SR, make_noise, make_tone


def _riff(fmt_tag: int, channels: int, rate: int, bits: int, payload: bytes, extra_chunks: bytes = b"") -> bytes:
    block_align = channels * bits // 8
    fmt = struct.pack('<HHIIHH', fmt_tag, channels, rate, rate * block_align, block_align, bits)
    body = b'WAVE' + b'fmt ' + struct.pack('<I', len(fmt)) + fmt + extra_chunks
    body += b'data' + struct.pack('<I', len(payload)) + payload
    return b'RIFF' + struct.pack('<I', len(body)) + body


def test_pcm16_round_trip_within_one_lsb(tmp_path):
    buf = make_tone(440.0, seconds=1.0, amplitude=0.7)
    path = tmp_path / "tone.wav"
    write_wav(buf, path)
    back = read_wav(path)

    assert back.sample_rate == SR
    assert len(back) == len(buf)
    assert np.max(np.abs(back.samples - buf.samples)) <= 1.0 / 32768 + 1e-12


def test_write_clips_and_saturates(tmp_path):
    path = tmp_path / "loud.wav"
    write_wav(AudioBuffer(np.array([1.0, -1.0, 0.0]), SR), path)
    back = read_wav(path)
    assert back.samples[0] == pytest.approx(32767 / 32768)
    assert back.samples[1] == pytest.approx(-32767 / 32768)


def test_stereo_is_downmixed_by_mean(tmp_path):
    frames = np.array([[1000, 3000], [-2000, 2000], [0, 500]], dtype='<i2')
    path = tmp_path / "stereo.wav"
    path.write_bytes(_riff(1, 2, 8000, 16, frames.tobytes()))

    buf = read_wav(path)
    assert buf.sample_rate == 8000
    np.testing.assert_allclose(buf.samples, np.array([2000, 0, 250]) / 32768.0)


def test_float32_is_read_and_clipped(tmp_path):
    payload = np.array([0.25, -0.5, 1.5], dtype='<f4').tobytes()
    path = tmp_path / "float.wav"
    path.write_bytes(_riff(3, 1, 16000, 32, payload))

    buf = read_wav(path)
    np.testing.assert_allclose(buf.samples, [0.25, -0.5, 1.0])


def test_unknown_chunks_are_skipped(tmp_path):
    payload = np.array([100, -100], dtype='<i2').tobytes()
    # odd-sized chunk exercises the pad byte
    extra = b'LIST' + struct.pack('<I', 3) + b'abc' + b'\x00'
    path = tmp_path / "list.wav"
    path.write_bytes(_riff(1, 1, SR, 16, payload, extra_chunks=extra))

    assert len(read_wav(path)) == 2


def test_bad_magic_reports_offset(tmp_path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b'RIFX' + b'\x00' * 40)
    with pytest.raises(WavParseError) as info:
        read_wav(path)
    assert info.value.offset == 0


def test_truncated_data_chunk(tmp_path):
    good = _riff(1, 1, SR, 16, np.zeros(100, dtype='<i2').tobytes())
    path = tmp_path / "short.wav"
    path.write_bytes(good[:-50])
    with pytest.raises(WavParseError):
        read_wav(path)


def test_unsupported_codec(tmp_path):
    path = tmp_path / "alaw.wav"
    path.write_bytes(_riff(6, 1, 8000, 8, b'\x00' * 10))
    with pytest.raises(UnsupportedFormatError):
        read_wav(path)


def test_too_many_channels(tmp_path):
    path = tmp_path / "quad.wav"
    path.write_bytes(_riff(1, 4, 8000, 16, b'\x00' * 16))
    with pytest.raises(UnsupportedFormatError):
        read_wav(path)


def test_resample_length_and_tone_preserved():
    src = make_tone(1000.0, seconds=2.0, amplitude=0.5, sr=44100)
    out = resample(src, SR)

    assert out.sample_rate == SR
    assert len(out) == round(len(src) * SR / 44100)
    # steady-state amplitude survives the anti-alias filter
    middle = out.samples[SR // 2:-SR // 2]
    assert np.max(np.abs(middle)) == pytest.approx(0.5, abs=0.01)


def test_resample_removes_content_above_new_nyquist():
    src = make_tone(15000.0, seconds=1.0, amplitude=0.5, sr=44100)
    out = resample(src, SR)
    middle = out.samples[2000:-2000]
    assert np.sqrt(np.mean(middle ** 2)) < 0.01


def test_resample_same_rate_is_a_copy():
    src = make_noise(seconds=0.5)
    out = resample(src, SR)
    np.testing.assert_array_equal(out.samples, src.samples)
    assert out.samples is not src.samples


def test_load_canonical_resamples(tmp_path):
    path = tmp_path / "cd.wav"
    write_wav(make_tone(500.0, seconds=1.0, sr=44100), path)
    buf = load_canonical(path)
    assert buf.sample_rate == SR
    assert len(buf) == SR


def test_segment_drops_trailing_partial():
    buf = make_noise(seconds=25.0)
    segments = segment_audio(buf, source_id="site3")

    assert len(segments) == 2
    assert [s.segment_id for s in segments] == ["site3_0", "site3_1"]
    assert segments[1].start_time == pytest.approx(10.0)
    assert all(len(s.audio) == 10 * SR for s in segments)
    np.testing.assert_array_equal(segments[1].audio.samples, buf.samples[10 * SR:20 * SR])


def test_segment_short_recording_gives_nothing():
    assert segment_audio(make_noise(seconds=9.0)) == []


def test_segment_requires_canonical_rate():
    with pytest.raises(ValueError):
        segment_audio(make_noise(seconds=12.0, sr=16000))


def test_buffer_rejects_non_finite():
    with pytest.raises(ValueError):
        AudioBuffer(np.array([0.0, np.nan]), SR)
