"""
Audio I/O

Reads and writes RIFF/WAVE files, downmixes to mono, resamples to the canonical
22.05 kHz rate and splits recordings into fixed 10 second segments.
"""

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import numpy as np
from scipy.io import wavfile
from scipy.signal import firwin, resample_poly

from config.acoustic_constants import (
    CANONICAL_SAMPLE_RATE,
    PCM16_MAX,
    PCM16_SCALE,
    SEGMENT_SECONDS,
)
from config.pipeline_config import get_pipeline_config


WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class WavParseError(ValueError):
    """Malformed RIFF/WAVE structure at a given byte offset"""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnsupportedFormatError(ValueError):
    """Well-formed WAV whose codec or layout is outside PCM16/Float32 mono/stereo"""


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono samples in [-1, 1] plus their sample rate"""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"AudioBuffer expects 1-D samples, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioBuffer samples must be finite")
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'sample_rate', int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate)


@dataclass(frozen=True, eq=False)
class Segment:
    """One canonical chunk of a longer recording"""

    audio: AudioBuffer
    source_id: str
    index: int
    start_time: float

    @property
    def segment_id(self) -> str:
        return f"{self.source_id}_{self.index}"

    @property
    def file_name(self) -> str:
        return f"{self.segment_id}.wav"

    def with_audio(self, audio: AudioBuffer) -> "Segment":
        return Segment(audio, self.source_id, self.index, self.start_time)


def _parse_fmt(chunk: bytes, offset: int) -> dict:
    if len(chunk) < 16:
        raise WavParseError(f"fmt chunk too short ({len(chunk)} bytes)", offset)

    audio_format, channels, rate, _byte_rate, block_align, bits = struct.unpack('<HHIIHH', chunk[:16])

    if audio_format == WAVE_FORMAT_EXTENSIBLE:
        if len(chunk) < 26:
            raise WavParseError("extensible fmt chunk missing sub-format", offset)
        # Sub-format GUID starts at byte 24; its first two bytes are the real format tag
        audio_format = struct.unpack('<H', chunk[24:26])[0]

    return {
        'format': audio_format,
        'channels': channels,
        'sample_rate': rate,
        'block_align': block_align,
        'bits': bits,
    }


def read_wav(path: Union[str, Path]) -> AudioBuffer:
    """
    Read a PCM16 or Float32 WAV file as a mono AudioBuffer.

    Stereo is downmixed by the arithmetic mean of the channels. Integer samples
    are scaled by 1/32768.

    Raises:
        WavParseError: malformed RIFF structure (message carries the byte offset)
        UnsupportedFormatError: codec other than PCM16/Float32 or > 2 channels
    """
    raw = Path(path).read_bytes()

    if len(raw) < 12:
        raise WavParseError("file too short for a RIFF header", len(raw))
    if raw[0:4] != b'RIFF':
        raise WavParseError(f"expected 'RIFF', found {raw[0:4]!r}", 0)
    if raw[8:12] != b'WAVE':
        raise WavParseError(f"expected 'WAVE', found {raw[8:12]!r}", 8)

    fmt = None
    data = None
    offset = 12
    while offset < len(raw):
        if offset + 8 > len(raw):
            raise WavParseError("truncated chunk header", offset)
        chunk_id = raw[offset:offset + 4]
        chunk_size = struct.unpack('<I', raw[offset + 4:offset + 8])[0]
        body_start = offset + 8
        body_end = body_start + chunk_size

        if chunk_id == b'fmt ':
            if body_end > len(raw):
                raise WavParseError("fmt chunk runs past end of file", offset)
            fmt = _parse_fmt(raw[body_start:body_end], body_start)
        elif chunk_id == b'data':
            if fmt is None:
                raise WavParseError("data chunk before fmt chunk", offset)
            if body_end > len(raw):
                raise WavParseError(
                    f"data chunk declares {chunk_size} bytes, only {len(raw) - body_start} present",
                    offset + 4,
                )
            data = raw[body_start:body_end]
            break

        # Chunks are word aligned
        offset = body_end + (chunk_size & 1)

    if fmt is None:
        raise WavParseError("no fmt chunk found", offset)
    if data is None:
        raise WavParseError("no data chunk found", offset)

    channels = fmt['channels']
    if channels not in (1, 2):
        raise UnsupportedFormatError(f"{channels} channels not supported (mono or stereo only)")

    if fmt['format'] == WAVE_FORMAT_PCM and fmt['bits'] == 16:
        samples = np.frombuffer(data[:len(data) - len(data) % 2], dtype='<i2').astype(np.float64) / PCM16_SCALE
    elif fmt['format'] == WAVE_FORMAT_IEEE_FLOAT and fmt['bits'] == 32:
        samples = np.frombuffer(data[:len(data) - len(data) % 4], dtype='<f4').astype(np.float64)
        if not np.all(np.isfinite(samples)):
            raise UnsupportedFormatError("float WAV contains non-finite samples")
        samples = np.clip(samples, -1.0, 1.0)
    else:
        raise UnsupportedFormatError(
            f"format tag 0x{fmt['format']:04x} with {fmt['bits']} bits is not PCM16 or Float32"
        )

    if channels == 2:
        samples = samples[:len(samples) - len(samples) % 2].reshape(-1, 2).mean(axis=1)

    return AudioBuffer(samples, fmt['sample_rate'])


def write_wav(buf: AudioBuffer, path: Union[str, Path]):
    """
    Write a buffer as mono 16-bit PCM.

    Values are clipped to [-1, 1] and quantized on the 1/32768 grid used by
    read_wav, saturating at +/-32767, so a round trip stays within one LSB.
    """
    clipped = np.clip(buf.samples, -1.0, 1.0)
    pcm = np.clip(np.round(clipped * PCM16_SCALE), -PCM16_MAX, PCM16_MAX).astype('<i2')
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(str(path), buf.sample_rate, pcm)


def _resampling_filter(source_rate: int, target_rate: int, up: int) -> np.ndarray:
    """Kaiser-windowed sinc low-pass at the up-sampled rate"""
    config = get_pipeline_config()
    beta = float(config.get('resample', 'kaiser_beta', 8.0))
    passband = float(config.get('resample', 'passband_fraction', 0.45))

    low_rate = min(source_rate, target_rate)
    filter_rate = source_rate * up
    passband_edge = passband * low_rate
    stopband_edge = 0.5 * low_rate
    cutoff = 0.5 * (passband_edge + stopband_edge)

    attenuation_db = beta / 0.1102 + 8.7
    delta_omega = 2.0 * math.pi * (stopband_edge - passband_edge) / filter_rate
    numtaps = int(math.ceil((attenuation_db - 7.95) / (2.285 * delta_omega))) + 1
    numtaps |= 1

    return firwin(numtaps, cutoff, window=('kaiser', beta), fs=filter_rate)


def resample(buf: AudioBuffer, target_rate: int) -> AudioBuffer:
    """
    Band-limited polyphase resampling.

    Output length is round(len * target / source); the anti-alias filter keeps
    content below 0.45 x the lower of the two rates.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")

    if target_rate == buf.sample_rate:
        return buf.with_samples(buf.samples.copy())

    g = math.gcd(buf.sample_rate, target_rate)
    up = target_rate // g
    down = buf.sample_rate // g
    target_len = int(round(len(buf) * target_rate / buf.sample_rate))

    if len(buf) == 0:
        return AudioBuffer(np.zeros(0), target_rate)

    h = _resampling_filter(buf.sample_rate, target_rate, up)
    out = resample_poly(buf.samples, up, down, window=h)

    if out.shape[0] >= target_len:
        out = out[:target_len]
    else:
        out = np.concatenate([out, np.zeros(target_len - out.shape[0])])

    return AudioBuffer(np.clip(out, -1.0, 1.0), target_rate)


def load_canonical(path: Union[str, Path]) -> AudioBuffer:
    """Read any supported WAV and bring it to the canonical mono 22.05 kHz form"""
    buf = read_wav(path)
    if buf.sample_rate != CANONICAL_SAMPLE_RATE:
        buf = resample(buf, CANONICAL_SAMPLE_RATE)
    return buf


def segment_audio(buf: AudioBuffer, seconds: float = SEGMENT_SECONDS, source_id: str = "audio") -> List[Segment]:
    """
    Split a canonical-rate buffer into consecutive non-overlapping chunks.

    The trailing partial chunk is discarded.
    """
    if buf.sample_rate != CANONICAL_SAMPLE_RATE:
        raise ValueError(
            f"segment_audio expects {CANONICAL_SAMPLE_RATE} Hz audio, got {buf.sample_rate} Hz; resample first"
        )
    if seconds <= 0:
        raise ValueError(f"segment length must be positive, got {seconds}")

    chunk = int(round(seconds * buf.sample_rate))
    count = len(buf) // chunk

    segments = []
    for index in range(count):
        start = index * chunk
        audio = buf.with_samples(buf.samples[start:start + chunk].copy())
        segments.append(Segment(audio, source_id, index, start / buf.sample_rate))
    return segments
