"""
DSP Core

Spectral transforms and filters shared by the feature extractors and the noise
filters: magnitude STFT, analytic envelope, windowed-sinc FIR design and
application, and the MMSE STSA stationary noise reducer.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sp_fft
from scipy import signal
from scipy.special import i0e, i1e

from backend.audio.audio_io import AudioBuffer
from config.pipeline_config import get_pipeline_config


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """
    STFT magnitudes, frames x bins.

    Magnitudes are scaled so that a full-scale sine centred on a bin reads 1.0.
    """

    mags: np.ndarray
    bin_hz: float
    frame_seconds: float
    window_len: int
    sample_rate: int

    def __post_init__(self):
        mags = np.array(self.mags, dtype=np.float64)
        if mags.ndim != 2:
            raise ValueError(f"Spectrogram expects a 2-D matrix, got shape {mags.shape}")
        if np.any(mags < 0) or not np.all(np.isfinite(mags)):
            raise ValueError("Spectrogram magnitudes must be finite and non-negative")
        mags.setflags(write=False)
        object.__setattr__(self, 'mags', mags)

    @property
    def n_frames(self) -> int:
        return self.mags.shape[0]

    @property
    def n_bins(self) -> int:
        return self.mags.shape[1]

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0

    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.bin_hz

    def band_mask(self, low: float, high: float) -> np.ndarray:
        """Bins whose centre frequency lies in [low, high)"""
        freqs = self.bin_frequencies()
        return (freqs >= low) & (freqs < high)

    def band_mags(self, low: float, high: float) -> np.ndarray:
        return self.mags[:, self.band_mask(low, high)]


@dataclass(frozen=True, eq=False)
class FirKernel:
    taps: np.ndarray
    kind: str
    cutoffs: Tuple[float, ...]
    sample_rate: int

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.shape[0] % 2 == 0:
            raise ValueError(f"FIR kernels need an odd tap count, got {taps.shape}")
        object.__setattr__(self, 'taps', taps)

    @property
    def group_delay(self) -> int:
        return (self.taps.shape[0] - 1) // 2

    def to_text(self) -> str:
        """Plain-text coefficient dump for debugging"""
        header = f"# {self.kind} cutoffs={','.join(f'{c:g}' for c in self.cutoffs)} Hz fs={self.sample_rate} taps={len(self.taps)}"
        return "\n".join([header] + [repr(float(t)) for t in self.taps]) + "\n"


@dataclass(frozen=True, eq=False)
class Envelope:
    """Analytic signal magnitude |z(t)|, one value per input sample"""

    values: np.ndarray

    def __len__(self) -> int:
        return self.values.shape[0]


def stft(buf: AudioBuffer, window_len: Optional[int] = None, hop: Optional[int] = None) -> Spectrogram:
    """
    Hann-windowed magnitude STFT of the one-sided spectrum.

    Args:
        buf: input audio
        window_len: FFT size, a power of two (default from pipeline config)
        hop: frame advance in samples, 0 < hop <= window_len

    Returns:
        Spectrogram with floor((len - window_len) / hop) + 1 frames
    """
    config = get_pipeline_config()
    window_len = window_len or config.window_len
    hop = hop or config.hop

    if window_len <= 0 or window_len & (window_len - 1):
        raise ValueError(f"window_len must be a power of two, got {window_len}")
    if not 0 < hop <= window_len:
        raise ValueError(f"hop must be in (0, {window_len}], got {hop}")
    if len(buf) < window_len:
        raise ValueError(f"buffer of {len(buf)} samples is shorter than the {window_len}-sample window")

    window = signal.get_window('hann', window_len)
    frames = sliding_window_view(buf.samples, window_len)[::hop]
    spectrum = sp_fft.rfft(frames * window, axis=1)

    # coherent gain x N / 2
    norm = window.sum() / 2.0
    mags = np.abs(spectrum) / norm

    return Spectrogram(
        mags=mags,
        bin_hz=buf.sample_rate / window_len,
        frame_seconds=hop / buf.sample_rate,
        window_len=window_len,
        sample_rate=buf.sample_rate,
    )


def analytic_envelope(buf: AudioBuffer) -> Envelope:
    """Magnitude of the analytic signal (FFT method)"""
    if len(buf) == 0:
        raise ValueError("analytic_envelope needs a non-empty buffer")
    return Envelope(np.abs(signal.hilbert(buf.samples)))


def histogram_mode(values: np.ndarray, bins: int = 100) -> float:
    """Centre of the most populated of `bins` equal-width bins over [0, max]"""
    top = float(np.max(values)) if values.size else 0.0
    if top <= 0.0:
        return 0.0
    counts, edges = np.histogram(values, bins=bins, range=(0.0, top))
    modal = int(np.argmax(counts))
    return 0.5 * (edges[modal] + edges[modal + 1])


def _symmetrize(taps: np.ndarray) -> np.ndarray:
    return 0.5 * (taps + taps[::-1])


def _lowpass_taps(cutoff: float, sample_rate: int, taps: int) -> np.ndarray:
    return signal.firwin(taps, cutoff, window='blackman', fs=sample_rate)


def _check_taps(taps: int):
    if taps < 3 or taps % 2 == 0:
        raise ValueError(f"tap count must be odd and >= 3, got {taps}")


def design_highpass(cutoff: float, sample_rate: int, taps: Optional[int] = None) -> FirKernel:
    """Blackman-windowed sinc high-pass built by spectral inversion of a low-pass"""
    taps = taps or get_pipeline_config().fir_taps
    _check_taps(taps)
    if not 0 < cutoff < sample_rate / 2:
        raise ValueError(f"cutoff {cutoff} Hz must lie in (0, {sample_rate / 2}) Hz")

    h = -_lowpass_taps(cutoff, sample_rate, taps)
    h[taps // 2] += 1.0
    return FirKernel(_symmetrize(h), 'high-pass', (float(cutoff),), sample_rate)


def design_bandstop(low: float, high: float, sample_rate: int, taps: Optional[int] = None) -> FirKernel:
    """Band-stop as the sum of a low-pass at `low` and a high-pass at `high`"""
    taps = taps or get_pipeline_config().fir_taps
    _check_taps(taps)
    if not 0 < low < high < sample_rate / 2:
        raise ValueError(f"band [{low}, {high}] Hz must satisfy 0 < low < high < {sample_rate / 2}")

    h = _lowpass_taps(low, sample_rate, taps) - _lowpass_taps(high, sample_rate, taps)
    h[taps // 2] += 1.0
    return FirKernel(_symmetrize(h), 'band-stop', (float(low), float(high)), sample_rate)


def apply_fir(buf: AudioBuffer, kernel: FirKernel) -> AudioBuffer:
    """Convolve and trim the group delay so the output lines up with the input"""
    if len(buf) == 0:
        return buf.with_samples(np.zeros(0))
    full = signal.convolve(buf.samples, kernel.taps, mode='full')
    delay = kernel.group_delay
    return buf.with_samples(full[delay:delay + len(buf)])


def _bin_noise_power(mag: np.ndarray) -> np.ndarray:
    """
    Per-bin noise power from the modal magnitude across frames.

    For Rayleigh-distributed noise magnitudes the mode is sigma and the mean
    power 2 sigma^2.
    """
    modes = np.array([histogram_mode(row) for row in mag])
    return 2.0 * modes ** 2


def mmse_stsa(buf: AudioBuffer) -> AudioBuffer:
    """
    MMSE short-time spectral amplitude estimator for stationary noise.

    Noise power per bin comes from the modal STFT magnitude; the a-priori SNR
    uses decision-directed smoothing. The output has the input's length.
    """
    config = get_pipeline_config()
    alpha = float(config.get('mmse', 'smoothing_alpha', 0.98))
    xi_floor = 10.0 ** (float(config.get('mmse', 'xi_floor_db', -25.0)) / 10.0)
    min_seconds = float(config.get('mmse', 'min_seconds', 1.0))

    if buf.duration < min_seconds:
        raise ValueError(f"mmse_stsa needs at least {min_seconds} s of audio, got {buf.duration:.3f} s")

    nperseg = config.window_len
    noverlap = nperseg - config.hop
    _, _, spec = signal.stft(buf.samples, fs=buf.sample_rate, window='hann', nperseg=nperseg, noverlap=noverlap)

    mag = np.abs(spec)
    noise = np.maximum(_bin_noise_power(mag), np.finfo(np.float64).tiny)
    with np.errstate(divide='ignore', invalid='ignore'):
        phase = np.where(mag > 0, spec / mag, 0.0)

    gamma = mag ** 2 / noise[:, None]
    estimate = np.zeros_like(mag)
    prev_amp = np.zeros(mag.shape[0])
    half_sqrt_pi = math.sqrt(math.pi) / 2.0

    for frame in range(mag.shape[1]):
        g = gamma[:, frame]
        xi = alpha * prev_amp ** 2 / noise + (1.0 - alpha) * np.maximum(g - 1.0, 0.0)
        xi = np.maximum(xi, xi_floor)
        v = xi / (1.0 + xi) * g
        # Amplitude written without the 1/gamma factor so silent bins stay finite
        amp = half_sqrt_pi * np.sqrt(xi / (1.0 + xi) * noise) * ((1.0 + v) * i0e(v / 2.0) + v * i1e(v / 2.0))
        amp = np.minimum(amp, mag[:, frame])
        estimate[:, frame] = amp
        prev_amp = amp

    _, cleaned = signal.istft(estimate * phase, fs=buf.sample_rate, window='hann', nperseg=nperseg, noverlap=noverlap)

    out = np.zeros(len(buf))
    n = min(len(buf), cleaned.shape[0])
    out[:n] = cleaned[:n]
    return buf.with_samples(np.clip(out, -1.0, 1.0))
