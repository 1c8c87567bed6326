"""
Acoustic Indices

Soundscape indices computed from the analytic envelope or the magnitude
spectrogram of a segment: temporal and spectral entropy, background noise,
PSD, spectral SNR, ISNR/SSNR, the acoustic complexity index and spectral cover.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from backend.audio.dsp_core import Envelope, Spectrogram, histogram_mode
from config.acoustic_constants import HIGHPASS_CUTOFF_HZ, INDEX_CONFIG


@dataclass(frozen=True)
class BandSpec:
    """Frequency band [low, high) in Hz"""

    name: str
    low: float
    high: float

    def __post_init__(self):
        if not 0.0 <= self.low < self.high:
            raise ValueError(f"band '{self.name}' must satisfy 0 <= low < high, got [{self.low}, {self.high}]")


@dataclass(frozen=True)
class BackgroundNoiseEstimate:
    bgn: float
    mode: float
    std_dev: float


def whole_band(highpass: bool = False) -> BandSpec:
    """The span of the canonical bands, starting at the high-pass cut when it is active"""
    low = HIGHPASS_CUTOFF_HZ if highpass else 0.0
    return BandSpec("whole", low, 11000.0)


def _band_mags(spec: Spectrogram, band: Optional[BandSpec]) -> np.ndarray:
    if band is None:
        return spec.mags
    if band.high > spec.nyquist + 1e-9:
        raise ValueError(f"band '{band.name}' ends at {band.high} Hz, above Nyquist {spec.nyquist} Hz")
    mags = spec.band_mags(band.low, band.high)
    if mags.shape[1] == 0:
        raise ValueError(f"band '{band.name}' [{band.low}, {band.high}) Hz contains no STFT bins")
    return mags


def _normalized_entropy(weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Shannon entropy of each row of non-negative weights, divided by log(row length).

    Returns the entropies and a mask of rows that hit the degenerate path
    (all zero, or a single element), which are defined as 1.0.
    """
    weights = np.atleast_2d(weights)
    n = weights.shape[1]
    totals = weights.sum(axis=1)
    degenerate = (totals <= 0.0) | (n < 2)

    entropy = np.ones(weights.shape[0])
    live = ~degenerate
    if np.any(live):
        pmf = weights[live] / totals[live, None]
        with np.errstate(divide='ignore', invalid='ignore'):
            terms = np.where(pmf > 0.0, pmf * np.log(pmf), 0.0)
        entropy[live] = np.clip(-terms.sum(axis=1) / math.log(n), 0.0, 1.0)
    return entropy, degenerate


def temporal_entropy_checked(env: Envelope) -> Tuple[float, bool]:
    """temporal_entropy plus a flag set when the envelope was degenerate"""
    if len(env) == 0:
        raise ValueError("temporal_entropy needs a non-empty envelope")
    entropy, degenerate = _normalized_entropy(env.values[None, :])
    return float(entropy[0]), bool(degenerate[0])


def temporal_entropy(env: Envelope) -> float:
    """
    Entropy of the envelope treated as a probability mass over time.

    A(t) = |z(t)| / sum |z(t)|, H_t = -sum A log A / log n. An all-zero
    envelope is defined as 1.0.
    """
    return temporal_entropy_checked(env)[0]


def spectral_entropy_checked(spec: Spectrogram, band: Optional[BandSpec] = None) -> Tuple[float, bool]:
    mags = _band_mags(spec, band)
    entropy, degenerate = _normalized_entropy(mags)
    return float(entropy.mean()), bool(np.all(degenerate))


def spectral_entropy(spec: Spectrogram, band: Optional[BandSpec] = None) -> float:
    """
    Per-frame entropy of the in-band magnitude PMF, averaged over frames.

    Silent frames and single-bin bands count as 1.0.
    """
    return spectral_entropy_checked(spec, band)[0]


def background_noise(env: Envelope) -> BackgroundNoiseEstimate:
    """
    Background noise level: histogram mode of the envelope plus its standard deviation.

    Args:
        env: analytic envelope of the segment

    Returns:
        BackgroundNoiseEstimate with bgn = mode + std_dev
    """
    if len(env) == 0:
        raise ValueError("background_noise needs a non-empty envelope")
    mode = histogram_mode(env.values, bins=INDEX_CONFIG["bgn_histogram_bins"])
    std_dev = float(np.std(env.values))
    return BackgroundNoiseEstimate(bgn=mode + std_dev, mode=mode, std_dev=std_dev)


def psd(spec: Spectrogram, band: Optional[BandSpec] = None) -> float:
    """Mean STFT magnitude over all frames and in-band bins"""
    return float(_band_mags(spec, band).mean())


def snr_spectral_checked(spec: Spectrogram, band: Optional[BandSpec] = None) -> Tuple[float, bool]:
    mags = _band_mags(spec, band)
    if mags.shape[1] < 2:
        raise ValueError("snr_spectral needs at least 2 in-band bins")

    per_bin = mags.mean(axis=0)
    std = float(np.std(per_bin))
    if std == 0.0:
        return float(INDEX_CONFIG["snr_flat_sentinel"]), True
    return float(per_bin.mean()) / std, False


def snr_spectral(spec: Spectrogram, band: Optional[BandSpec] = None) -> float:
    """
    Inverse coefficient of variation of the per-bin time-averaged PSD.

    An exactly flat band (including silence) returns the 1e9 sentinel.
    """
    return snr_spectral_checked(spec, band)[0]


def _intensity_cv(intensity: np.ndarray) -> float:
    mean = float(intensity.mean())
    if mean <= 0.0:
        return 0.0
    return float(np.std(intensity)) / mean


def isnr(spec: Spectrogram, band: Optional[BandSpec] = None) -> float:
    """Coefficient of variation of per-frame intensity (sum of in-band magnitudes)"""
    mags = _band_mags(spec, band)
    if mags.shape[0] < 2:
        raise ValueError("isnr needs at least 2 frames")
    return _intensity_cv(mags.sum(axis=1))


def ssnr_group_frames(spec: Spectrogram) -> int:
    return max(2, int(round(INDEX_CONFIG["ssnr_group_seconds"] / spec.frame_seconds)))


def ssnr(spec: Spectrogram, band: Optional[BandSpec] = None) -> float:
    """
    Segmental ISNR: the intensity CV within consecutive 0.1 s frame groups, averaged.

    A trailing partial group is kept when it holds at least two frames.
    """
    mags = _band_mags(spec, band)
    group = ssnr_group_frames(spec)
    if mags.shape[0] < group:
        raise ValueError(f"ssnr needs at least {group} frames, got {mags.shape[0]}")

    intensity = mags.sum(axis=1)
    values = []
    for start in range(0, intensity.shape[0], group):
        chunk = intensity[start:start + group]
        if chunk.shape[0] < 2:
            break
        values.append(_intensity_cv(chunk))
    return float(np.mean(values))


def aci(spec: Spectrogram, band: Optional[BandSpec] = None) -> float:
    """
    Acoustic complexity index.

    Per bin, the summed absolute frame-to-frame change over the summed
    intensity; averaged over the in-band bins. Bins with no energy count as 0.
    """
    mags = _band_mags(spec, band)
    if mags.shape[0] < 2:
        raise ValueError("aci needs at least 2 frames")

    change = np.abs(np.diff(mags, axis=0)).sum(axis=0)
    total = mags.sum(axis=0)
    ratio = np.divide(change, total, out=np.zeros_like(change), where=total > 0.0)
    return float(ratio.mean())


def spectral_cover(spec: Spectrogram, band: Optional[BandSpec], threshold: float) -> float:
    """Fraction of in-band spectrogram cells above `threshold`"""
    if threshold <= 0.0:
        raise ValueError(f"cover threshold must be positive, got {threshold}")
    mags = _band_mags(spec, band)
    return float(np.count_nonzero(mags > threshold)) / mags.size
