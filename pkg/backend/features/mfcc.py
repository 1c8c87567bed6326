"""
MFCC extraction

33 mel-frequency cepstral coefficients per frame, with first and second
order deltas, from the magnitude STFT shared with the acoustic indices.
"""

from dataclasses import dataclass
from typing import Union

import librosa
import numpy as np
from scipy import fft as sp_fft

from backend.audio.audio_io import AudioBuffer
from backend.audio.dsp_core import stft
from config.acoustic_constants import MFCC_CONFIG

ArrayLike = Union[float, np.ndarray]


def mel_from_hz(f: ArrayLike) -> ArrayLike:
    """m = 2595 log10(1 + f / 700)"""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("frequency must be non-negative")
    mel = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(mel) if mel.ndim == 0 else mel


def mel_from_hz_ln(f: ArrayLike) -> ArrayLike:
    """Natural-log form, m = 1127 ln(1 + f / 700)"""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("frequency must be non-negative")
    mel = 1127.0 * np.log1p(f / 700.0)
    return float(mel) if mel.ndim == 0 else mel


def frame_deltas(matrix: np.ndarray) -> np.ndarray:
    """d_n = M_{n+1} - M_{n-1} along frames, with the first and last frame replicated"""
    padded = np.pad(matrix, ((1, 1), (0, 0)), mode='edge')
    return padded[2:] - padded[:-2]


@dataclass(frozen=True, eq=False)
class MfccMatrix:
    coeffs: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray

    def __post_init__(self):
        n = MFCC_CONFIG["n_coefficients"]
        if self.coeffs.ndim != 2 or self.coeffs.shape[1] != n:
            raise ValueError(f"MFCC matrix must have {n} columns, got shape {self.coeffs.shape}")
        if self.delta1.shape != self.coeffs.shape or self.delta2.shape != self.coeffs.shape:
            raise ValueError("delta matrices must match the coefficient matrix shape")

    @property
    def n_frames(self) -> int:
        return self.coeffs.shape[0]

    def frame_means(self):
        """(coeff means, delta1 means, delta2 means), each of length 33"""
        return self.coeffs.mean(axis=0), self.delta1.mean(axis=0), self.delta2.mean(axis=0)


def mfcc(buf: AudioBuffer, fmin: float = None, fmax: float = None) -> MfccMatrix:
    """
    Compute MFCCs with deltas.

    The power spectrum of each STFT frame is summed through 33 triangular
    filters equally spaced in mel between fmin and fmax, floored at 1e-10,
    logged and decorrelated with an orthonormal DCT-II.

    Args:
        buf: canonical audio
        fmin: lowest filter edge in Hz (1000 when the high-pass is active)
        fmax: highest filter edge in Hz, at most Nyquist

    Returns:
        MfccMatrix of shape [frames x 33]
    """
    fmin = MFCC_CONFIG["fmin_hz"] if fmin is None else float(fmin)
    fmax = min(MFCC_CONFIG["fmax_hz"], buf.sample_rate / 2.0) if fmax is None else float(fmax)
    if not 0.0 <= fmin < fmax <= buf.sample_rate / 2.0:
        raise ValueError(f"MFCC band [{fmin}, {fmax}] Hz must satisfy 0 <= fmin < fmax <= {buf.sample_rate / 2.0}")

    spec = stft(buf)
    power = spec.mags ** 2

    filterbank = librosa.filters.mel(
        sr=buf.sample_rate,
        n_fft=spec.window_len,
        n_mels=MFCC_CONFIG["n_filters"],
        fmin=fmin,
        fmax=fmax,
        htk=True,
        norm=None,
        dtype=np.float64,
    )
    energies = power @ filterbank.T
    log_energies = np.log(np.maximum(energies, MFCC_CONFIG["log_floor"]))

    coeffs = sp_fft.dct(log_energies, type=2, norm='ortho', axis=1)[:, :MFCC_CONFIG["n_coefficients"]]
    delta1 = frame_deltas(coeffs)
    delta2 = frame_deltas(delta1)
    return MfccMatrix(coeffs=coeffs, delta1=delta1, delta2=delta2)
