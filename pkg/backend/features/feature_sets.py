"""
Feature Sets

Assembles named feature vectors for the seven feature sets from the acoustic
indices and MFCCs, after the optional high-pass and MMSE pre-filters.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from backend.audio.audio_io import AudioBuffer, Segment
from backend.audio.dsp_core import analytic_envelope, apply_fir, design_highpass, mmse_stsa, stft
from backend.features import indices
from backend.features.indices import BandSpec
from backend.features.mfcc import mfcc
from config.acoustic_constants import (
    BAND_INDEX_NAMES,
    CANONICAL_BANDS,
    HIGHPASS_CUTOFF_HZ,
    INDEX_CONFIG,
    MFCC_CONFIG,
    RAIN_BAND,
    RAIN_INDEX_NAMES,
    WHOLE_INDEX_NAMES,
)


class FeatureSetId(str, Enum):
    INDICES = "Indices"
    FREQ_INDICES = "FreqIndices"
    MFCCS = "MFCCs"
    MFCCS_NO_DELTA = "MFCCsNoDelta"
    ALL = "All"
    ALL_NO_DELTA = "AllNoDelta"
    CFS_SUBSET = "CFSSubset"

    @classmethod
    def parse(cls, value) -> "FeatureSetId":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            known = ", ".join(s.value for s in cls)
            raise ValueError(f"Unknown feature set '{value}'. Known sets: {known}") from None


@dataclass(frozen=True)
class PreProcessing:
    """Pre-filters applied before feature extraction, in the order high-pass then MMSE"""

    highpass: bool = False
    mmse: bool = False

    def as_dict(self) -> Dict[str, bool]:
        return {'highpass': self.highpass, 'mmse': self.mmse}


@dataclass(frozen=True)
class FeatureVector:
    """Ordered feature name -> value map for one segment"""

    values: Dict[str, float]
    flags: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        bad = [name for name, v in self.values.items() if not np.isfinite(v)]
        if bad:
            raise ValueError(f"non-finite feature values: {', '.join(bad)}")

    @property
    def names(self) -> List[str]:
        return list(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def to_array(self, names: Optional[Sequence[str]] = None) -> np.ndarray:
        names = self.names if names is None else names
        return np.array([self.values[n] for n in names], dtype=np.float64)


def canonical_bands(highpass: bool = False) -> List[BandSpec]:
    """Canonical bands, dropping those below the 1 kHz cut when the high-pass is active"""
    bands = [BandSpec(name, low, high) for name, low, high in CANONICAL_BANDS]
    if highpass:
        bands = [b for b in bands if b.low >= HIGHPASS_CUTOFF_HZ]
    return bands


def rain_band() -> BandSpec:
    name, low, high = RAIN_BAND
    return BandSpec(name, low, high)


def _index_names(highpass: bool) -> List[str]:
    names = list(WHOLE_INDEX_NAMES)
    if not highpass:
        names += RAIN_INDEX_NAMES
    return names


def _band_names(highpass: bool) -> List[str]:
    return [f"{index}_{band.name}" for band in canonical_bands(highpass) for index in BAND_INDEX_NAMES]


def _mfcc_names(with_deltas: bool) -> List[str]:
    n = MFCC_CONFIG["n_coefficients"]
    names = [f"mfcc_{i:02d}" for i in range(n)]
    if with_deltas:
        names += [f"mfcc_d1_{i:02d}" for i in range(n)]
        names += [f"mfcc_d2_{i:02d}" for i in range(n)]
    return names


def feature_names(set_id, highpass: bool = False, selection: Optional[Sequence[str]] = None) -> List[str]:
    """
    Canonical, ordered feature names of a set.

    Args:
        set_id: FeatureSetId or its string name
        highpass: whether the 1 kHz high-pass pre-filter is active
        selection: names chosen by CFS (required for CFSSubset, ignored otherwise)

    Returns:
        List of names in emission order
    """
    set_id = FeatureSetId.parse(set_id)

    if set_id == FeatureSetId.INDICES:
        return _index_names(highpass)
    if set_id == FeatureSetId.FREQ_INDICES:
        return _index_names(highpass) + _band_names(highpass)
    if set_id == FeatureSetId.MFCCS:
        return _mfcc_names(True)
    if set_id == FeatureSetId.MFCCS_NO_DELTA:
        return _mfcc_names(False)
    if set_id == FeatureSetId.ALL:
        return _index_names(highpass) + _band_names(highpass) + _mfcc_names(True)
    if set_id == FeatureSetId.ALL_NO_DELTA:
        return _index_names(highpass) + _band_names(highpass) + _mfcc_names(False)

    # CFSSubset
    if not selection:
        raise ValueError("CFSSubset has no selection yet; run CFS on an All-set dataset first")
    universe = set(feature_names(FeatureSetId.ALL, highpass))
    unknown = [n for n in selection if n not in universe]
    if unknown:
        raise ValueError(f"CFS selection names features outside the All set: {', '.join(unknown)}")
    return list(selection)


def preprocess(audio: AudioBuffer, pre: PreProcessing) -> AudioBuffer:
    if pre.highpass:
        audio = apply_fir(audio, design_highpass(HIGHPASS_CUTOFF_HZ, audio.sample_rate))
    if pre.mmse:
        audio = mmse_stsa(audio)
    return audio


def _index_features(audio: AudioBuffer, spec, highpass: bool, flags: List[str]) -> Dict[str, float]:
    env = analytic_envelope(audio)
    whole = indices.whole_band(highpass)

    out: Dict[str, float] = {}
    out['temporal_entropy'], degenerate = indices.temporal_entropy_checked(env)
    if degenerate:
        flags.append('temporal_entropy')
    out['spectral_entropy'], degenerate = indices.spectral_entropy_checked(spec, whole)
    if degenerate:
        flags.append('spectral_entropy')

    noise = indices.background_noise(env)
    out['bgn'] = noise.bgn
    out['bgn_std'] = noise.std_dev

    if not highpass:
        band = rain_band()
        out['rain_psd'] = indices.psd(spec, band)
        out['rain_snr'], flat = indices.snr_spectral_checked(spec, band)
        if flat:
            flags.append('rain_snr')
        out['rain_isnr'] = indices.isnr(spec, band)
        out['rain_ssnr'] = indices.ssnr(spec, band)
    return out


def _band_features(spec, highpass: bool, flags: List[str]) -> Dict[str, float]:
    low_thr = INDEX_CONFIG["cover_thresholds"]["low"]
    med_thr = INDEX_CONFIG["cover_thresholds"]["med"]

    out: Dict[str, float] = {}
    for band in canonical_bands(highpass):
        suffix = band.name
        out[f"aci_{suffix}"] = indices.aci(spec, band)
        value, degenerate = indices.spectral_entropy_checked(spec, band)
        out[f"spectral_entropy_{suffix}"] = value
        if degenerate:
            flags.append(f"spectral_entropy_{suffix}")
        value, flat = indices.snr_spectral_checked(spec, band)
        out[f"snr_{suffix}"] = value
        if flat:
            flags.append(f"snr_{suffix}")
        out[f"isnr_{suffix}"] = indices.isnr(spec, band)
        out[f"ssnr_{suffix}"] = indices.ssnr(spec, band)
        out[f"psd_{suffix}"] = indices.psd(spec, band)
        out[f"cvr_low_{suffix}"] = indices.spectral_cover(spec, band, low_thr)
        out[f"cvr_med_{suffix}"] = indices.spectral_cover(spec, band, med_thr)
    return out


def _mfcc_features(audio: AudioBuffer, highpass: bool) -> Dict[str, float]:
    fmin = MFCC_CONFIG["fmin_highpass_hz"] if highpass else MFCC_CONFIG["fmin_hz"]
    fmax = min(MFCC_CONFIG["fmax_hz"], audio.sample_rate / 2.0)
    coeff_means, d1_means, d2_means = mfcc(audio, fmin, fmax).frame_means()

    out: Dict[str, float] = {}
    for i, value in enumerate(coeff_means):
        out[f"mfcc_{i:02d}"] = float(value)
    for i, value in enumerate(d1_means):
        out[f"mfcc_d1_{i:02d}"] = float(value)
    for i, value in enumerate(d2_means):
        out[f"mfcc_d2_{i:02d}"] = float(value)
    return out


def extract_features(
    seg: Segment,
    set_id,
    pre: PreProcessing = PreProcessing(),
    selection: Optional[Sequence[str]] = None,
) -> FeatureVector:
    """
    Extract one feature vector for a canonical segment.

    Only the index groups the set needs are computed. For CFSSubset the All
    set is computed and the stored selection picked from it.

    Args:
        seg: canonical 22.05 kHz segment
        set_id: FeatureSetId or its name
        pre: pre-filters to apply first
        selection: CFS-selected names (CFSSubset only)

    Returns:
        FeatureVector whose names equal feature_names(set_id, pre.highpass, selection)
    """
    names = feature_names(set_id, pre.highpass, selection)

    audio = preprocess(seg.audio, pre)
    spec = stft(audio)
    flags: List[str] = []

    needed = set(names)
    computed: Dict[str, float] = {}
    if needed & set(_index_names(pre.highpass)):
        computed.update(_index_features(audio, spec, pre.highpass, flags))
    if needed & set(_band_names(pre.highpass)):
        computed.update(_band_features(spec, pre.highpass, flags))
    if needed & set(_mfcc_names(True)):
        computed.update(_mfcc_features(audio, pre.highpass))

    values = {name: float(computed[name]) for name in names}
    return FeatureVector(values=values, flags=tuple(f for f in flags if f in needed))


def vector_from_mapping(values: Mapping[str, float]) -> FeatureVector:
    return FeatureVector(values={str(k): float(v) for k, v in values.items()})
