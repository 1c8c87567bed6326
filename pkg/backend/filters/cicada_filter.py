"""
Cicada chorus filter

A chorus is a loud, steady, narrow-band tone. Once a detector says a chorus is
present, the band is located from per-bin PMF statistics across frames and
removed with a windowed-sinc band-stop:

    1. per frame, PMF = bin magnitudes / frame magnitude sum
    2. per bin, mean PMF and its relative standard deviation (RSD, %)
    3. bins with mean PMF > 0.0125 and RSD < 70 % qualify
    4. the run of >= 2 consecutive qualifying bins with the largest PMF sum
       is the chorus band
    5. band-stop that band (bin edges plus half a bin of margin)
"""

import itertools
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from backend.audio.audio_io import AudioBuffer, Segment
from backend.audio.dsp_core import Spectrogram, apply_fir, design_bandstop, design_highpass, mmse_stsa, stft
from backend.console import log, warn
from backend.filters.detection import detector_probability
from backend.features.indices import isnr
from backend.metrics.evaluation import MannWhitneyResult, mann_whitney_u
from backend.ml.classifiers import TrainedModel
from config.acoustic_constants import CICADA_RULES, HIGHPASS_CUTOFF_HZ
from config.pipeline_config import get_pipeline_config


@dataclass(frozen=True, eq=False)
class CicadaBandProfile:
    mean_pmf: np.ndarray
    rsd: np.ndarray                              # percent; +inf where mean_pmf == 0
    bin_hz: float
    nyquist: float
    selected_band: Optional[Tuple[int, int]] = None   # inclusive bin range

    def qualifying(self) -> np.ndarray:
        return (self.mean_pmf > CICADA_RULES["min_mean_pmf"]) & (self.rsd < CICADA_RULES["max_rsd_percent"])


def cicada_band_profile(spec: Spectrogram) -> CicadaBandProfile:
    """
    Per-bin mean PMF and RSD across frames.

    Raises:
        ValueError: fewer than 10 frames, or every frame silent
    """
    if spec.n_frames < CICADA_RULES["min_frames"]:
        raise ValueError(f"cicada profile needs at least {CICADA_RULES['min_frames']} frames, got {spec.n_frames}")

    totals = spec.mags.sum(axis=1)
    live = totals > 0.0
    if not np.any(live):
        raise ValueError("cicada profile of an all-silent spectrogram")

    pmf = spec.mags[live] / totals[live, None]
    mean = pmf.mean(axis=0)
    std = pmf.std(axis=0)
    rsd = np.full_like(mean, np.inf)
    np.divide(100.0 * std, mean, out=rsd, where=mean > 0.0)
    return CicadaBandProfile(mean_pmf=mean, rsd=rsd, bin_hz=spec.bin_hz, nyquist=spec.nyquist)


def select_cicada_bins(profile: CicadaBandProfile) -> Optional[Tuple[int, int]]:
    """Inclusive bin range of the strongest qualifying run, or None"""
    qualifying = profile.qualifying()
    best = None
    start = 0
    for ok, run in itertools.groupby(qualifying):
        length = len(list(run))
        if ok and length >= CICADA_RULES["min_band_bins"]:
            mass = float(profile.mean_pmf[start:start + length].sum())
            # strict > keeps the lower-frequency run on ties
            if best is None or mass > best[0]:
                best = (mass, start, start + length - 1)
        start += length
    return None if best is None else (best[1], best[2])


def select_cicada_band(profile: CicadaBandProfile) -> Optional[Tuple[float, float]]:
    """
    Chorus band in Hz, expanded to the outer edges of its first and last bins.

    Returns:
        (low Hz, high Hz) or None when no run qualifies
    """
    bins = select_cicada_bins(profile)
    if bins is None:
        return None
    low = max(0.0, (bins[0] - 0.5) * profile.bin_hz)
    high = min(profile.nyquist, (bins[1] + 0.5) * profile.bin_hz)
    return low, high


def remove_cicada_band(audio: AudioBuffer):
    """
    Locate and stop the chorus band without consulting a detector.

    Returns:
        (audio, band in Hz or None, profile with selected_band set)
    """
    spec = stft(audio)
    profile = cicada_band_profile(spec)
    bins = select_cicada_bins(profile)
    profile = replace(profile, selected_band=bins)
    band = select_cicada_band(profile)
    if band is None:
        return audio, None, profile

    margin = CICADA_RULES["edge_margin_bins"] * profile.bin_hz
    nyquist = audio.sample_rate / 2.0
    low = max(band[0] - margin, 1.0)
    high = min(band[1] + margin, nyquist - 1.0)
    kernel = design_bandstop(low, high, audio.sample_rate)
    return apply_fir(audio, kernel), band, profile


def band_energy_db(audio: AudioBuffer, low: float, high: float) -> float:
    """Mean STFT power in [low, high) Hz, in dB"""
    power = stft(audio).band_mags(low, high) ** 2
    if power.size == 0:
        return float('-inf')
    return float(10.0 * np.log10(max(float(power.mean()), 1e-20)))


@dataclass
class CicadaFilterResult:
    segment_id: str
    audio: AudioBuffer
    action: str                          # 'filtered' or 'untouched'
    probability: float
    band: Optional[Tuple[float, float]] = None
    energy_before_db: Optional[float] = None
    energy_after_db: Optional[float] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def filtered(self) -> bool:
        return self.action == 'filtered'

    def report_row(self) -> Dict[str, object]:
        return {
            'segment_id': self.segment_id,
            'probability': self.probability,
            'action': self.action,
            'band_low_hz': self.band[0] if self.band else 'none',
            'band_high_hz': self.band[1] if self.band else 'none',
            'energy_before_db': self.energy_before_db if self.band else '',
            'energy_after_db': self.energy_after_db if self.band else '',
        }


def filter_cicada(seg: Segment, detector: TrainedModel, threshold: float = 0.5) -> CicadaFilterResult:
    """
    Detect a chorus and, if present, band-stop it.

    Below the threshold the segment's audio object is returned unchanged. A
    detection with no qualifying band is also left untouched, with a warning.

    Args:
        seg: canonical segment
        detector: model trained for cicada presence
        threshold: detection threshold on the positive probability

    Returns:
        CicadaFilterResult
    """
    probability = detector_probability(seg, detector)
    if probability < threshold:
        return CicadaFilterResult(seg.segment_id, seg.audio, 'untouched', probability)

    audio, band, _profile = remove_cicada_band(seg.audio)
    if band is None:
        message = f"{seg.segment_id}: chorus detected (p={probability:.3f}) but no band qualifies"
        warn("CicadaFilter", message)
        return CicadaFilterResult(seg.segment_id, seg.audio, 'untouched', probability, warnings=[message])

    return CicadaFilterResult(
        segment_id=seg.segment_id,
        audio=audio,
        action='filtered',
        probability=probability,
        band=band,
        energy_before_db=band_energy_db(seg.audio, *band),
        energy_after_db=band_energy_db(audio, *band),
    )


def write_filter_report(results: Sequence[CicadaFilterResult], path: Union[str, Path]):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    columns = ['segment_id', 'probability', 'action', 'band_low_hz', 'band_high_hz',
               'energy_before_db', 'energy_after_db']
    frame = pd.DataFrame([r.report_row() for r in results], columns=columns)
    frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')


# ─────────────────────────────────────────────
# ISNR comparison of noise-reduction variants
# ─────────────────────────────────────────────

ISNR_VARIANTS = ['raw', 'mmse', 'cicada', 'both']


def _variant_isnrs(audio: AudioBuffer) -> Dict[str, float]:
    """Each variant ends with the 1 kHz high-pass; 'both' is cicada filter then MMSE"""
    highpass = design_highpass(HIGHPASS_CUTOFF_HZ, audio.sample_rate)
    cicada, _band, _profile = remove_cicada_band(audio)
    variants = {
        'raw': audio,
        'mmse': mmse_stsa(audio),
        'cicada': cicada,
        'both': mmse_stsa(cicada),
    }
    return {name: isnr(stft(apply_fir(buf, highpass))) for name, buf in variants.items()}


@dataclass
class IsnrComparison:
    values: Dict[str, List[float]]
    segment_ids: List[str]
    tests: List[Tuple[str, str, MannWhitneyResult]]

    def summary_frame(self) -> pd.DataFrame:
        rows = []
        for name in ISNR_VARIANTS:
            v = np.asarray(self.values[name])
            rows.append((name, float(np.median(v)), float(np.percentile(v, 25)), float(np.percentile(v, 75))))
        return pd.DataFrame(rows, columns=['variant', 'median', 'q1', 'q3'])

    def tests_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(a, b, r.u, r.p_value) for a, b, r in self.tests],
            columns=['variant_a', 'variant_b', 'u', 'p_value'],
        )

    def values_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=ISNR_VARIANTS)
        frame.insert(0, 'segment_id', self.segment_ids)
        return frame

    def to_text(self) -> str:
        lines = ["variant   median      q1          q3"]
        for row in self.summary_frame().itertuples(index=False):
            lines.append(f"{row.variant:<9} {row.median:<11.4f} {row.q1:<11.4f} {row.q3:.4f}")
        lines.append("")
        lines.append("pair            U            p")
        for a, b, r in self.tests:
            lines.append(f"{a + '/' + b:<15} {r.u:<12.1f} {r.p_value:.3g}")
        return "\n".join(lines) + "\n"


def evaluate_cicada_isnr(segments: Sequence[Segment], jobs: Optional[int] = None) -> IsnrComparison:
    """
    Compare whole-spectrum ISNR of raw, MMSE, cicada-filtered and both.

    Every variant is high-passed at 1 kHz before measuring. Each pair of
    variants gets a two-tailed Mann-Whitney U test.
    """
    if not segments:
        raise ValueError("no segments to evaluate")
    jobs = get_pipeline_config().jobs if jobs is None else jobs

    if jobs > 1:
        per_segment = Parallel(n_jobs=jobs, prefer='threads')(delayed(_variant_isnrs)(s.audio) for s in segments)
    else:
        per_segment = [_variant_isnrs(s.audio) for s in segments]

    values = {name: [row[name] for row in per_segment] for name in ISNR_VARIANTS}
    tests = [
        (a, b, mann_whitney_u(values[a], values[b]))
        for a, b in itertools.combinations(ISNR_VARIANTS, 2)
    ]
    log("CicadaFilter", f"ISNR comparison over {len(segments)} segments")
    return IsnrComparison(values=values, segment_ids=[s.segment_id for s in segments], tests=tests)
