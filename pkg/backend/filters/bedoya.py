"""
Double-threshold rain baseline

Flags a segment as rain when both the mean PSD and the spectral SNR of the
600-1200 Hz band exceed thresholds that rise together with a step x:

    y(x) = a x^2 + b x      (PSD threshold)
    z(x) = c + d x          (SNR threshold)

Sweeping x traces the baseline's ROC curve.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from backend.audio.audio_io import Segment
from backend.audio.dsp_core import stft
from backend.features.feature_sets import rain_band
from backend.features.indices import BandSpec, psd, snr_spectral
from backend.metrics.evaluation import RocCurve, auc, roc_curve
from config.acoustic_constants import BEDOYA_CONFIG


@dataclass(frozen=True)
class BedoyaConfig:
    band: BandSpec = rain_band()
    psd_a: float = BEDOYA_CONFIG["psd_poly"]["a"]
    psd_b: float = BEDOYA_CONFIG["psd_poly"]["b"]
    snr_c: float = BEDOYA_CONFIG["snr_poly"]["c"]
    snr_d: float = BEDOYA_CONFIG["snr_poly"]["d"]

    def psd_threshold(self, x: int) -> float:
        return self.psd_a * x * x + self.psd_b * x

    def snr_threshold(self, x: int) -> float:
        return self.snr_c + self.snr_d * x


@dataclass(frozen=True)
class BedoyaMeasure:
    """Band PSD and spectral SNR of one segment"""

    psd: float
    snr: float


def bedoya_measure(seg: Segment, cfg: BedoyaConfig = BedoyaConfig()) -> BedoyaMeasure:
    spec = stft(seg.audio)
    return BedoyaMeasure(psd=psd(spec, cfg.band), snr=snr_spectral(spec, cfg.band))


def _is_rain(measure: BedoyaMeasure, x: int, cfg: BedoyaConfig) -> bool:
    return measure.psd > cfg.psd_threshold(x) and measure.snr > cfg.snr_threshold(x)


def bedoya_classify(seg: Segment, x: int, cfg: BedoyaConfig = BedoyaConfig()) -> bool:
    """Rain iff band PSD > y(x) and band SNR > z(x)"""
    if x < 0:
        raise ValueError(f"step x must be non-negative, got {x}")
    return _is_rain(bedoya_measure(seg, cfg), x, cfg)


def bedoya_score(measure: BedoyaMeasure, steps: int = None, cfg: BedoyaConfig = BedoyaConfig()) -> float:
    """
    Fraction of the steps 0..steps-1 at which the segment is classified as rain.

    For x >= 1 both thresholds only rise, so the rain steps form a prefix and
    thresholding this score reproduces the sweep.
    """
    steps = BEDOYA_CONFIG["default_steps"] if steps is None else steps
    if steps < 1:
        raise ValueError(f"steps must be at least 1, got {steps}")
    count = 0
    for x in range(steps):
        if not _is_rain(measure, x, cfg):
            break
        count += 1
    return count / steps


def bedoya_sweep(
    segments: Sequence[Segment],
    labels: Sequence[int],
    steps: int = None,
    cfg: BedoyaConfig = BedoyaConfig(),
) -> Tuple[RocCurve, float, List[float]]:
    """
    Baseline ROC over x = 0..steps-1.

    Returns:
        (curve, auc, per-segment scores)
    """
    if len(segments) != len(labels):
        raise ValueError(f"{len(segments)} segments but {len(labels)} labels")
    scores = [bedoya_score(bedoya_measure(seg, cfg), steps, cfg) for seg in segments]
    curve = roc_curve(list(zip(labels, scores)))
    return curve, auc(curve), scores
