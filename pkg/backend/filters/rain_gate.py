"""
Rain gate

Drops segments whose rain probability reaches the threshold. Lowering the
threshold removes more rain at the cost of more clean audio.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from backend.audio.audio_io import Segment
from backend.console import log, warn
from backend.features.feature_sets import PreProcessing
from backend.filters.detection import check_compatible, detector_probability, model_preprocessing
from backend.ml.classifiers import TrainedModel
from config.pipeline_config import get_pipeline_config


@dataclass(frozen=True)
class RainGateConfig:
    """
    Model, probability threshold and pre-processing for the gate.

    Thresholds above 1 keep everything; 0 drops everything.
    """

    model: TrainedModel
    threshold: float = 0.5
    pre: Optional[PreProcessing] = None

    def __post_init__(self):
        if not np.isfinite(self.threshold) or self.threshold < 0.0:
            raise ValueError(f"threshold must be a finite value >= 0, got {self.threshold}")
        if self.pre is None:
            object.__setattr__(self, 'pre', model_preprocessing(self.model))


@dataclass
class GateResult:
    kept: List[Segment]
    dropped: List[Segment]
    probabilities: List[float]          # input order; NaN where extraction failed
    errors: List[Tuple[str, str]] = field(default_factory=list)
    segment_ids: List[str] = field(default_factory=list)
    threshold: float = 0.5

    def report_frame(self) -> pd.DataFrame:
        failed = {sid for sid, _ in self.errors}
        rows = []
        for sid, prob in zip(self.segment_ids, self.probabilities):
            if sid in failed:
                action = 'error'
            else:
                action = 'dropped' if prob >= self.threshold else 'kept'
            rows.append((sid, prob, action))
        return pd.DataFrame(rows, columns=['segment_id', 'probability', 'action'])

    def write_report(self, path: Union[str, Path]):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        self.report_frame().to_csv(path, index=False, float_format='%.17g', lineterminator='\n')


def _score(seg: Segment, cfg: RainGateConfig):
    try:
        return detector_probability(seg, cfg.model, cfg.pre), None
    except (ValueError, ArithmeticError) as e:
        return float('nan'), str(e)


def gate_rain(segments: Sequence[Segment], cfg: RainGateConfig, jobs: Optional[int] = None) -> GateResult:
    """
    Split segments into kept and dropped by rain probability.

    A segment is dropped iff its probability >= cfg.threshold. Segments whose
    features cannot be computed go to the error list instead.

    Raises:
        FeatureMismatchError: the model needs features unavailable under cfg.pre
    """
    check_compatible(cfg.model, cfg.pre)
    jobs = get_pipeline_config().jobs if jobs is None else jobs

    if jobs > 1:
        scored = Parallel(n_jobs=jobs, prefer='threads')(delayed(_score)(seg, cfg) for seg in segments)
    else:
        scored = [_score(seg, cfg) for seg in segments]

    result = GateResult(kept=[], dropped=[], probabilities=[], threshold=cfg.threshold)
    for seg, (prob, err) in zip(segments, scored):
        result.segment_ids.append(seg.segment_id)
        result.probabilities.append(prob)
        if err is not None:
            result.errors.append((seg.segment_id, err))
            warn("RainGate", f"{seg.segment_id}: {err}")
        elif prob >= cfg.threshold:
            result.dropped.append(seg)
        else:
            result.kept.append(seg)

    log("RainGate", f"Kept {len(result.kept)}, dropped {len(result.dropped)}, failed {len(result.errors)}")
    return result
