"""
Evaluation metrics

ROC curves, AUC, accuracy at a probability threshold and the two-tailed
Mann-Whitney U test.
"""

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import norm, rankdata

Scored = Sequence[Tuple[int, float]]


def _unpack(scored: Scored) -> Tuple[np.ndarray, np.ndarray]:
    if len(scored) == 0:
        raise ValueError("no scored examples")
    labels = np.array([int(bool(label)) for label, _ in scored], dtype=np.int64)
    scores = np.array([float(score) for _, score in scored], dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    return labels, scores


@dataclass(frozen=True)
class RocCurve:
    """(threshold, fpr, tpr) points with thresholds descending, from (0, 0) to (1, 1)"""

    points: Tuple[Tuple[float, float, float], ...]

    @property
    def fpr(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    @property
    def tpr(self) -> np.ndarray:
        return np.array([p[2] for p in self.points])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.points), columns=['threshold', 'fpr', 'tpr'])

    def to_csv(self, path: Union[str, Path]):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format='%.17g', lineterminator='\n')


def roc_curve(scored: Scored) -> RocCurve:
    """
    ROC curve with one point per distinct score, plus a leading +inf sentinel.

    A threshold t predicts positive when score >= t, so tied scores move
    together and share a single point.

    Raises:
        ValueError: fewer than one example of either class
    """
    labels, scores = _unpack(scored)
    n_pos = int(labels.sum())
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError(f"ROC needs both classes, got {n_pos} positive / {n_neg} negative")

    points: List[Tuple[float, float, float]] = [(math.inf, 0.0, 0.0)]
    for threshold in np.unique(scores)[::-1]:
        predicted = scores >= threshold
        tp = int(np.sum(predicted & (labels == 1)))
        fp = int(np.sum(predicted & (labels == 0)))
        points.append((float(threshold), fp / n_neg, tp / n_pos))
    return RocCurve(tuple(points))


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the ROC curve"""
    fpr, tpr = curve.fpr, curve.tpr
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def auc_of(scored: Scored) -> float:
    return auc(roc_curve(scored))


def accuracy_at(scored: Scored, threshold: float) -> float:
    """Fraction classified correctly when probability >= threshold means positive"""
    labels, scores = _unpack(scored)
    predicted = (scores >= threshold).astype(np.int64)
    return float(np.mean(predicted == labels))


def best_accuracy_threshold(scored: Scored) -> Tuple[float, float]:
    """
    Threshold with the highest accuracy among the distinct scores (and +inf).

    Ties resolve to the threshold closest to 0.5.
    """
    _, scores = _unpack(scored)
    candidates = [math.inf] + [float(s) for s in np.unique(scores)]
    best = None
    for threshold in candidates:
        acc = accuracy_at(scored, threshold)
        key = (acc, -abs(threshold - 0.5))
        if best is None or key > best[0]:
            best = (key, threshold, acc)
    return best[1], best[2]


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p_value: float
    n1: int
    n2: int
    z: float = 0.0
    exact: bool = False


# Both samples at or below this size get the exact permutation p
EXACT_MAX_SIZE = 8


def _exact_p(ranks: np.ndarray, n1: int, u: float) -> float:
    """Share of all rank splits whose U lies at least as far from n1 n2 / 2 as u"""
    n = ranks.shape[0]
    mean_u = n1 * (n - n1) / 2.0
    splits = np.array(list(itertools.combinations(range(n), n1)), dtype=np.int64)
    u_all = ranks[splits].sum(axis=1) - n1 * (n1 + 1) / 2.0
    extreme = np.abs(u_all - mean_u) >= abs(u - mean_u) - 1e-9
    return float(np.mean(extreme))


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> MannWhitneyResult:
    """
    Two-tailed Mann-Whitney U test.

    Reports min(U_a, U_b). Midranks handle ties. When both samples hold at
    most 8 values p is the exact permutation probability over the observed
    midranks; otherwise it comes from the normal approximation with
    tie-corrected variance and a 0.5 continuity correction. If every value
    is identical, p = 1 and U = n1 n2 / 2.

    Args:
        a: first sample (n1 >= 1)
        b: second sample (n2 >= 1)

    Returns:
        MannWhitneyResult
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = a.shape[0], b.shape[0]
    if n1 < 1 or n2 < 1:
        raise ValueError("both samples need at least one value")

    ranks = rankdata(np.concatenate([a, b]))
    u_a = float(ranks[:n1].sum()) - n1 * (n1 + 1) / 2.0
    u_b = n1 * n2 - u_a
    u = min(u_a, u_b)

    n = n1 + n2
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts))
    variance = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0

    if variance <= 0.0:
        return MannWhitneyResult(u=n1 * n2 / 2.0, p_value=1.0, n1=n1, n2=n2, z=0.0)

    mean_u = n1 * n2 / 2.0
    z = max(abs(u - mean_u) - 0.5, 0.0) / math.sqrt(variance)
    if n1 <= EXACT_MAX_SIZE and n2 <= EXACT_MAX_SIZE:
        return MannWhitneyResult(u=u, p_value=_exact_p(ranks, n1, u), n1=n1, n2=n2, z=z, exact=True)
    p_value = min(1.0, 2.0 * float(norm.sf(z)))
    return MannWhitneyResult(u=u, p_value=p_value, n1=n1, n2=n2, z=z)
