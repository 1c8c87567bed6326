"""
Correlation-based feature selection

Greedy backward search over the CFS merit

    merit(S) = k * mean|r_cf| / sqrt(k + k(k-1) * mean|r_ff|)

with Pearson correlations between each feature and the 0/1 label (r_cf) and
between feature pairs (r_ff).
"""

import math
from typing import List, Sequence

import numpy as np

from backend.console import log
from backend.ml.dataset import Dataset


def _abs_correlations(X: np.ndarray, y: np.ndarray):
    """|r| feature-vs-label vector and feature-vs-feature matrix; constant columns correlate 0"""
    data = np.column_stack([X, y.astype(np.float64)])
    centered = data - data.mean(axis=0)
    norms = np.sqrt(np.sum(centered ** 2, axis=0))
    live = norms > 0.0
    unit = np.zeros_like(centered)
    unit[:, live] = centered[:, live] / norms[live]
    corr = np.clip(np.abs(unit.T @ unit), 0.0, 1.0)

    r_cf = corr[:-1, -1]
    r_ff = corr[:-1, :-1].copy()
    np.fill_diagonal(r_ff, 0.0)
    return r_cf, r_ff


def merit(r_cf: np.ndarray, r_ff: np.ndarray, subset: Sequence[int]) -> float:
    """CFS merit of a subset of feature indices"""
    subset = list(subset)
    k = len(subset)
    if k == 0:
        return 0.0
    sum_cf = float(r_cf[subset].sum())
    # Each unordered pair once
    sum_ff = float(r_ff[np.ix_(subset, subset)].sum()) / 2.0
    return sum_cf / math.sqrt(k + 2.0 * sum_ff)


def cfs_select(ds: Dataset) -> List[str]:
    """
    Select a low-redundancy, label-correlated feature subset.

    Starts from all features and repeatedly drops the feature whose removal
    raises merit the most; stops when no removal improves it. Ties go to the
    feature that sorts first by name. Never returns an empty list.

    Returns:
        Selected names, in the dataset's column order
    """
    if ds.n_features < 2:
        raise ValueError("CFS needs at least 2 features")
    if ds.y is None:
        raise ValueError("CFS needs a labelled dataset")

    r_cf, r_ff = _abs_correlations(ds.X, ds.y)
    by_name = sorted(range(ds.n_features), key=lambda j: ds.feature_names[j])

    selected = np.ones(ds.n_features, dtype=bool)
    k = ds.n_features
    sum_cf = float(r_cf.sum())
    row_sums = r_ff.sum(axis=1)
    sum_ff = float(row_sums.sum()) / 2.0
    current = sum_cf / math.sqrt(k + 2.0 * sum_ff)

    while k > 1:
        best_j, best_merit = None, current
        for j in by_name:
            if not selected[j]:
                continue
            m = (sum_cf - r_cf[j]) / math.sqrt((k - 1) + 2.0 * (sum_ff - row_sums[j]))
            if m > best_merit:
                best_j, best_merit = j, m
        if best_j is None:
            break

        selected[best_j] = False
        k -= 1
        sum_cf -= r_cf[best_j]
        sum_ff -= row_sums[best_j]
        row_sums -= r_ff[:, best_j]
        current = best_merit

    names = [ds.feature_names[j] for j in range(ds.n_features) if selected[j]]
    log("CFS", f"Kept {len(names)} of {ds.n_features} features (merit {current:.4f})")
    return names
