"""Tests for correlation-based feature selection"""

import numpy as np
import pytest

from backend.ml.cfs import _abs_correlations, cfs_select, merit
from backend.ml.dataset import Dataset


def _dataset(columns, y):
    names = list(columns)
    X = np.column_stack([columns[n] for n in names])
    return Dataset(names, X, np.asarray(y), [f"r{i}" for i in range(len(y))])


def test_merit_formula():
    r_cf = np.array([0.8, 0.6])
    r_ff = np.array([[0.0, 0.5], [0.5, 0.0]])
    assert merit(r_cf, r_ff, [0]) == pytest.approx(0.8)
    assert merit(r_cf, r_ff, [0, 1]) == pytest.approx(1.4 / np.sqrt(2 + 2 * 0.5))
    assert merit(r_cf, r_ff, []) == 0.0


def test_constant_column_correlates_zero():
    X = np.column_stack([np.ones(6), np.arange(6.0)])
    y = np.array([0, 0, 0, 1, 1, 1])
    r_cf, r_ff = _abs_correlations(X, y)
    assert r_cf[0] == 0.0
    assert r_ff[0, 1] == 0.0
    assert r_cf[1] > 0.8


def test_redundant_copy_and_noise_are_dropped():
    rng = np.random.default_rng(0)
    y = np.repeat([0, 1], 100)
    signal = y + 0.3 * rng.standard_normal(200)
    ds = _dataset({
        "signal": signal,
        "copy": signal + 0.5 * rng.standard_normal(200),
        "noise": rng.standard_normal(200),
    }, y)

    assert cfs_select(ds) == ["signal"]


def test_complementary_features_are_kept():
    rng = np.random.default_rng(1)
    y = np.repeat([0, 1], 100)
    a = y + 0.8 * rng.standard_normal(200)
    b = y + 0.8 * rng.standard_normal(200)
    ds = _dataset({"a": a, "b": b, "junk": rng.standard_normal(200)}, y)
    assert cfs_select(ds) == ["a", "b"]


def test_result_follows_column_order():
    rng = np.random.default_rng(2)
    y = np.repeat([0, 1], 60)
    ds = _dataset({
        "z_first": y + 0.7 * rng.standard_normal(120),
        "a_second": y + 0.7 * rng.standard_normal(120),
    }, y)
    assert cfs_select(ds) == ["z_first", "a_second"]


def test_needs_labels_and_two_features():
    with pytest.raises(ValueError):
        cfs_select(Dataset(["a"], np.zeros((4, 1)), np.array([0, 1, 0, 1]), list("wxyz")))
    with pytest.raises(ValueError):
        cfs_select(Dataset(["a", "b"], np.zeros((4, 2)), None, list("wxyz")))
