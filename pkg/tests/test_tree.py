"""Tests for the gain-ratio tree grower"""

import numpy as np
import pytest

from backend.ml.tree import LEAF, TreeGrower, best_threshold


def _xor_grid():
    # unequal quadrant sizes give the first split a positive gain
    quadrants = [((-1.0, -1.0), 0, 10), ((-1.0, 1.0), 1, 5), ((1.0, -1.0), 1, 15), ((1.0, 1.0), 0, 10)]
    X, y = [], []
    for point, label, count in quadrants:
        X += [point] * count
        y += [label] * count
    return np.array(X), np.array(y)


def test_best_threshold_is_a_midpoint():
    gain, ratio, threshold = best_threshold(np.array([4.0, 1.0, 3.0, 2.0]), np.array([1, 0, 1, 0]))
    assert threshold == pytest.approx(2.5)
    assert gain == pytest.approx(1.0)
    assert ratio == pytest.approx(1.0)


def test_constant_feature_has_no_threshold():
    assert best_threshold(np.ones(5), np.array([0, 1, 0, 1, 1])) is None


def test_xor_grid_is_learned_exactly():
    X, y = _xor_grid()
    nodes = TreeGrower().grow(X, y)

    assert nodes.n_nodes == 7
    assert nodes.depth() == 2
    # equal gain and ratio on both features: the lower index wins
    assert nodes.feature[0] == 0
    assert nodes.threshold[0] == pytest.approx(0.0)

    probe = np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]])
    np.testing.assert_allclose(nodes.laplace_proba(probe), [1 / 12, 6 / 7, 16 / 17, 1 / 12])
    np.testing.assert_array_equal(nodes.votes(probe), [0, 1, 1, 0])


def test_min_rows_stops_growth():
    X, y = _xor_grid()
    nodes = TreeGrower(min_rows=100).grow(X, y)
    assert nodes.n_nodes == 1
    assert nodes.feature[0] == LEAF
    assert nodes.laplace_proba(X[:1])[0] == pytest.approx(21 / 42)


def test_pure_node_is_a_leaf():
    nodes = TreeGrower().grow(np.arange(6, dtype=float)[:, None], np.ones(6, dtype=int))
    assert nodes.n_nodes == 1
    assert nodes.votes(np.zeros((1, 1)))[0] == 1


def test_tie_vote_is_negative():
    nodes = TreeGrower(min_rows=10).grow(np.array([[0.0], [1.0]]), np.array([0, 1]))
    assert nodes.votes(np.array([[0.5]]))[0] == 0


def test_feature_subsampling_needs_rng():
    with pytest.raises(ValueError):
        TreeGrower(max_features=2)


def test_feature_subsampling_is_seeded():
    rng_data = np.random.default_rng(0)
    X = rng_data.standard_normal((80, 6))
    y = (X[:, 0] + X[:, 3] > 0).astype(int)
    a = TreeGrower(min_rows=2, max_features=2, rng=np.random.default_rng(5)).grow(X, y)
    b = TreeGrower(min_rows=2, max_features=2, rng=np.random.default_rng(5)).grow(X, y)
    np.testing.assert_array_equal(a.feature, b.feature)
    np.testing.assert_array_equal(a.threshold, b.threshold)


def test_zero_rows_rejected():
    with pytest.raises(ValueError):
        TreeGrower().grow(np.zeros((0, 2)), np.zeros(0, dtype=int))
