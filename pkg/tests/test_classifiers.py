"""Tests for the four classifiers and the shared prediction path"""

import math

import numpy as np
import pytest

from backend.features.feature_sets import FeatureVector
from backend.ml.classifiers import (
    FeatureMismatchError,
    canonical_order,
    classify,
    predict_proba,
    train_knn,
    train_naive_bayes,
    train_random_forest,
    train_tree,
)
from backend.ml.dataset import Dataset
from tests.conftest import make_dataset


def _one_feature(values, labels):
    values = np.asarray(values, dtype=float)
    return Dataset(["x"], values[:, None], np.asarray(labels), [f"r{i}" for i in range(len(values))])


def test_naive_bayes_hand_computed():
    # class means 1 and 5, both variances 1, equal priors
    model = train_naive_bayes(_one_feature([0.0, 2.0, 4.0, 6.0], [0, 0, 1, 1]))
    assert predict_proba(model, {"x": 3.0}) == pytest.approx(0.5)
    assert predict_proba(model, {"x": 5.0}) == pytest.approx(1.0 / (1.0 + math.exp(-8.0)))


def test_naive_bayes_needs_two_rows_per_class():
    with pytest.raises(ValueError):
        train_naive_bayes(_one_feature([0.0, 1.0, 2.0], [0, 0, 1]))


def test_naive_bayes_floors_zero_variance():
    model = train_naive_bayes(_one_feature([1.0, 1.0, 5.0, 5.0], [0, 0, 1, 1]))
    assert np.all(model.variances >= 1e-9)
    assert predict_proba(model, {"x": 5.0}) == pytest.approx(1.0)


def test_knn_hand_computed():
    ds = _one_feature([0.0, 1.0, 2.0, 10.0, 11.0, 12.0], [0, 0, 0, 1, 1, 1])
    model = train_knn(ds, k=3)
    assert predict_proba(model, {"x": 11.0}) == pytest.approx(4 / 5)
    assert predict_proba(model, {"x": 1.0}) == pytest.approx(1 / 5)


def test_knn_argument_checks():
    ds = make_dataset(n_per_class=2)
    with pytest.raises(ValueError):
        train_knn(ds, k=2)
    with pytest.raises(ValueError):
        train_knn(ds, k=5)


def test_tree_separates_shifted_classes():
    ds = make_dataset(n_per_class=30, shift=6.0)
    model = train_tree(ds)
    probs = model.predict_proba_matrix(ds.X)
    assert np.mean((probs >= 0.5) == (ds.y == 1)) == 1.0


def test_forest_probability_is_a_vote_fraction():
    ds = make_dataset(n_per_class=20)
    model = train_random_forest(ds, trees=11, seed=3)
    probs = model.predict_proba_matrix(ds.X)
    np.testing.assert_allclose(probs * 11, np.round(probs * 11))
    assert model.training_config == {'trees': 11, 'seed': 3, 'max_features': 2}


def test_forest_is_deterministic_and_order_free():
    ds = make_dataset(n_per_class=20, n_features=5)
    shuffled = ds.subset(np.random.default_rng(9).permutation(len(ds)))

    a = train_random_forest(ds, trees=15, seed=7)
    b = train_random_forest(shuffled, trees=15, seed=7)
    np.testing.assert_array_equal(a.predict_proba_matrix(ds.X), b.predict_proba_matrix(ds.X))


def test_forest_parallel_matches_serial():
    ds = make_dataset(n_per_class=15, n_features=4)
    serial = train_random_forest(ds, trees=6, seed=1, jobs=1)
    parallel = train_random_forest(ds, trees=6, seed=1, jobs=2)
    np.testing.assert_array_equal(serial.predict_proba_matrix(ds.X), parallel.predict_proba_matrix(ds.X))


def test_all_models_rank_separable_data():
    ds = make_dataset(n_per_class=25, shift=4.0, seed=2)
    models = [train_naive_bayes(ds), train_knn(ds, 5), train_tree(ds), train_random_forest(ds, trees=25, seed=0)]
    for model in models:
        probs = model.predict_proba_matrix(ds.X)
        assert np.all((probs >= 0.0) & (probs <= 1.0))
        assert probs[ds.y == 1].mean() > probs[ds.y == 0].mean() + 0.4, model.kind


def test_missing_feature_is_named():
    model = train_naive_bayes(make_dataset(n_per_class=3))
    with pytest.raises(FeatureMismatchError) as info:
        predict_proba(model, FeatureVector({"f0": 1.0, "f2": 0.0}))
    assert info.value.missing == ["f1"]
    assert "f1" in str(info.value)


def test_extra_features_are_ignored_and_order_follows_model():
    model = train_knn(make_dataset(n_per_class=5), k=3)
    values = {"extra": 9.0, "f2": 0.1, "f1": 0.2, "f0": 0.3}
    np.testing.assert_array_equal(model.align(values), [0.3, 0.2, 0.1])
    assert classify(model, values, 0.0)


def test_matrix_width_is_checked():
    model = train_tree(make_dataset(n_per_class=5))
    with pytest.raises(ValueError):
        model.predict_proba_matrix(np.zeros((2, 5)))


def test_annotate_copies_config():
    model = train_tree(make_dataset(n_per_class=5))
    tagged = model.annotate(highpass=True)
    assert tagged.training_config['highpass'] is True
    assert 'highpass' not in model.training_config


def test_canonical_order_ignores_input_order():
    X = np.array([[1.0], [2.0], [3.0]])
    y = np.array([0, 1, 0])
    order = canonical_order(X, y)
    flipped = canonical_order(X[::-1], y[::-1])
    np.testing.assert_array_equal(X[order], X[::-1][flipped])
