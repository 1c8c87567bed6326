"""Tests for fold assignment, cross-validation reports and the k sweep"""

import numpy as np
import pytest

from backend.ml.cross_validation import ClassifierConfig, assign_folds, cross_validate, sweep_k, train
from tests.conftest import make_dataset


def test_fold_assignment_is_balanced_and_seeded():
    folds = assign_folds(23, 5, seed=42)
    counts = np.bincount(folds, minlength=5)
    assert counts.max() - counts.min() <= 1
    np.testing.assert_array_equal(folds, assign_folds(23, 5, seed=42))
    assert not np.array_equal(folds, assign_folds(23, 5, seed=43))


def test_fold_count_limits():
    with pytest.raises(ValueError):
        assign_folds(5, 1, seed=0)
    with pytest.raises(ValueError):
        assign_folds(5, 6, seed=0)


def test_config_validation_and_overrides():
    with pytest.raises(ValueError):
        ClassifierConfig(kind="svm")
    config = ClassifierConfig.from_pipeline("knn", k=7, trees=None)
    assert config.k == 7
    assert config.trees == 100
    assert config.seed == 42
    assert "k=7" in config.describe()


def test_every_row_predicted_once():
    ds = make_dataset(n_per_class=20, shift=3.0)
    report = cross_validate(ds, ClassifierConfig("naive-bayes"), folds=5, seed=1)

    assert [p[0] for p in report.fold_predictions] == ds.row_ids
    assert sorted({p[3] for p in report.fold_predictions}) == [0, 1, 2, 3, 4]
    assert all(0.0 <= p[2] <= 1.0 for p in report.fold_predictions)
    assert report.auc > 0.9
    assert report.warnings == []


def test_cross_validation_is_reproducible():
    ds = make_dataset(n_per_class=15, n_features=4)
    config = ClassifierConfig("random-forest", trees=9, seed=5)
    a = cross_validate(ds, config, folds=3)
    b = cross_validate(ds, config, folds=3)
    assert a.fold_predictions == b.fold_predictions
    assert a.auc == b.auc


def test_single_class_fold_warns():
    # 12 rows, 3 positive, 6 folds of 2: at least three test folds are all negative
    ds = make_dataset(n_per_class=6)
    ds.y[:] = 0
    ds.y[:3] = 1
    report = cross_validate(ds, ClassifierConfig("knn", k=1), folds=6, seed=0)
    assert report.warnings
    assert "only one class" in report.warnings[0]


def test_cfs_runs_inside_each_fold():
    ds = make_dataset(n_per_class=20, n_features=4, shift=3.0)
    report = cross_validate(ds, ClassifierConfig("naive-bayes", use_cfs=True), folds=4, seed=2)
    assert sorted(report.selections) == [0, 1, 2, 3]
    assert all("f0" in names for names in report.selections.values())


def test_report_files(tmp_path):
    ds = make_dataset(n_per_class=10)
    report = cross_validate(ds, ClassifierConfig("tree"), folds=5, seed=0)
    report.write(tmp_path, stem="cv")

    text = (tmp_path / "cv_report.txt").read_text()
    assert text.startswith("classifier: tree seed=42")
    assert "auc: " in text
    header = (tmp_path / "cv_predictions.csv").read_text().splitlines()[0]
    assert header == "segment_id,label,probability,fold"


def test_train_records_config():
    model = train(make_dataset(n_per_class=5), ClassifierConfig("knn", k=3))
    assert model.training_config["classifier"] == "knn"
    assert model.training_config["cfs"] is False


def test_sweep_picks_best_k_and_skips_oversized():
    ds = make_dataset(n_per_class=10, shift=2.0, seed=6)
    results, best_k = sweep_k(ds, ks=[1, 3, 5, 19], folds=5, seed=0)
    tried = [k for k, _ in results]
    # 20 rows, 5 folds: training folds hold 16 rows
    assert tried == [1, 3, 5]
    best_auc = max(r.auc for _, r in results)
    assert best_k == min(k for k, r in results if r.auc == best_auc)


def test_explicit_seed_also_seeds_the_fold_models():
    ds = make_dataset(n_per_class=15, shift=0.8, seed=2)
    overridden = cross_validate(ds, ClassifierConfig("random-forest", trees=5, seed=1), folds=3, seed=7)
    from_config = cross_validate(ds, ClassifierConfig("random-forest", trees=5, seed=7), folds=3)

    assert overridden.seed == from_config.seed == 7
    assert [p[2] for p in overridden.fold_predictions] == [p[2] for p in from_config.fold_predictions]
