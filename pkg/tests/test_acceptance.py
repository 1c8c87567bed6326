"""End-to-end checks on the synthetic corpus (run with --runslow)"""

import pytest

from backend.features.feature_sets import FeatureSetId, extract_features
from backend.filters.bedoya import bedoya_sweep
from backend.filters.cicada_filter import band_energy_db, evaluate_cicada_isnr, remove_cicada_band
from backend.ml.cross_validation import ClassifierConfig, cross_validate, sweep_k
from backend.ml.dataset import Dataset
from backend.synth.scene_generator import ChorusComponent

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def all_vectors(corpus):
    return [extract_features(scene.segment, FeatureSetId.ALL) for scene in corpus]


def _dataset(corpus, vectors, task):
    labels = [scene.labels.label(task) for scene in corpus]
    return Dataset.from_vectors(vectors, labels, [scene.scene_id for scene in corpus])


@pytest.fixture(scope="module")
def rain_report(corpus, all_vectors):
    return cross_validate(_dataset(corpus, all_vectors, "rain"), ClassifierConfig("random-forest"), folds=10, seed=42)


def test_random_forest_detects_rain(rain_report):
    assert rain_report.auc >= 0.95


def test_random_forest_detects_cicada_chorus(corpus, all_vectors):
    report = cross_validate(_dataset(corpus, all_vectors, "cicada"), ClassifierConfig("random-forest"), folds=10, seed=42)
    assert report.auc >= 0.95


def test_baseline_trails_the_forest(corpus, rain_report):
    labels = [int(scene.labels.rain) for scene in corpus]
    _curve, baseline_auc, _scores = bedoya_sweep([scene.segment for scene in corpus], labels)
    assert baseline_auc < rain_report.auc


@pytest.fixture(scope="module")
def chorus_scenes(corpus):
    scenes = [scene for scene in corpus if scene.scene_class == "cicada"][:30]
    assert len(scenes) == 30
    return scenes


def test_chorus_band_is_located_and_removed(chorus_scenes):
    hits = 0
    for scene in chorus_scenes:
        chorus = next(c for c in scene.spec.components if isinstance(c, ChorusComponent))
        audio = scene.segment.audio
        filtered, band, _ = remove_cicada_band(audio)
        if band is None or not band[0] <= chorus.center_hz <= band[1]:
            continue
        hits += 1
        core = (chorus.center_hz - 50.0, chorus.center_hz + 50.0)
        assert band_energy_db(audio, *core) - band_energy_db(filtered, *core) >= 30.0
        # chirps of chorus scenes sit in 5-9 kHz
        assert abs(band_energy_db(audio, 5000.0, 9000.0) - band_energy_db(filtered, 5000.0, 9000.0)) <= 1.0
    assert hits >= 29


def test_chorus_removal_with_mmse_raises_isnr(chorus_scenes):
    comparison = evaluate_cicada_isnr([scene.segment for scene in chorus_scenes])
    raw_vs_both = next(r for a, b, r in comparison.tests if (a, b) == ("raw", "both"))

    medians = comparison.summary_frame().set_index("variant")["median"]
    assert medians["raw"] < medians["mmse"] < medians["both"]
    assert raw_vs_both.p_value < 0.01


def test_knn_sweep_reports_a_best_k(corpus, all_vectors):
    results, best_k = sweep_k(_dataset(corpus, all_vectors, "rain"), folds=10, seed=42)
    assert best_k in [k for k, _ in results]
    assert best_k % 2 == 1
