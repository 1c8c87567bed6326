"""
Shared fixtures: synthetic signals, a fresh pipeline config per test and a
session-wide labelled corpus for the end-to-end checks.
"""

import numpy as np
import pytest

from backend.audio.audio_io import AudioBuffer, Segment
from backend.console import set_quiet
from config.acoustic_constants import CANONICAL_SAMPLE_RATE
from config.pipeline_config import reset_pipeline_config


SR = CANONICAL_SAMPLE_RATE


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run end-to-end corpus checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def fresh_config(monkeypatch):
    for name in ("NOISEFILTER_CONFIG", "NOISEFILTER_JOBS", "NOISEFILTER_SEED"):
        monkeypatch.delenv(name, raising=False)
    reset_pipeline_config()
    set_quiet(True)
    yield
    reset_pipeline_config()


def make_tone(freq: float, seconds: float = 10.0, amplitude: float = 0.5, sr: int = SR) -> AudioBuffer:
    t = np.arange(int(round(seconds * sr))) / sr
    return AudioBuffer(amplitude * np.sin(2.0 * np.pi * freq * t), sr)


def make_noise(rms: float = 0.05, seconds: float = 10.0, seed: int = 0, sr: int = SR) -> AudioBuffer:
    rng = np.random.default_rng(seed)
    return AudioBuffer(np.clip(rms * rng.standard_normal(int(round(seconds * sr))), -1.0, 1.0), sr)


def as_segment(audio: AudioBuffer, source_id: str = "clip", index: int = 0) -> Segment:
    return Segment(audio, source_id, index, 0.0)


@pytest.fixture
def tone():
    return make_tone


@pytest.fixture
def noise():
    return make_noise


@pytest.fixture(scope="session")
def corpus():
    """200 labelled scenes, generated once per session"""
    from backend.synth.scene_generator import gen_corpus
    set_quiet(True)
    return gen_corpus(200, seed=2024)


def make_dataset(n_per_class: int = 30, n_features: int = 3, shift: float = 3.0, seed: int = 0):
    """Two Gaussian classes separated along the first feature only"""
    from backend.ml.dataset import Dataset
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((2 * n_per_class, n_features))
    y = np.repeat([0, 1], n_per_class)
    X[y == 1, 0] += shift
    names = [f"f{j}" for j in range(n_features)]
    return Dataset(names, X, y, [f"row_{i:03d}" for i in range(len(y))])


def constant_model(probability: float, names=None, **config):
    """Stand-in detector that ignores its input"""
    from dataclasses import dataclass
    from backend.features.feature_sets import feature_names
    from backend.ml.classifiers import TrainedModel

    @dataclass(frozen=True, eq=False)
    class ConstantModel(TrainedModel):
        probability: float = 0.5

        def _proba_matrix(self, X):
            return np.full(X.shape[0], self.probability)

    names = feature_names("Indices") if names is None else list(names)
    return ConstantModel(kind="tree", feature_names=names, training_config=dict(config), probability=probability)
