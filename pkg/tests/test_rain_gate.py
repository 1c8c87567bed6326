"""Tests for the rain gate"""

import math

import numpy as np
import pytest

from backend.audio.audio_io import AudioBuffer, Segment
from backend.features.feature_sets import PreProcessing
from backend.filters.detection import check_compatible, model_preprocessing
from backend.filters.rain_gate import RainGateConfig, gate_rain
from backend.ml.classifiers import FeatureMismatchError
from tests.conftest import SR, as_segment, constant_model, make_noise


@pytest.fixture
def segments():
    return [as_segment(make_noise(rms=0.05, seed=s), source_id="rec", index=s) for s in range(3)]


def test_threshold_partitions_segments(segments):
    model = constant_model(0.7)

    dropped_all = gate_rain(segments, RainGateConfig(model, threshold=0.5))
    assert dropped_all.kept == []
    assert len(dropped_all.dropped) == 3

    kept_all = gate_rain(segments, RainGateConfig(model, threshold=1.01))
    assert len(kept_all.kept) == 3
    assert kept_all.dropped == []

    # probability equal to the threshold is dropped
    boundary = gate_rain(segments, RainGateConfig(model, threshold=0.7))
    assert len(boundary.dropped) == 3


def test_threshold_zero_drops_everything(segments):
    result = gate_rain(segments, RainGateConfig(constant_model(0.0), threshold=0.0))
    assert len(result.dropped) == 3


def test_invalid_threshold():
    with pytest.raises(ValueError):
        RainGateConfig(constant_model(0.5), threshold=-0.1)
    with pytest.raises(ValueError):
        RainGateConfig(constant_model(0.5), threshold=math.nan)


def test_report_lists_every_segment(tmp_path, segments):
    result = gate_rain(segments, RainGateConfig(constant_model(0.2), threshold=0.5))
    frame = result.report_frame()
    assert list(frame.columns) == ["segment_id", "probability", "action"]
    assert list(frame["segment_id"]) == ["rec_0", "rec_1", "rec_2"]
    assert set(frame["action"]) == {"kept"}

    path = tmp_path / "gate_report.csv"
    result.write_report(path)
    assert path.read_text().splitlines()[1] == "rec_0,0.20000000000000001,kept"


def test_unscorable_segment_goes_to_errors(segments):
    short = Segment(AudioBuffer(np.zeros(100), SR), "tiny", 0, 0.0)
    result = gate_rain(segments + [short], RainGateConfig(constant_model(0.2), threshold=0.5))
    assert len(result.kept) == 3
    assert [sid for sid, _ in result.errors] == ["tiny_0"]
    assert math.isnan(result.probabilities[-1])
    assert result.report_frame()["action"].iloc[-1] == "error"


def test_parallel_matches_serial(segments):
    cfg = RainGateConfig(constant_model(0.6), threshold=0.5)
    serial = gate_rain(segments, cfg, jobs=1)
    parallel = gate_rain(segments, cfg, jobs=2)
    assert [s.segment_id for s in serial.dropped] == [s.segment_id for s in parallel.dropped]


def test_highpass_model_cannot_use_low_band_features():
    model = constant_model(0.5, names=["rain_psd", "bgn"])
    with pytest.raises(FeatureMismatchError) as info:
        gate_rain([], RainGateConfig(model, pre=PreProcessing(highpass=True)))
    assert info.value.missing == ["rain_psd"]


def test_preprocessing_comes_from_the_model():
    model = constant_model(0.5, highpass=True, mmse=False)
    assert model_preprocessing(model) == PreProcessing(highpass=True)
    assert RainGateConfig(model).pre == PreProcessing(highpass=True)
    # Indices under the high-pass lacks the rain-band names
    with pytest.raises(FeatureMismatchError):
        check_compatible(model)
