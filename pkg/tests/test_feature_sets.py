"""Tests for feature set naming and extraction"""

import numpy as np
import pytest

from backend.audio.audio_io import AudioBuffer
from backend.features.feature_sets import (
    FeatureSetId,
    FeatureVector,
    PreProcessing,
    canonical_bands,
    extract_features,
    feature_names,
)
from tests.conftest import SR, as_segment, make_noise


@pytest.mark.parametrize("set_id, plain, highpassed", [
    ("Indices", 8, 4),
    ("FreqIndices", 64, 44),
    ("MFCCs", 99, 99),
    ("MFCCsNoDelta", 33, 33),
    ("All", 163, 143),
    ("AllNoDelta", 97, 77),
])
def test_feature_counts(set_id, plain, highpassed):
    assert len(feature_names(set_id)) == plain
    assert len(feature_names(set_id, highpass=True)) == highpassed


def test_names_are_unique_and_ordered():
    names = feature_names(FeatureSetId.ALL)
    assert len(set(names)) == len(names)
    assert names[:4] == ["temporal_entropy", "spectral_entropy", "bgn", "bgn_std"]
    assert names[8] == "aci_0_500"
    assert names[-1] == "mfcc_d2_32"
    assert feature_names("AllNoDelta") == feature_names("FreqIndices") + feature_names("MFCCsNoDelta")


def test_highpass_drops_low_bands():
    assert [b.name for b in canonical_bands(highpass=True)] == ["1k_3k", "3k_5k", "5k_7k", "7k_9k", "9k_11k"]
    names = feature_names("All", highpass=True)
    assert not any(n.endswith("_0_500") or n.endswith("_500_1k") for n in names)
    assert not any(n.startswith("rain_") for n in names)


def test_cfs_subset_names():
    with pytest.raises(ValueError, match="run CFS"):
        feature_names(FeatureSetId.CFS_SUBSET)
    with pytest.raises(ValueError):
        feature_names("CFSSubset", selection=["not_a_feature"])
    # the rain indices do not exist under the high-pass
    with pytest.raises(ValueError):
        feature_names("CFSSubset", highpass=True, selection=["rain_psd"])
    assert feature_names("CFSSubset", selection=["psd_1k_3k", "bgn"]) == ["psd_1k_3k", "bgn"]


def test_unknown_set_is_rejected():
    with pytest.raises(ValueError, match="Known sets"):
        FeatureSetId.parse("Everything")


def test_feature_vector_checks_values():
    with pytest.raises(ValueError):
        FeatureVector({"a": 1.0, "b": float("nan")})
    vec = FeatureVector({"a": 1.0, "b": 2.0})
    np.testing.assert_array_equal(vec.to_array(["b", "a"]), [2.0, 1.0])
    assert vec.names == ["a", "b"]


def test_extract_indices_on_noise():
    seg = as_segment(make_noise(rms=0.05, seed=5))
    vec = extract_features(seg, "Indices")
    assert vec.names == feature_names("Indices")
    assert all(np.isfinite(vec.to_array()))
    assert 0.0 <= vec["temporal_entropy"] <= 1.0
    assert vec.flags == ()


def test_extract_all_with_highpass():
    seg = as_segment(make_noise(rms=0.05, seed=6))
    vec = extract_features(seg, FeatureSetId.ALL, PreProcessing(highpass=True))
    assert len(vec) == 143
    assert vec.names == feature_names("All", highpass=True)


def test_cfs_subset_matches_all():
    seg = as_segment(make_noise(rms=0.03, seed=8))
    selection = ["mfcc_03", "psd_3k_5k", "temporal_entropy"]
    full = extract_features(seg, "All")
    subset = extract_features(seg, "CFSSubset", selection=selection)
    assert subset.names == selection
    for name in selection:
        assert subset[name] == pytest.approx(full[name])


def test_silent_segment_is_flagged_not_failed():
    seg = as_segment(AudioBuffer(np.zeros(10 * SR), SR))
    vec = extract_features(seg, "Indices")
    assert all(np.isfinite(vec.to_array()))
    assert vec["temporal_entropy"] == 1.0
    assert vec["rain_snr"] == 1e9
    assert set(vec.flags) == {"temporal_entropy", "spectral_entropy", "rain_snr"}


def test_mmse_preprocessing_changes_features():
    seg = as_segment(make_noise(rms=0.05, seed=9))
    raw = extract_features(seg, "Indices")
    cleaned = extract_features(seg, "Indices", PreProcessing(mmse=True))
    assert cleaned["bgn"] < raw["bgn"]
