"""
Detector scoring

Extracts exactly the features a trained model was bound to, under the
pre-processing recorded in its training config, and returns its probability.
"""

from typing import Optional

from backend.audio.audio_io import Segment
from backend.features.feature_sets import FeatureSetId, PreProcessing, extract_features, feature_names
from backend.ml.classifiers import FeatureMismatchError, TrainedModel, predict_proba


def model_preprocessing(model: TrainedModel) -> PreProcessing:
    config = model.training_config
    return PreProcessing(highpass=bool(config.get('highpass', False)), mmse=bool(config.get('mmse', False)))


def check_compatible(model: TrainedModel, pre: Optional[PreProcessing] = None):
    """
    Raise FeatureMismatchError if the model needs features the extractor cannot produce.

    Feature sets below 1 kHz disappear under the high-pass, so a model trained
    without it cannot be served with it (and vice versa for the 143-name sets).
    """
    pre = model_preprocessing(model) if pre is None else pre
    available = set(feature_names(FeatureSetId.ALL, pre.highpass))
    missing = [name for name in model.feature_names if name not in available]
    if missing:
        raise FeatureMismatchError(missing)


def detector_probability(seg: Segment, model: TrainedModel, pre: Optional[PreProcessing] = None) -> float:
    pre = model_preprocessing(model) if pre is None else pre
    check_compatible(model, pre)
    vector = extract_features(seg, FeatureSetId.CFS_SUBSET, pre, selection=model.feature_names)
    return predict_proba(model, vector)
