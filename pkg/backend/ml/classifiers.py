"""
Classifiers

Four probability-emitting binary classifiers: Gaussian naive Bayes, k-nearest
neighbours, a C4.5-style decision tree and a random forest. Every trainer
first puts the rows into a canonical order (sorted by a content hash) so a
model depends only on the multiset of rows and the seed.
"""

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from backend.console import log
from backend.features.feature_sets import FeatureVector
from backend.ml.dataset import Dataset
from backend.ml.tree import TreeGrower, TreeNodes
from config.pipeline_config import get_pipeline_config


class FeatureMismatchError(KeyError):
    """Feature vector lacks names the model was trained on"""

    def __init__(self, missing: Sequence[str]):
        self.missing = list(missing)
        super().__init__(f"feature vector is missing {len(self.missing)} model feature(s): {', '.join(self.missing)}")

    def __str__(self) -> str:
        return self.args[0]


def canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row permutation sorting rows by the SHA-256 of their values and label"""
    keys = [
        hashlib.sha256(np.ascontiguousarray(X[i]).tobytes() + bytes([int(y[i])])).hexdigest()
        for i in range(X.shape[0])
    ]
    return np.array(sorted(range(X.shape[0]), key=lambda i: keys[i]), dtype=np.int64)


def _canonical(ds: Dataset):
    order = canonical_order(ds.X, ds.y)
    return ds.X[order], ds.y[order]


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """
    Base class for trained classifiers.

    Subclasses implement _proba_matrix over a matrix whose columns follow
    feature_names.
    """

    kind: str
    feature_names: List[str]
    training_config: Dict[str, Any] = field(default_factory=dict)

    def _proba_matrix(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ValueError(f"expected a matrix with {len(self.feature_names)} columns, got shape {X.shape}")
        return np.clip(self._proba_matrix(X), 0.0, 1.0)

    def align(self, v: Union[FeatureVector, Mapping[str, float]]) -> np.ndarray:
        """Vector values in the model's feature order"""
        values = v.values if isinstance(v, FeatureVector) else v
        missing = [name for name in self.feature_names if name not in values]
        if missing:
            raise FeatureMismatchError(missing)
        return np.array([float(values[name]) for name in self.feature_names])

    def annotate(self, **extra) -> "TrainedModel":
        """Copy with extra keys merged into training_config"""
        config = dict(self.training_config)
        config.update(extra)
        return replace(self, training_config=config)


@dataclass(frozen=True, eq=False)
class NaiveBayesModel(TrainedModel):
    priors: np.ndarray = None       # [negative, positive]
    means: np.ndarray = None        # [2 x features]
    variances: np.ndarray = None    # [2 x features]

    def _proba_matrix(self, X: np.ndarray) -> np.ndarray:
        log_like = []
        for c in (0, 1):
            var = self.variances[c]
            ll = -0.5 * np.sum(np.log(2.0 * math.pi * var) + (X - self.means[c]) ** 2 / var, axis=1)
            log_like.append(ll + math.log(self.priors[c]))
        return np.exp(log_like[1] - np.logaddexp(log_like[0], log_like[1]))


@dataclass(frozen=True, eq=False)
class KnnModel(TrainedModel):
    k: int = 1
    center: np.ndarray = None
    scale: np.ndarray = None
    train_z: np.ndarray = None      # standardized training rows, canonical order
    labels: np.ndarray = None

    def _proba_matrix(self, X: np.ndarray) -> np.ndarray:
        Z = (X - self.center) / self.scale
        out = np.empty(Z.shape[0])
        for i, z in enumerate(Z):
            dist = np.sum((self.train_z - z) ** 2, axis=1)
            nearest = np.argsort(dist, kind='stable')[:self.k]
            out[i] = (self.labels[nearest].sum() + 1.0) / (self.k + 2.0)
        return out


@dataclass(frozen=True, eq=False)
class TreeModel(TrainedModel):
    nodes: TreeNodes = None

    def _proba_matrix(self, X: np.ndarray) -> np.ndarray:
        return self.nodes.laplace_proba(X)


@dataclass(frozen=True, eq=False)
class RandomForestModel(TrainedModel):
    trees: List[TreeNodes] = field(default_factory=list)

    def votes(self, X: np.ndarray) -> np.ndarray:
        """[trees x rows] matrix of 0/1 votes"""
        return np.vstack([tree.votes(X) for tree in self.trees])

    def _proba_matrix(self, X: np.ndarray) -> np.ndarray:
        return self.votes(X).mean(axis=0)


def predict_proba(model: TrainedModel, v: Union[FeatureVector, Mapping[str, float]]) -> float:
    """
    Probability of the positive class for one feature vector.

    Raises:
        FeatureMismatchError: v lacks one of the model's feature names
    """
    return float(model.predict_proba_matrix(model.align(v)[None, :])[0])


def classify(model: TrainedModel, v, threshold: float) -> bool:
    return predict_proba(model, v) >= threshold


# ─────────────────────────────────────────────
# Trainers
# ─────────────────────────────────────────────

def train_naive_bayes(ds: Dataset) -> NaiveBayesModel:
    """Gaussian class-conditional model with variances floored at 1e-9"""
    ds.require_both_classes(minimum=2)
    X, y = _canonical(ds)
    floor = float(get_pipeline_config().get('classifiers', 'nb_var_floor', 1e-9))

    means = np.vstack([X[y == c].mean(axis=0) for c in (0, 1)])
    variances = np.vstack([np.maximum(X[y == c].var(axis=0), floor) for c in (0, 1)])
    priors = np.array([np.mean(y == 0), np.mean(y == 1)])

    return NaiveBayesModel(
        kind='naive-bayes',
        feature_names=list(ds.feature_names),
        training_config={'var_floor': floor},
        priors=priors,
        means=means,
        variances=variances,
    )


def train_knn(ds: Dataset, k: int = 5) -> KnnModel:
    """
    k-nearest neighbours on z-scored features.

    Probability = (positive neighbours + 1) / (k + 2). Distance ties go to the
    lower row index in canonical order.
    """
    if k < 1 or k % 2 == 0:
        raise ValueError(f"k must be a positive odd number, got {k}")
    if k > len(ds):
        raise ValueError(f"k = {k} exceeds the {len(ds)} training rows")
    ds.require_both_classes()
    X, y = _canonical(ds)

    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0

    return KnnModel(
        kind='knn',
        feature_names=list(ds.feature_names),
        training_config={'k': k},
        k=k,
        center=center,
        scale=scale,
        train_z=(X - center) / scale,
        labels=y,
    )


def train_tree(ds: Dataset, min_rows: int = None) -> TreeModel:
    """Gain-ratio tree, unpruned, Laplace-smoothed leaves"""
    ds.require_both_classes(minimum=2)
    if min_rows is None:
        min_rows = int(get_pipeline_config().get('classifiers', 'tree_min_rows', 4))
    X, y = _canonical(ds)
    nodes = TreeGrower(min_rows=min_rows).grow(X, y)
    return TreeModel(
        kind='tree',
        feature_names=list(ds.feature_names),
        training_config={'min_rows': min_rows},
        nodes=nodes,
    )


def _grow_forest_tree(X: np.ndarray, y: np.ndarray, seed: int, max_features: int) -> TreeNodes:
    rng = np.random.default_rng(seed)
    sample = rng.integers(0, X.shape[0], size=X.shape[0])
    grower = TreeGrower(min_rows=2, max_features=max_features, rng=rng)
    return grower.grow(X[sample], y[sample])


def train_random_forest(ds: Dataset, trees: int = None, seed: int = None, jobs: int = 1) -> RandomForestModel:
    """
    Random forest of bootstrap-sampled, unpruned gain-ratio trees.

    Tree t draws its bootstrap sample and per-split features from seed + t,
    so serial and parallel training agree.

    Args:
        ds: labelled training data
        trees: number of trees (default from pipeline config)
        seed: master seed (default from pipeline config)
        jobs: worker processes for tree growing

    Returns:
        RandomForestModel whose probability is the fraction of positive votes
    """
    config = get_pipeline_config()
    trees = config.trees if trees is None else int(trees)
    seed = config.seed if seed is None else int(seed)
    if trees < 1:
        raise ValueError(f"a forest needs at least one tree, got {trees}")
    ds.require_both_classes()

    X, y = _canonical(ds)
    max_features = int(math.ceil(math.sqrt(X.shape[1])))

    if jobs > 1:
        grown = Parallel(n_jobs=jobs)(
            delayed(_grow_forest_tree)(X, y, seed + t, max_features) for t in range(trees)
        )
    else:
        grown = [_grow_forest_tree(X, y, seed + t, max_features) for t in range(trees)]

    log("RandomForest", f"Grew {trees} trees on {X.shape[0]} rows x {X.shape[1]} features")
    return RandomForestModel(
        kind='random-forest',
        feature_names=list(ds.feature_names),
        training_config={'trees': trees, 'seed': seed, 'max_features': max_features},
        trees=list(grown),
    )
