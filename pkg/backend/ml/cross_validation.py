"""
Cross-validation

Seeded k-fold cross-validation for every classifier kind, with optional CFS
re-run inside each training fold, and the k sweep for nearest neighbours.
"""

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from backend.console import log, warn
from backend.metrics.evaluation import accuracy_at, auc_of, best_accuracy_threshold
from backend.ml.cfs import cfs_select
from backend.ml.classifiers import (
    TrainedModel,
    train_knn,
    train_naive_bayes,
    train_random_forest,
    train_tree,
)
from backend.ml.dataset import Dataset, decode_label
from config.acoustic_constants import MODEL_KINDS
from config.pipeline_config import get_pipeline_config


@dataclass(frozen=True)
class ClassifierConfig:
    """Which classifier to train and with what hyperparameters"""

    kind: str = 'random-forest'
    k: int = 5
    trees: int = 100
    seed: int = 42
    use_cfs: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"Unknown classifier '{self.kind}'. Known: {', '.join(MODEL_KINDS)}")

    @classmethod
    def from_pipeline(cls, kind: str = 'random-forest', **overrides) -> "ClassifierConfig":
        """Defaults from pipeline.yaml, then explicit overrides (None values ignored)"""
        config = get_pipeline_config()
        values = {
            'kind': kind,
            'k': int(config.get('classifiers', 'k', 5)),
            'trees': config.trees,
            'seed': config.seed,
            'jobs': config.jobs,
        }
        values.update({key: v for key, v in overrides.items() if v is not None})
        return cls(**values)

    def describe(self) -> str:
        if self.kind == 'knn':
            detail = f"k={self.k}"
        elif self.kind == 'random-forest':
            detail = f"trees={self.trees}"
        else:
            detail = ""
        parts = [self.kind, detail, f"seed={self.seed}", "cfs" if self.use_cfs else ""]
        return " ".join(p for p in parts if p)


def train(ds: Dataset, config: ClassifierConfig, seed: Optional[int] = None) -> TrainedModel:
    """Train the configured classifier; `seed` overrides config.seed (used per fold)"""
    seed = config.seed if seed is None else seed
    if config.kind == 'naive-bayes':
        model = train_naive_bayes(ds)
    elif config.kind == 'knn':
        model = train_knn(ds, config.k)
    elif config.kind == 'tree':
        model = train_tree(ds)
    else:
        model = train_random_forest(ds, trees=config.trees, seed=seed, jobs=config.jobs)
    return model.annotate(classifier=config.kind, seed=seed, cfs=config.use_cfs)


def assign_folds(n_rows: int, folds: int, seed: int) -> np.ndarray:
    """Seeded shuffle, then deal rows round-robin into folds"""
    if not 2 <= folds <= n_rows:
        raise ValueError(f"folds must be in [2, {n_rows}], got {folds}")
    order = np.random.default_rng(seed).permutation(n_rows)
    assignment = np.empty(n_rows, dtype=np.int64)
    assignment[order] = np.arange(n_rows) % folds
    return assignment


@dataclass
class CvReport:
    """
    Out-of-fold predictions and summary metrics.

    fold_predictions rows are (row_id, true label 0/1, probability, fold), in
    dataset row order.
    """

    config: ClassifierConfig
    folds: int
    seed: int
    fold_predictions: List[Tuple[str, int, float, int]]
    auc: float
    accuracy_at_half: float
    best_threshold: float
    best_accuracy: float
    warnings: List[str] = field(default_factory=list)
    selections: Dict[int, List[str]] = field(default_factory=dict)

    @property
    def scored(self) -> List[Tuple[int, float]]:
        return [(label, prob) for _, label, prob, _ in self.fold_predictions]

    def to_text(self) -> str:
        lines = [
            f"classifier: {self.config.describe()}",
            f"folds: {self.folds}",
            f"seed: {self.seed}",
            f"rows: {len(self.fold_predictions)}",
            f"auc: {self.auc:.6f}",
            f"accuracy@0.5: {self.accuracy_at_half:.6f}",
            f"best threshold: {self.best_threshold:.6f} (accuracy {self.best_accuracy:.6f})",
        ]
        for fold, names in sorted(self.selections.items()):
            lines.append(f"cfs fold {fold}: {len(names)} features")
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) + "\n"

    def predictions_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(rid, decode_label(label), prob, fold) for rid, label, prob, fold in self.fold_predictions],
            columns=['segment_id', 'label', 'probability', 'fold'],
        )

    def write(self, out_dir: Union[str, Path], stem: str = "cv"):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{stem}_report.txt").write_text(self.to_text())
        self.predictions_frame().to_csv(
            out_dir / f"{stem}_predictions.csv", index=False, float_format='%.17g', lineterminator='\n'
        )


def cross_validate(
    ds: Dataset,
    config: ClassifierConfig,
    folds: Optional[int] = None,
    seed: Optional[int] = None,
) -> CvReport:
    """
    k-fold cross-validation.

    Each fold is predicted by a model trained on the remaining folds with seed
    seed + fold. With config.use_cfs the feature selection is repeated on
    every training fold.

    Args:
        ds: labelled dataset
        config: classifier configuration
        folds: number of folds (default from pipeline config)
        seed: seed for fold assignment and the fold models (default config.seed)

    Returns:
        CvReport with every row predicted exactly once
    """
    folds = get_pipeline_config().folds if folds is None else int(folds)
    seed = config.seed if seed is None else int(seed)
    ds.require_both_classes()
    assignment = assign_folds(len(ds), folds, seed)

    probabilities = np.full(len(ds), np.nan)
    warnings: List[str] = []
    selections: Dict[int, List[str]] = {}

    for fold in range(folds):
        test_rows = np.nonzero(assignment == fold)[0]
        train_rows = np.nonzero(assignment != fold)[0]
        train_ds = ds.subset(train_rows)
        test_ds = ds.subset(test_rows)

        test_counts = test_ds.class_counts()
        if min(test_counts.values()) == 0:
            message = f"fold {fold} holds only one class ({test_counts})"
            warnings.append(message)
            warn("CrossValidation", message)

        if config.use_cfs:
            names = cfs_select(train_ds)
            selections[fold] = names
            train_ds = train_ds.select_features(names)
            test_ds = test_ds.select_features(names)

        model = train(train_ds, config, seed=seed + fold)
        probabilities[test_rows] = model.predict_proba_matrix(test_ds.X)

    predictions = [
        (ds.row_ids[i], int(ds.y[i]), float(probabilities[i]), int(assignment[i])) for i in range(len(ds))
    ]
    scored = [(label, prob) for _, label, prob, _ in predictions]
    threshold, best_acc = best_accuracy_threshold(scored)
    report = CvReport(
        config=config,
        folds=folds,
        seed=seed,
        fold_predictions=predictions,
        auc=auc_of(scored),
        accuracy_at_half=accuracy_at(scored, 0.5),
        best_threshold=threshold,
        best_accuracy=best_acc,
        warnings=warnings,
        selections=selections,
    )
    log("CrossValidation", f"{config.describe()}: AUC {report.auc:.4f}, accuracy@0.5 {report.accuracy_at_half:.4f}")
    return report


def sweep_k(
    ds: Dataset,
    ks: Optional[Sequence[int]] = None,
    config: Optional[ClassifierConfig] = None,
    folds: Optional[int] = None,
    seed: Optional[int] = None,
) -> Tuple[List[Tuple[int, CvReport]], int]:
    """
    Cross-validate k-NN for each k.

    Returns:
        ([(k, report), ...], best k by AUC with ties to the smaller k)
    """
    ks = get_pipeline_config().k_sweep if ks is None else list(ks)
    base = config or ClassifierConfig.from_pipeline('knn')
    n_folds = get_pipeline_config().folds if folds is None else int(folds)
    results = []
    for k in ks:
        if k > len(ds) - math.ceil(len(ds) / n_folds):
            warn("CrossValidation", f"skipping k={k}: larger than the training folds")
            continue
        results.append((k, cross_validate(ds, replace(base, kind='knn', k=k), folds=folds, seed=seed)))
    if not results:
        raise ValueError("no k in the sweep fits the training folds")

    best_k = min(results, key=lambda item: (-item[1].auc, item[0]))[0]
    return results, best_k
