"""
Dataset

Labelled feature matrix with CSV and ARFF serialization. Rows are segments,
columns follow the canonical feature-name order of the feature set.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from backend.features.feature_sets import FeatureVector
from config.acoustic_constants import LABELS, NEGATIVE_LABEL, POSITIVE_LABEL

ID_COLUMN = "segment_id"
LABEL_COLUMN = "label"


def encode_label(label) -> int:
    """positive -> 1, negative -> 0; booleans and 0/1 pass through"""
    if isinstance(label, (bool, np.bool_)):
        return int(label)
    if isinstance(label, (int, np.integer)) and label in (0, 1):
        return int(label)
    text = str(label).strip().lower()
    if text == POSITIVE_LABEL:
        return 1
    if text == NEGATIVE_LABEL:
        return 0
    raise ValueError(f"Unknown label '{label}'. Expected one of: {', '.join(LABELS)}")


def decode_label(value: int) -> str:
    return POSITIVE_LABEL if int(value) == 1 else NEGATIVE_LABEL


@dataclass(eq=False)
class Dataset:
    """
    Feature matrix plus optional labels.

    Attributes:
        feature_names: ordered column names
        X: [rows x features] float matrix
        y: 0/1 labels (1 = positive) or None for unlabelled data
        row_ids: one identifier per row, usually the segment id
        provenance: free text describing where the rows came from
    """

    feature_names: List[str]
    X: np.ndarray
    y: Optional[np.ndarray]
    row_ids: List[str]
    provenance: str = ""

    def __post_init__(self):
        self.feature_names = list(self.feature_names)
        self.X = np.asarray(self.X, dtype=np.float64).reshape(-1, len(self.feature_names))
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError("feature names must be unique")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("dataset contains non-finite feature values")
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=np.int64)
            if self.y.shape != (self.X.shape[0],):
                raise ValueError(f"{self.y.shape[0]} labels for {self.X.shape[0]} rows")
            if not np.all((self.y == 0) | (self.y == 1)):
                raise ValueError("labels must be 0 (negative) or 1 (positive)")
        self.row_ids = [str(r) for r in self.row_ids]
        if len(self.row_ids) != self.X.shape[0]:
            raise ValueError(f"{len(self.row_ids)} row ids for {self.X.shape[0]} rows")

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def labelled(self) -> bool:
        return self.y is not None

    def class_counts(self) -> dict:
        if self.y is None:
            return {}
        return {NEGATIVE_LABEL: int(np.sum(self.y == 0)), POSITIVE_LABEL: int(np.sum(self.y == 1))}

    def require_both_classes(self, minimum: int = 1):
        """Raise ValueError unless each class has at least `minimum` rows"""
        if self.y is None:
            raise ValueError("dataset has no labels")
        counts = self.class_counts()
        short = [label for label, count in counts.items() if count < minimum]
        if short:
            raise ValueError(
                f"training needs at least {minimum} row(s) of each class; "
                f"got {counts[NEGATIVE_LABEL]} negative / {counts[POSITIVE_LABEL]} positive"
            )

    def subset(self, rows: Sequence[int]) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            feature_names=self.feature_names,
            X=self.X[rows],
            y=None if self.y is None else self.y[rows],
            row_ids=[self.row_ids[i] for i in rows],
            provenance=self.provenance,
        )

    def select_features(self, names: Sequence[str]) -> "Dataset":
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise KeyError(f"dataset lacks features: {', '.join(missing)}")
        columns = [self.feature_names.index(n) for n in names]
        return Dataset(list(names), self.X[:, columns], self.y, self.row_ids, self.provenance)

    @classmethod
    def from_vectors(
        cls,
        vectors: Sequence[FeatureVector],
        labels: Optional[Sequence] = None,
        row_ids: Optional[Sequence[str]] = None,
        provenance: str = "",
    ) -> "Dataset":
        if not vectors:
            raise ValueError("cannot build a dataset from zero feature vectors")
        names = vectors[0].names
        for i, v in enumerate(vectors):
            if v.names != names:
                raise ValueError(f"row {i} has a different feature-name list from row 0")
        X = np.vstack([v.to_array(names) for v in vectors])
        y = None if labels is None else np.array([encode_label(label) for label in labels])
        ids = list(row_ids) if row_ids is not None else [str(i) for i in range(len(vectors))]
        return cls(names, X, y, ids, provenance)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.X, columns=self.feature_names)
        frame.insert(0, ID_COLUMN, self.row_ids)
        if self.y is not None:
            frame[LABEL_COLUMN] = [decode_label(v) for v in self.y]
        return frame

    def to_csv(self, path: Union[str, Path]):
        """Header = segment_id, feature names, then label when present"""
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format='%.17g', lineterminator='\n')

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "Dataset":
        frame = pd.read_csv(path, dtype={ID_COLUMN: str}, float_precision='round_trip')
        if ID_COLUMN in frame.columns:
            row_ids = frame.pop(ID_COLUMN).tolist()
        else:
            row_ids = [str(i) for i in range(len(frame))]
        y = None
        if LABEL_COLUMN in frame.columns:
            y = np.array([encode_label(v) for v in frame.pop(LABEL_COLUMN)])
        return cls(list(frame.columns), frame.to_numpy(dtype=np.float64), y, row_ids, provenance=str(path))

    def to_arff(self, path: Union[str, Path], relation: str = "soundscape"):
        """Attribute-relation text form: one numeric attribute per feature plus the class"""
        lines = [f"@RELATION {relation}", ""]
        lines += [f"@ATTRIBUTE {name} NUMERIC" for name in self.feature_names]
        if self.y is not None:
            lines.append(f"@ATTRIBUTE class {{{NEGATIVE_LABEL},{POSITIVE_LABEL}}}")
        lines += ["", "@DATA"]
        for i in range(len(self)):
            cells = [repr(float(v)) for v in self.X[i]]
            if self.y is not None:
                cells.append(decode_label(self.y[i]))
            lines.append(",".join(cells))
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text("\n".join(lines) + "\n")
