"""
Model files

Versioned plain-text container for trained models:

    NGMODEL v1
    kind <kind>
    config <json>
    features <n>
    <one feature name per line>
    params
    <kind-specific block>
    end

Floats are written with repr() so a save/load round trip is exact.
"""

import json
from pathlib import Path
from typing import Iterator, List, Union

import numpy as np

from backend.ml.classifiers import (
    KnnModel,
    NaiveBayesModel,
    RandomForestModel,
    TrainedModel,
    TreeModel,
)
from backend.ml.tree import TreeNodes
from config.acoustic_constants import MODEL_FILE_MAGIC, MODEL_KINDS


class ModelFormatError(ValueError):
    """Model file is malformed or from an unknown format version"""


def _floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def _ints(values) -> str:
    return " ".join(str(int(v)) for v in values)


def _tree_lines(nodes: TreeNodes) -> List[str]:
    lines = [f"nodes {nodes.n_nodes}"]
    for i in range(nodes.n_nodes):
        lines.append(
            f"{int(nodes.feature[i])} {float(nodes.threshold[i])!r} {int(nodes.left[i])} "
            f"{int(nodes.right[i])} {int(nodes.positives[i])} {int(nodes.counts[i])}"
        )
    return lines


def _params_lines(model: TrainedModel) -> List[str]:
    if isinstance(model, NaiveBayesModel):
        return [
            f"priors {_floats(model.priors)}",
            f"mean0 {_floats(model.means[0])}",
            f"mean1 {_floats(model.means[1])}",
            f"var0 {_floats(model.variances[0])}",
            f"var1 {_floats(model.variances[1])}",
        ]
    if isinstance(model, KnnModel):
        lines = [
            f"k {model.k}",
            f"center {_floats(model.center)}",
            f"scale {_floats(model.scale)}",
            f"rows {model.train_z.shape[0]}",
        ]
        lines += [f"{int(label)} {_floats(row)}" for label, row in zip(model.labels, model.train_z)]
        return lines
    if isinstance(model, TreeModel):
        return _tree_lines(model.nodes)
    if isinstance(model, RandomForestModel):
        lines = [f"trees {len(model.trees)}"]
        for tree in model.trees:
            lines += _tree_lines(tree)
        return lines
    raise ValueError(f"cannot serialize model of type {type(model).__name__}")


def dumps_model(model: TrainedModel) -> str:
    lines = [
        MODEL_FILE_MAGIC,
        f"kind {model.kind}",
        f"config {json.dumps(model.training_config, sort_keys=True)}",
        f"features {len(model.feature_names)}",
    ]
    lines += model.feature_names
    lines.append("params")
    lines += _params_lines(model)
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_model(model: TrainedModel, path: Union[str, Path]):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(dumps_model(model))


class _Lines:
    def __init__(self, text: str):
        self._lines = text.splitlines()
        self._pos = 0

    def next(self) -> str:
        if self._pos >= len(self._lines):
            raise ModelFormatError("unexpected end of model file")
        line = self._lines[self._pos]
        self._pos += 1
        return line

    def keyed(self, key: str) -> str:
        line = self.next()
        head, _, rest = line.partition(" ")
        if head != key:
            raise ModelFormatError(f"line {self._pos}: expected '{key}', found '{head}'")
        return rest


def _parse_floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split()], dtype=np.float64)


def _read_tree(lines: _Lines) -> TreeNodes:
    count = int(lines.keyed("nodes"))
    rows = [lines.next().split() for _ in range(count)]
    return TreeNodes(
        feature=np.array([int(r[0]) for r in rows], dtype=np.int64),
        threshold=np.array([float(r[1]) for r in rows], dtype=np.float64),
        left=np.array([int(r[2]) for r in rows], dtype=np.int64),
        right=np.array([int(r[3]) for r in rows], dtype=np.int64),
        positives=np.array([int(r[4]) for r in rows], dtype=np.int64),
        counts=np.array([int(r[5]) for r in rows], dtype=np.int64),
    )


def _tree_iter(lines: _Lines, count: int) -> Iterator[TreeNodes]:
    for _ in range(count):
        yield _read_tree(lines)


def loads_model(text: str) -> TrainedModel:
    """
    Parse a model file.

    Raises:
        ModelFormatError: wrong magic line, unknown kind or truncated content
    """
    lines = _Lines(text)
    magic = lines.next()
    if magic != MODEL_FILE_MAGIC:
        raise ModelFormatError(f"not a model file (expected '{MODEL_FILE_MAGIC}', found '{magic}')")

    kind = lines.keyed("kind")
    if kind not in MODEL_KINDS:
        raise ModelFormatError(f"unknown model kind '{kind}'")
    try:
        config = json.loads(lines.keyed("config"))
        names = [lines.next() for _ in range(int(lines.keyed("features")))]
    except ValueError as e:
        if isinstance(e, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model header: {e}") from e
    lines.keyed("params")

    base = {'kind': kind, 'feature_names': names, 'training_config': config}
    try:
        if kind == 'naive-bayes':
            priors = _parse_floats(lines.keyed("priors"))
            means = np.vstack([_parse_floats(lines.keyed("mean0")), _parse_floats(lines.keyed("mean1"))])
            variances = np.vstack([_parse_floats(lines.keyed("var0")), _parse_floats(lines.keyed("var1"))])
            model = NaiveBayesModel(**base, priors=priors, means=means, variances=variances)
        elif kind == 'knn':
            k = int(lines.keyed("k"))
            center = _parse_floats(lines.keyed("center"))
            scale = _parse_floats(lines.keyed("scale"))
            rows = [lines.next().split() for _ in range(int(lines.keyed("rows")))]
            labels = np.array([int(r[0]) for r in rows], dtype=np.int64)
            train_z = np.array([[float(t) for t in r[1:]] for r in rows], dtype=np.float64).reshape(len(rows), len(names))
            model = KnnModel(**base, k=k, center=center, scale=scale, train_z=train_z, labels=labels)
        elif kind == 'tree':
            model = TreeModel(**base, nodes=_read_tree(lines))
        else:
            count = int(lines.keyed("trees"))
            model = RandomForestModel(**base, trees=list(_tree_iter(lines, count)))
    except (IndexError, ValueError) as e:
        if isinstance(e, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed {kind} parameter block: {e}") from e

    if lines.next() != "end":
        raise ModelFormatError("missing 'end' line")
    return model


def load_model(path: Union[str, Path]) -> TrainedModel:
    return loads_model(Path(path).read_text())
