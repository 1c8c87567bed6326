"""
Configuration grid

Cross-validates every combination of pre-processing (high-pass on/off and
MMSE on/off), feature set and classifier on one labelled collection of
segments, then marks the best configuration per classifier by AUC.

The All set is extracted once per pre-processing setting; the other sets are
column subsets of it and CFSSubset is All with CFS rerun inside each fold.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from backend.audio.audio_io import Segment
from backend.console import error, log
from backend.features.feature_sets import FeatureSetId, PreProcessing, extract_features, feature_names
from backend.ml.cross_validation import ClassifierConfig, CvReport, cross_validate, sweep_k
from backend.ml.dataset import Dataset, encode_label
from config.acoustic_constants import FEATURE_SET_IDS, MODEL_KINDS

PRE_SETTINGS = [
    PreProcessing(highpass=False, mmse=False),
    PreProcessing(highpass=True, mmse=False),
    PreProcessing(highpass=False, mmse=True),
    PreProcessing(highpass=True, mmse=True),
]

GRID_COLUMNS = [
    'classifier', 'highpass', 'mmse', 'feature_set', 'features', 'k',
    'auc', 'accuracy_at_half', 'best_threshold', 'best_accuracy', 'best',
]


@dataclass(frozen=True)
class GridRow:
    classifier: str
    pre: PreProcessing
    feature_set: str
    features: int
    k: Optional[int]
    report: CvReport

    @property
    def auc(self) -> float:
        return self.report.auc

    def describe(self) -> str:
        steps = [name for name, on in self.pre.as_dict().items() if on] or ['raw']
        k = f" k={self.k}" if self.k is not None else ""
        return f"{self.classifier}{k} / {'+'.join(steps)} / {self.feature_set}"


@dataclass
class GridReport:
    """One row per configuration, in grid order"""

    rows: List[GridRow]
    failures: List[Tuple[str, str]] = field(default_factory=list)

    def best_rows(self) -> Dict[str, GridRow]:
        """Highest AUC per classifier; the earliest row in grid order wins ties"""
        best: Dict[str, GridRow] = {}
        for row in self.rows:
            current = best.get(row.classifier)
            if current is None or row.auc > current.auc:
                best[row.classifier] = row
        return best

    def to_frame(self) -> pd.DataFrame:
        winners = {id(row) for row in self.best_rows().values()}
        records = [
            (
                row.classifier, row.pre.highpass, row.pre.mmse, row.feature_set, row.features,
                '' if row.k is None else row.k,
                row.report.auc, row.report.accuracy_at_half,
                row.report.best_threshold, row.report.best_accuracy,
                id(row) in winners,
            )
            for row in self.rows
        ]
        return pd.DataFrame(records, columns=GRID_COLUMNS)

    def to_text(self) -> str:
        lines = [f"configurations: {len(self.rows)}"]
        for classifier, row in self.best_rows().items():
            lines.append(f"best {classifier}: auc={row.auc:.6f} ({row.describe()})")
        lines += [f"failed: {item}: {reason}" for item, reason in self.failures]
        return "\n".join(lines) + "\n"

    def write(self, out_dir: Union[str, Path]):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(out_dir / "grid_results.csv", index=False, float_format='%.17g', lineterminator='\n')
        (out_dir / "grid_report.txt").write_text(self.to_text())


def _extract_one(seg: Segment, pre: PreProcessing):
    try:
        return extract_features(seg, FeatureSetId.ALL, pre), None
    except (ValueError, ArithmeticError) as e:
        return None, str(e)


def extract_grid_datasets(
    segments: Sequence[Segment],
    labels: Sequence,
    pre_settings: Sequence[PreProcessing],
    jobs: int = 1,
) -> Tuple[Dict[PreProcessing, Dataset], List[Tuple[str, str]]]:
    """
    All-set datasets per pre-processing setting over the same rows.

    A segment that fails under any setting is left out of every dataset, so
    all configurations are scored on identical rows.
    """
    if len(labels) != len(segments):
        raise ValueError(f"{len(segments)} segments but {len(labels)} labels")

    vectors: Dict[PreProcessing, list] = {}
    failures: Dict[str, str] = {}
    for pre in pre_settings:
        if jobs > 1:
            outcomes = Parallel(n_jobs=jobs, prefer='threads')(delayed(_extract_one)(seg, pre) for seg in segments)
        else:
            outcomes = [_extract_one(seg, pre) for seg in segments]
        vectors[pre] = [v for v, _ in outcomes]
        for seg, (_, err) in zip(segments, outcomes):
            if err is not None and seg.segment_id not in failures:
                failures[seg.segment_id] = err
                error("Grid", f"{seg.segment_id}: {err}")

    keep = [i for i, seg in enumerate(segments) if seg.segment_id not in failures]
    if not keep:
        raise ValueError("no segment could be featurized under every pre-processing setting")
    row_ids = [segments[i].segment_id for i in keep]
    y = np.array([encode_label(labels[i]) for i in keep], dtype=np.int64)

    datasets = {}
    for pre, found in vectors.items():
        names = feature_names(FeatureSetId.ALL, pre.highpass)
        X = np.vstack([found[i].to_array(names) for i in keep])
        datasets[pre] = Dataset(names, X, y, row_ids)
    return datasets, sorted(failures.items())


def run_grid(
    segments: Sequence[Segment],
    labels: Sequence,
    feature_sets: Optional[Sequence[str]] = None,
    classifiers: Optional[Sequence[str]] = None,
    pre_settings: Optional[Sequence[PreProcessing]] = None,
    folds: Optional[int] = None,
    seed: Optional[int] = None,
    trees: Optional[int] = None,
    ks: Optional[Sequence[int]] = None,
    jobs: int = 1,
) -> GridReport:
    """
    Cross-validate every (pre-processing, feature set, classifier) combination.

    Every configuration shares the fold seed. k-NN runs the k sweep and
    reports its best k.

    Args:
        segments: canonical segments
        labels: one label per segment (0/1 or label strings)
        feature_sets: set names (default all seven)
        classifiers: classifier kinds (default all four)
        pre_settings: pre-processing variants (default all four)
        folds: CV folds (default from pipeline config)
        seed: fold and model seed (default from pipeline config)
        trees: random forest size (default from pipeline config)
        ks: k values for the k-NN sweep (default from pipeline config)
        jobs: workers for feature extraction and forest training

    Returns:
        GridReport in (pre-processing, feature set, classifier) order
    """
    feature_sets = [FeatureSetId.parse(s) for s in (feature_sets or FEATURE_SET_IDS)]
    classifiers = list(classifiers or MODEL_KINDS)
    pre_settings = list(pre_settings or PRE_SETTINGS)

    datasets, failures = extract_grid_datasets(segments, labels, pre_settings, jobs)
    rows: List[GridRow] = []
    for pre in pre_settings:
        full = datasets[pre]
        full.require_both_classes()
        for set_id in feature_sets:
            use_cfs = set_id == FeatureSetId.CFS_SUBSET
            ds = full if use_cfs else full.select_features(feature_names(set_id, pre.highpass))
            for kind in classifiers:
                config = ClassifierConfig.from_pipeline(kind, trees=trees, seed=seed, use_cfs=use_cfs, jobs=jobs)
                if kind == 'knn':
                    results, best_k = sweep_k(ds, ks=ks, config=config, folds=folds, seed=config.seed)
                    report = dict(results)[best_k]
                    row = GridRow(kind, pre, set_id.value, ds.n_features, best_k, report)
                else:
                    report = cross_validate(ds, config, folds=folds, seed=config.seed)
                    row = GridRow(kind, pre, set_id.value, ds.n_features, None, report)
                rows.append(row)
                log("Grid", f"{row.describe()}: AUC {row.auc:.4f}")

    return GridReport(rows=rows, failures=failures)
