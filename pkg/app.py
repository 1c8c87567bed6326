"""
Soundscape Noise Filter
Command-line pipeline for detecting and removing rain and cicada chorus noise
from environmental recordings.

Subcommands:
    segment          convert recordings to canonical 10 s mono 22.05 kHz chunks
    featurize        extract a feature set to features.csv
    train / cv       cross-validate a classifier (train also writes the model)
    grid             cross-validate every pre-processing, feature set and classifier combination
    gate-rain        drop rain-contaminated segments
    filter-cicada    band-stop detected cicada choruses
    evaluate-cicada  ISNR comparison of the noise-reduction variants
    bedoya           double-threshold rain baseline ROC
    synth            generate a labelled synthetic corpus
"""

import argparse
from dataclasses import replace
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import yaml

# Load environment variables before the config singleton reads them
from dotenv import load_dotenv
load_dotenv()

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from backend.audio.audio_io import Segment, load_canonical, segment_audio, write_wav
from backend.audio.dsp_core import mmse_stsa
from backend.console import error, log, safe_print, set_quiet, warn, is_quiet
from backend.features.feature_sets import (
    FeatureSetId,
    PreProcessing,
    extract_features,
    feature_names,
)
from backend.filters.bedoya import bedoya_sweep
from backend.filters.cicada_filter import evaluate_cicada_isnr, filter_cicada, write_filter_report
from backend.filters.detection import check_compatible, model_preprocessing
from backend.filters.rain_gate import RainGateConfig, gate_rain
from backend.metrics.evaluation import roc_curve
from backend.ml.cfs import cfs_select
from backend.ml.classifiers import FeatureMismatchError
from backend.ml.cross_validation import ClassifierConfig, cross_validate, sweep_k, train
from backend.ml.dataset import Dataset, encode_label
from backend.ml.grid import PRE_SETTINGS, run_grid
from backend.ml.model_store import ModelFormatError, load_model, save_model
from backend.synth.scene_generator import SceneSpecError, gen_corpus, write_corpus
from config.acoustic_constants import FEATURE_SET_IDS, MODEL_KINDS
from config.pipeline_config import get_pipeline_config

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2

FEATURES_META = "features.yaml"
SELECTION_FILE = "selection.txt"
MODEL_FILE = "model.ngm"


class UsageError(Exception):
    """Invalid arguments or incompatible inputs; maps to exit code 1"""


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ─────────────────────────────────────────────
# Shared helpers
# ─────────────────────────────────────────────

def list_wavs(in_dir: Path) -> List[Path]:
    if not in_dir.is_dir():
        raise UsageError(f"input directory not found: {in_dir}")
    return sorted(p for p in in_dir.iterdir() if p.is_file() and p.suffix.lower() == '.wav')


def _load_file(path: Path) -> Tuple[List[Segment], Optional[str]]:
    try:
        return segment_audio(load_canonical(path), source_id=path.stem), None
    except (OSError, ValueError) as e:
        return [], str(e)


def load_segments(in_dir: Path, jobs: int) -> Tuple[List[Segment], List[Tuple[str, str]]]:
    """All segments of all WAVs, ordered by (file name, segment index)"""
    paths = list_wavs(in_dir)
    if jobs > 1:
        loaded = Parallel(n_jobs=jobs, prefer='threads')(delayed(_load_file)(p) for p in paths)
    else:
        loaded = [_load_file(p) for p in paths]

    segments, failures = [], []
    for path, (segs, err) in zip(paths, loaded):
        if err is not None:
            failures.append((path.name, err))
            error("Audio", f"{path.name}: {err}")
        segments.extend(segs)
    log("Audio", f"Loaded {len(segments)} segments from {len(paths)} files")
    return segments, failures


def manifest_labels(path: Path, task: str) -> Dict[str, str]:
    """scene id -> label for one task column of a synth manifest"""
    frame = pd.read_csv(path, dtype=str)
    id_column = 'scene_id' if 'scene_id' in frame.columns else frame.columns[0]
    if task not in frame.columns:
        raise UsageError(f"manifest {path.name} has no '{task}' column")
    return dict(zip(frame[id_column], frame[task]))


def _pre_from_args(args) -> PreProcessing:
    return PreProcessing(highpass=bool(args.highpass), mmse=bool(args.mmse))


def _read_features_meta(features_csv: Path) -> dict:
    meta_path = features_csv.parent / FEATURES_META
    if not meta_path.exists():
        warn("Train", f"{FEATURES_META} not found next to {features_csv.name}; assuming no pre-processing")
        return {}
    with open(meta_path, 'r') as f:
        return yaml.safe_load(f) or {}


def _write_csv(frame: pd.DataFrame, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')


# ─────────────────────────────────────────────
# Subcommands
# ─────────────────────────────────────────────

def cmd_segment(args) -> int:
    segments, failures = load_segments(Path(args.input), args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for seg in segments:
        write_wav(seg.audio, out / seg.file_name)
    log("Segment", f"Wrote {len(segments)} segments to {out}")
    return EXIT_PARTIAL if failures else EXIT_OK


def _featurize_one(seg: Segment, set_id: FeatureSetId, pre: PreProcessing, selection):
    try:
        return extract_features(seg, set_id, pre, selection), None
    except (ValueError, ArithmeticError) as e:
        return None, str(e)


def cmd_featurize(args) -> int:
    set_id = FeatureSetId.parse(args.set)
    pre = _pre_from_args(args)

    selection = None
    if set_id == FeatureSetId.CFS_SUBSET:
        if not args.selection:
            raise UsageError(
                "CFSSubset needs a selection file; run 'train --cfs' on an All-set features.csv first "
                f"and pass its {SELECTION_FILE} with --selection"
            )
        selection = [line.strip() for line in Path(args.selection).read_text().splitlines() if line.strip()]
    names = feature_names(set_id, pre.highpass, selection)

    labels = None
    if args.manifest:
        labels = manifest_labels(Path(args.manifest), args.task)

    segments, failures = load_segments(Path(args.input), args.jobs)
    if args.jobs > 1:
        results = Parallel(n_jobs=args.jobs, prefer='threads')(
            delayed(_featurize_one)(seg, set_id, pre, selection) for seg in segments
        )
    else:
        results = [_featurize_one(seg, set_id, pre, selection) for seg in segments]

    rows, row_ids, row_labels = [], [], []
    for seg, (vector, err) in zip(segments, results):
        if err is not None:
            failures.append((seg.segment_id, err))
            error("Featurize", f"{seg.segment_id}: {err}")
            continue
        if labels is not None:
            if seg.source_id not in labels:
                failures.append((seg.segment_id, "no label in manifest"))
                error("Featurize", f"{seg.segment_id}: no '{args.task}' label in manifest")
                continue
            row_labels.append(encode_label(labels[seg.source_id]))
        rows.append(vector.to_array(names))
        row_ids.append(seg.segment_id)

    X = np.vstack(rows) if rows else np.zeros((0, len(names)))
    y = np.array(row_labels, dtype=np.int64) if labels is not None else None
    dataset = Dataset(names, X, y, row_ids, provenance=str(args.input))

    out = Path(args.out)
    dataset.to_csv(out / "features.csv")
    if args.arff:
        dataset.to_arff(out / "features.arff")
    meta = {
        'feature_set': set_id.value,
        'highpass': pre.highpass,
        'mmse': pre.mmse,
        'features': len(names),
        'rows': len(dataset),
        'task': args.task if labels is not None else None,
    }
    with open(out / FEATURES_META, 'w') as f:
        yaml.safe_dump(meta, f, sort_keys=True)

    log("Featurize", f"{len(dataset)} rows x {len(names)} features ({set_id.value}) -> {out / 'features.csv'}")
    if failures:
        error("Featurize", f"{len(failures)} item(s) failed")
        return EXIT_PARTIAL
    return EXIT_OK


def _classifier_config(args, kind: Optional[str] = None) -> ClassifierConfig:
    return ClassifierConfig.from_pipeline(
        kind or args.classifier,
        k=args.k,
        trees=args.trees,
        seed=args.seed,
        use_cfs=bool(args.cfs),
        jobs=args.jobs,
    )


def _run_cv(args, write_model: bool) -> int:
    features_csv = Path(args.features)
    if not features_csv.exists():
        raise UsageError(f"features file not found: {features_csv}")
    ds = Dataset.from_csv(features_csv)
    if not ds.labelled:
        raise UsageError(f"{features_csv.name} has no label column; featurize with --manifest and --task")
    counts = ds.class_counts()
    if min(counts.values()) == 0:
        raise UsageError(f"{features_csv.name} holds a single class ({counts}); training needs both")

    out = Path(args.out)
    config = _classifier_config(args)
    folds = args.folds

    if args.sweep_k:
        if config.kind != 'knn':
            raise UsageError("--sweep-k only applies to --classifier knn")
        results, best_k = sweep_k(ds, config=config, folds=folds, seed=config.seed)
        summary = []
        for k, report in results:
            report.write(out, stem=f"cv_k{k}")
            marker = "  <- best" if k == best_k else ""
            summary.append(f"k={k:<3d} auc={report.auc:.6f} accuracy@0.5={report.accuracy_at_half:.6f}{marker}")
        (out / "sweep_k.txt").write_text("\n".join(summary) + "\n")
        print("\n".join(summary))
        config = replace(config, k=best_k)
    else:
        report = cross_validate(ds, config, folds=folds, seed=config.seed)
        report.write(out, stem="cv")
        roc_curve(report.scored).to_csv(out / "cv_roc.csv")
        print(report.to_text(), end="")

    if not write_model:
        return EXIT_OK

    meta = _read_features_meta(features_csv)
    final_ds = ds
    if config.use_cfs:
        selection = cfs_select(ds)
        (out / SELECTION_FILE).write_text("\n".join(selection) + "\n")
        final_ds = ds.select_features(selection)

    model = train(final_ds, config).annotate(
        feature_set=meta.get('feature_set', 'unknown'),
        highpass=bool(meta.get('highpass', False)),
        mmse=bool(meta.get('mmse', False)),
    )
    save_model(model, out / MODEL_FILE)
    log("Train", f"Saved {model.kind} model on {len(model.feature_names)} features to {out / MODEL_FILE}")
    return EXIT_OK


def cmd_train(args) -> int:
    return _run_cv(args, write_model=True)


def cmd_cv(args) -> int:
    return _run_cv(args, write_model=False)


def _labelled_segments(args) -> Tuple[List[Segment], List[str], List[Tuple[str, str]]]:
    """Segments of the input directory that the manifest labels, with those labels"""
    labels = manifest_labels(Path(args.manifest), args.task)
    segments, failures = load_segments(Path(args.input), args.jobs)

    kept, truth = [], []
    for seg in segments:
        if seg.source_id in labels:
            kept.append(seg)
            truth.append(labels[seg.source_id])
        else:
            failures.append((seg.segment_id, "no label in manifest"))
    if len({encode_label(t) for t in truth}) < 2:
        raise UsageError(f"the manifest labels no segments of both '{args.task}' classes")
    return kept, truth, failures


def cmd_grid(args) -> int:
    segments, truth, failures = _labelled_segments(args)
    pre_settings = PRE_SETTINGS
    if args.no_highpass_variants:
        pre_settings = [p for p in pre_settings if not p.highpass]
    if args.no_mmse_variants:
        pre_settings = [p for p in pre_settings if not p.mmse]

    report = run_grid(
        segments,
        truth,
        feature_sets=args.sets,
        classifiers=args.classifiers,
        pre_settings=pre_settings,
        folds=args.folds,
        seed=args.seed,
        trees=args.trees,
        ks=args.ks,
        jobs=args.jobs,
    )
    report.write(Path(args.out))
    print(report.to_text(), end="")
    return EXIT_PARTIAL if failures or report.failures else EXIT_OK


def _load_detector(args):
    path = Path(args.model)
    if not path.exists():
        raise UsageError(f"model file not found: {path}")
    model = load_model(path)
    pre = model_preprocessing(model)
    if args.highpass and not pre.highpass or args.mmse and not pre.mmse:
        raise UsageError(f"model {path.name} was trained with highpass={pre.highpass}, mmse={pre.mmse}")
    check_compatible(model, pre)
    return model


def cmd_gate_rain(args) -> int:
    model = _load_detector(args)
    segments, failures = load_segments(Path(args.input), args.jobs)

    result = gate_rain(segments, RainGateConfig(model, args.threshold), jobs=args.jobs)
    out = Path(args.out)
    for seg in result.kept:
        write_wav(seg.audio, out / seg.file_name)
    result.write_report(out / "gate_report.csv")

    print(f"kept {len(result.kept)}  dropped {len(result.dropped)}  failed {len(result.errors)}")
    return EXIT_PARTIAL if failures or result.errors else EXIT_OK


def _filter_one(seg: Segment, model, threshold: float, mmse: bool):
    try:
        result = filter_cicada(seg, model, threshold)
        audio = mmse_stsa(result.audio) if mmse else result.audio
        return result, audio, None
    except (ValueError, ArithmeticError) as e:
        return None, None, str(e)


def cmd_filter_cicada(args) -> int:
    path = Path(args.model)
    if not path.exists():
        raise UsageError(f"model file not found: {path}")
    model = load_model(path)
    check_compatible(model)
    segments, failures = load_segments(Path(args.input), args.jobs)

    if args.jobs > 1:
        outcomes = Parallel(n_jobs=args.jobs, prefer='threads')(
            delayed(_filter_one)(seg, model, args.threshold, args.mmse) for seg in segments
        )
    else:
        outcomes = [_filter_one(seg, model, args.threshold, args.mmse) for seg in segments]

    out = Path(args.out)
    results = []
    for seg, (result, audio, err) in zip(segments, outcomes):
        if err is not None:
            failures.append((seg.segment_id, err))
            error("CicadaFilter", f"{seg.segment_id}: {err}")
            continue
        write_wav(audio, out / seg.file_name)
        results.append(result)
    write_filter_report(results, out / "filter_report.csv")

    filtered = sum(1 for r in results if r.filtered)
    print(f"filtered {filtered}  untouched {len(results) - filtered}  failed {len(failures)}")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_evaluate_cicada(args) -> int:
    segments, failures = load_segments(Path(args.input), args.jobs)
    if not segments:
        raise UsageError(f"no readable segments in {args.input}")

    comparison = evaluate_cicada_isnr(segments, jobs=args.jobs)
    out = Path(args.out)
    _write_csv(comparison.values_frame(), out / "isnr_values.csv")
    _write_csv(comparison.summary_frame(), out / "isnr_summary.csv")
    _write_csv(comparison.tests_frame(), out / "isnr_tests.csv")
    (out / "isnr_report.txt").write_text(comparison.to_text())
    print(comparison.to_text(), end="")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_bedoya(args) -> int:
    kept, truth, failures = _labelled_segments(args)
    curve, area, scores = bedoya_sweep(kept, [encode_label(t) for t in truth], steps=args.steps)
    out = Path(args.out)
    curve.to_csv(out / "bedoya_roc.csv")
    _write_csv(
        pd.DataFrame({'segment_id': [s.segment_id for s in kept], 'score': scores}),
        out / "bedoya_scores.csv",
    )
    (out / "bedoya_report.txt").write_text(f"segments: {len(kept)}\nsteps: {args.steps}\nauc: {area:.6f}\n")
    print(f"auc: {area:.6f}")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_synth(args) -> int:
    if args.n < 1:
        raise UsageError(f"--n must be at least 1, got {args.n}")
    mix = {'rain': args.rain, 'cicada': args.cicada}
    corpus = gen_corpus(args.n, args.seed, mix)
    manifest = write_corpus(corpus, Path(args.out))
    log("Synth", f"Wrote {len(corpus)} scenes and {manifest.name} to {args.out}")
    return EXIT_OK


# ─────────────────────────────────────────────
# Argument parsing
# ─────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    config = get_pipeline_config()

    common = CliParser(add_help=False)
    common.add_argument('--out', required=True, help="Output directory")
    common.add_argument('--jobs', type=int, default=config.jobs, help="Parallel workers")
    common.add_argument('--quiet', action='store_true', help="Only print warnings and errors")

    prefilters = CliParser(add_help=False)
    prefilters.add_argument('--highpass', action='store_true', help="Apply the 1 kHz high-pass first")
    prefilters.add_argument('--mmse', action='store_true', help="Apply MMSE STSA noise reduction")

    classifier = CliParser(add_help=False)
    classifier.add_argument('features', help="features.csv from featurize (labelled)")
    classifier.add_argument('--classifier', choices=MODEL_KINDS, default='random-forest')
    classifier.add_argument('--k', type=int, default=None, help="Neighbours for knn (odd)")
    classifier.add_argument('--trees', type=int, default=None, help="Random forest size")
    classifier.add_argument('--seed', type=int, default=None, help="Fold and forest seed")
    classifier.add_argument('--folds', type=int, default=None)
    classifier.add_argument('--cfs', action='store_true', help="Select features with CFS inside each fold")
    classifier.add_argument('--sweep-k', action='store_true', help="knn only: try k = 1, 3, ..., 25")

    parser = CliParser(prog='app.py', description="Rain and cicada chorus noise filter")
    sub = parser.add_subparsers(dest='command', parser_class=CliParser)

    p = sub.add_parser('segment', parents=[common], help="Split recordings into canonical segments")
    p.add_argument('input', help="Directory of WAV files")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser('featurize', parents=[common, prefilters], help="Extract a feature set")
    p.add_argument('input', help="Directory of WAV files")
    p.add_argument('--set', choices=FEATURE_SET_IDS, default='All')
    p.add_argument('--selection', help=f"{SELECTION_FILE} from 'train --cfs' (CFSSubset only)")
    p.add_argument('--manifest', help="Synth manifest providing labels")
    p.add_argument('--task', choices=['rain', 'cicada'], default='rain')
    p.add_argument('--arff', action='store_true', help="Also write features.arff")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser('train', parents=[common, classifier], help="Cross-validate and save a model")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('cv', parents=[common, classifier], help="Cross-validate only")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser('grid', parents=[common], help="Cross-validate every pre-processing x feature set x classifier combination")
    p.add_argument('input', help="Directory of WAV files")
    p.add_argument('--manifest', required=True)
    p.add_argument('--task', choices=['rain', 'cicada'], default='rain')
    p.add_argument('--sets', nargs='+', choices=FEATURE_SET_IDS, default=None, help="Feature sets (default all)")
    p.add_argument('--classifiers', nargs='+', choices=MODEL_KINDS, default=None, help="Classifiers (default all)")
    p.add_argument('--no-highpass-variants', action='store_true', help="Skip the high-pass settings")
    p.add_argument('--no-mmse-variants', action='store_true', help="Skip the MMSE settings")
    p.add_argument('--trees', type=int, default=None, help="Random forest size")
    p.add_argument('--seed', type=int, default=None, help="Fold and forest seed")
    p.add_argument('--folds', type=int, default=None)
    p.add_argument('--ks', type=int, nargs='+', default=None, help="k values for the knn sweep")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser('gate-rain', parents=[common, prefilters], help="Drop rain segments")
    p.add_argument('input', help="Directory of WAV files")
    p.add_argument('--model', required=True)
    p.add_argument('--threshold', type=float, default=config.threshold)
    p.set_defaults(func=cmd_gate_rain)

    p = sub.add_parser('filter-cicada', parents=[common], help="Band-stop cicada choruses")
    p.add_argument('input', help="Directory of WAV files")
    p.add_argument('--model', required=True)
    p.add_argument('--threshold', type=float, default=config.threshold)
    p.add_argument('--mmse', action='store_true', help="Run MMSE STSA after filtering")
    p.set_defaults(func=cmd_filter_cicada)

    p = sub.add_parser('evaluate-cicada', parents=[common], help="ISNR comparison of noise reduction variants")
    p.add_argument('input', help="Directory of WAV files")
    p.set_defaults(func=cmd_evaluate_cicada)

    p = sub.add_parser('bedoya', parents=[common], help="Double-threshold rain baseline sweep")
    p.add_argument('input', help="Directory of WAV files")
    p.add_argument('--manifest', required=True)
    p.add_argument('--task', choices=['rain', 'cicada'], default='rain')
    p.add_argument('--steps', type=int, default=51)
    p.set_defaults(func=cmd_bedoya)

    p = sub.add_parser('synth', parents=[common], help="Generate a synthetic labelled corpus")
    p.add_argument('--n', type=int, default=200)
    p.add_argument('--seed', type=int, default=config.seed)
    p.add_argument('--rain', type=float, default=0.3, help="Rain scene proportion")
    p.add_argument('--cicada', type=float, default=0.3, help="Cicada scene proportion")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        error("CLI", str(e))
        return EXIT_USAGE

    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    was_quiet = is_quiet()
    if getattr(args, 'quiet', False):
        set_quiet(True)
    if getattr(args, 'jobs', 1) < 1:
        error("CLI", f"--jobs must be at least 1, got {args.jobs}")
        return EXIT_USAGE

    try:
        return args.func(args)
    except UsageError as e:
        error(args.command, str(e))
        return EXIT_USAGE
    except FeatureMismatchError as e:
        error(args.command, str(e))
        return EXIT_USAGE
    except (ModelFormatError, SceneSpecError, ValueError, OSError) as e:
        error(args.command, str(e))
        return EXIT_USAGE
    finally:
        set_quiet(was_quiet)


if __name__ == '__main__':
    if not is_quiet() and '--quiet' not in sys.argv:
        safe_print(f"\n{'='*60}")
        safe_print("  Soundscape Noise Filter")
        safe_print("  Rain gate + cicada chorus filter")
        safe_print(f"{'='*60}\n")

    sys.exit(main())
