"""Command-line entry point wiring the toolkit into reproducible runs.

Every run writes a manifest (command, content-affecting flags, seed, input
digests, tool version) next to its artifacts; two runs with identical
manifests produce byte-identical output files. All randomness flows from a
single --seed, with per-fold sub-seeds derived deterministically from it.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__, confidence, features, harness, ingest, metrics, svm
from .errors import DataError, UsageError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

# flags that change where artifacts land but never their bytes
NON_CONTENT_FLAGS = {"out_dir", "jobs", "host", "port", "func", "command"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage errors are 1
        self.print_usage(sys.stderr)
        raise UsageError(message)


@dataclass(frozen=True)
class RunManifest:
    command: str
    version: str
    seed: int
    flags: dict
    input_digests: dict[str, str]

    def to_json(self) -> str:
        return json.dumps(
            {
                "command": self.command,
                "version": self.version,
                "seed": self.seed,
                "flags": self.flags,
                "input_digests": self.input_digests,
            },
            sort_keys=True,
            indent=2,
            ensure_ascii=False,
        )


def _digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_manifest(command: str, args: argparse.Namespace) -> RunManifest:
    flags = {}
    digests = {}
    for name, value in sorted(vars(args).items()):
        if name in NON_CONTENT_FLAGS or callable(value):
            continue
        flags[name] = value
    for name in ("input", "emoji_table", "stopwords", "keywords", "pos_map",
                 "allowed_scripts", "blocked_keywords", "curve_file", "sweep_file"):
        path = getattr(args, name, None)
        if path:
            digests[str(path)] = _digest(path)
    return RunManifest(
        command=command,
        version=__version__,
        seed=getattr(args, "seed", 0),
        flags=flags,
        input_digests=digests,
    )


def _write(out_dir: Path, name: str, text: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text, encoding="utf-8")


def _emit_manifest(out_dir: Path, manifest: RunManifest) -> None:
    _write(out_dir, "manifest.json", manifest.to_json() + "\n")


def _load_wordfile(path: str | None) -> frozenset[str] | None:
    if path is None:
        return None
    with open(path, encoding="utf-8") as fp:
        return ingest.parse_wordlist(fp)


def _script_ranges(spec_value: str | None):
    if spec_value is None:
        return None
    if spec_value == "arabic":
        return ingest.ARABIC_SCRIPT_RANGES
    ranges = []
    with open(spec_value, encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            lo, hi = line.split()
            ranges.append((int(lo, 16), int(hi, 16)))
    if not ranges:
        raise DataError(f"no codepoint ranges in {spec_value}")
    return tuple(ranges)


def _normalization_config(args: argparse.Namespace) -> ingest.NormalizationConfig:
    emoji_table: dict[str, int] = {}
    if getattr(args, "emoji_table", None):
        with open(args.emoji_table, encoding="utf-8") as fp:
            emoji_table = ingest.parse_emoji_table(fp)
    pos_map: dict[str, str] = {}
    if getattr(args, "pos_map", None):
        with open(args.pos_map, encoding="utf-8") as fp:
            pos_map = ingest.parse_pos_map(fp)
    return ingest.NormalizationConfig(
        emoji_table=emoji_table,
        stopwords=_load_wordfile(getattr(args, "stopwords", None)) or frozenset(),
        allowed_scripts=_script_ranges(getattr(args, "allowed_scripts", None)),
        blocked_keywords=_load_wordfile(getattr(args, "blocked_keywords", None)) or frozenset(),
        pos_collapse_map=pos_map,
    )


def _load_corpus(path: str, require_labels: bool = False) -> list[ingest.AnalyzedTweet]:
    with open(path, encoding="utf-8") as fp:
        corpus, issues = ingest.parse_records(fp)
    for issue in issues:
        print(f"{path}:{issue.line}: {issue.message}", file=sys.stderr)
    if not corpus:
        raise DataError(f"no usable records in {path}")
    if require_labels:
        unlabeled = [t.tweet.id for t in corpus if t.tweet.label is None]
        if unlabeled:
            raise DataError(f"{len(unlabeled)} records lack labels (first: {unlabeled[0]})")
    return corpus


def _feature_config(args: argparse.Namespace) -> features.FeatureConfig:
    return features.preset(args.features, args.min_count)


def _train_config(args: argparse.Namespace, seed: int | None = None) -> svm.TrainConfig:
    return svm.TrainConfig(
        C=args.C, tolerance=args.tolerance, seed=args.seed if seed is None else seed
    )


# -- subcommands -------------------------------------------------------------


def cmd_preprocess(args) -> int:
    config = _normalization_config(args)
    with open(args.input, encoding="utf-8") as fp:
        records, issues = ingest.parse_records(fp)
    out_dir = Path(args.out_dir)
    if issues:
        report = "".join(f"line {i.line}\t{i.message}\n" for i in issues)
        _write(out_dir, "parse_errors.txt", report)
        for issue in issues:
            print(f"{args.input}:{issue.line}: {issue.message}", file=sys.stderr)
    if not records:
        raise DataError(f"no usable records in {args.input}")
    cleaned = ingest.preprocess_corpus(
        records, config, keywords=_load_wordfile(args.keywords), dedup=not args.no_dedup
    )
    if args.sample is not None:
        cleaned = ingest.stratified_sample(cleaned, args.sample, harness.derive_seed(args.seed, "sample"))
    buffer = io.StringIO()
    ingest.write_records(cleaned, buffer)
    _write(out_dir, "preprocessed.jsonl", buffer.getvalue())
    _emit_manifest(out_dir, build_manifest("preprocess", args))
    print(f"{len(records)} records in, {len(cleaned)} out")
    return EXIT_OK


def cmd_vocab(args) -> int:
    corpus = _load_corpus(args.input)
    vocab = features.build_vocabulary(corpus, _feature_config(args))
    buffer = io.StringIO()
    features.save_vocabulary(vocab, buffer)
    out_dir = Path(args.out_dir)
    _write(out_dir, "vocab.tsv", buffer.getvalue())
    _emit_manifest(out_dir, build_manifest("vocab", args))
    print(f"{len(vocab)} vocabulary entries")
    return EXIT_OK


def cmd_train(args) -> int:
    corpus = _load_corpus(args.input, require_labels=True)
    feature_config = _feature_config(args)
    vocab = features.build_vocabulary(corpus, feature_config)
    examples = [(features.vectorize(t, vocab), harness.signed_label(t)) for t in corpus]
    result = svm.fit(examples, _train_config(args))
    out_dir = Path(args.out_dir)
    buffer = io.StringIO()
    svm.save_model(result.model, buffer)
    _write(out_dir, "model.txt", buffer.getvalue())
    buffer = io.StringIO()
    features.save_vocabulary(vocab, buffer)
    _write(out_dir, "vocab.tsv", buffer.getvalue())
    info = (
        f"examples\t{len(examples)}\nC\t{result.c_used!r}\nepochs\t{result.epochs}\n"
        f"converged\t{int(result.converged)}\nobjective\t{result.primal_objective!r}\n"
    )
    _write(out_dir, "train_info.txt", info)
    _emit_manifest(out_dir, build_manifest("train", args))
    print(f"trained on {len(examples)} examples, C={result.c_used:.6g}, epochs={result.epochs}")
    return EXIT_OK


def _eval_one_fold(payload):
    folds, fold_index, feature_config, train_config = payload
    test_fold = folds[fold_index]
    training = [t for j, fold in enumerate(folds) if j != fold_index for t in fold]
    _, _, (preds,) = harness.train_and_predict(training, [test_fold], feature_config, train_config)
    golds = [harness.signed_label(t) for t in test_fold]
    return fold_index, metrics.ConfusionCounts.from_pairs(list(zip(golds, preds)))


def _run_fold_jobs(payloads, jobs: int):
    if jobs <= 1:
        return [_eval_one_fold(p) for p in payloads]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_eval_one_fold, payloads))


def cmd_eval(args) -> int:
    corpus = _load_corpus(args.input, require_labels=True)
    feature_config = _feature_config(args)
    folds = harness.kfold_split(corpus, args.folds, harness.derive_seed(args.seed, "folds"))
    payloads = [
        (folds, i, feature_config, _train_config(args, harness.derive_seed(args.seed, "train", i)))
        for i in range(args.folds)
    ]
    results = sorted(_run_fold_jobs(payloads, args.jobs))
    lines = ["fold\tprecision\trecall\tf1\taccuracy"]
    sums = [0.0, 0.0, 0.0, 0.0]
    for fold_index, counts in results:
        r = metrics.prf(counts)
        lines.append(f"{fold_index}\t{r.precision:.6f}\t{r.recall:.6f}\t{r.f1:.6f}\t{r.accuracy:.6f}")
        for k, v in enumerate((r.precision, r.recall, r.f1, r.accuracy)):
            sums[k] += v
    means = [s / args.folds for s in sums]
    lines.append(f"mean\t{means[0]:.6f}\t{means[1]:.6f}\t{means[2]:.6f}\t{means[3]:.6f}")
    report = "\n".join(lines) + "\n\n" + metrics.format_metric_report(
        {
            "mean_precision": means[0],
            "mean_recall": means[1],
            "mean_f1": means[2],
            "mean_accuracy": means[3],
        },
        title=f"{args.folds}-fold cross-validation ({args.features})",
    )
    out_dir = Path(args.out_dir)
    _write(out_dir, "eval_report.txt", report)
    _emit_manifest(out_dir, build_manifest("eval", args))
    print(f"mean P={means[0]:.3f} R={means[1]:.3f} F1={means[2]:.3f}")
    return EXIT_OK


def _curve_one_fold(payload):
    folds, fold_index, args_dict = payload
    test_fold = folds[fold_index]
    pool = [t for j, fold in enumerate(folds) if j != fold_index for t in fold]
    start = args_dict["start_size"] or max(2, round(0.02 * len(pool)))
    sizes = harness.make_sizes(len(pool), args_dict["points"], start)
    schedule = harness.CurveSchedule(
        sizes=sizes,
        strategy=args_dict["strategy"],
        seed=harness.derive_seed(args_dict["seed"], "curve", fold_index),
    )
    train_config = svm.TrainConfig(
        C=args_dict["C"],
        tolerance=args_dict["tolerance"],
        seed=harness.derive_seed(args_dict["seed"], "train", fold_index),
    )
    feature_config = features.preset(args_dict["features"], args_dict["min_count"])
    points = harness.run_curve(
        pool, test_fold, schedule, train_config, feature_config,
        stop_threshold=args_dict["stop_threshold"], stop_window=args_dict["stop_window"],
    )
    return fold_index, points


def cmd_curve(args) -> int:
    corpus = _load_corpus(args.input, require_labels=True)
    folds = harness.kfold_split(corpus, args.folds, harness.derive_seed(args.seed, "folds"))
    keys = ("start_size", "points", "strategy", "seed", "C", "tolerance",
            "features", "min_count", "stop_threshold", "stop_window")
    args_dict = {k: getattr(args, k) for k in keys}
    payloads = [(folds, i, args_dict) for i in range(args.folds)]
    if args.jobs <= 1:
        results = [_curve_one_fold(p) for p in payloads]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_curve_one_fold, payloads))
    results.sort()
    out_dir = Path(args.out_dir)
    curve_lines: list[str] = []
    for fold_index, points in results:
        curve_lines.extend(harness.format_curve_lines(args.strategy, fold_index, points))
        _write(
            out_dir,
            f"membership_{args.strategy}_fold{fold_index}.log",
            "\n".join(harness.format_membership_lines(points)) + "\n",
        )
    _write(out_dir, "curve.tsv", "\n".join(curve_lines) + "\n")
    _emit_manifest(out_dir, build_manifest("curve", args))
    stops = sum(1 for _, points in results for p in points if p.stop_here)
    print(f"{len(curve_lines)} curve points, stopping fired in {stops}/{args.folds} folds")
    return EXIT_OK


def _parse_grid(value: str) -> tuple[float, ...]:
    if value == "default":
        return confidence.default_grid()
    try:
        grid = tuple(float(part) for part in value.split(","))
    except ValueError:
        raise UsageError(f"--grid must be 'default' or comma-separated reals, got {value!r}")
    return grid


def _scored_items(args) -> list[confidence.ScoredItem]:
    corpus = _load_corpus(args.input, require_labels=True)
    fold_scores = harness.cross_validated_scores(
        corpus, _feature_config(args), _train_config(args),
        k=args.folds, seed=harness.derive_seed(args.seed, "folds"),
    )
    return [
        confidence.ScoredItem.from_score(score, gold)
        for fold in fold_scores
        for gold, score in zip(fold.golds, fold.scores)
    ]


def cmd_sweep(args) -> int:
    items = _scored_items(args)
    rows = confidence.sweep_thresholds(items, _parse_grid(args.grid))
    out_dir = Path(args.out_dir)
    header = "threshold\tretained\tprecision\trecall\tf1\taccuracy\tglobal_recall"
    _write(out_dir, "sweep.tsv", header + "\n" + "\n".join(confidence.format_sweep_lines(rows)) + "\n")
    _emit_manifest(out_dir, build_manifest("sweep", args))
    print(f"{len(rows)} thresholds over {len(items)} scored items")
    return EXIT_OK


def cmd_regress(args) -> int:
    items = _scored_items(args)
    fits = {
        "all": confidence.fit_logistic(
            [abs(it.score) for it in items], [int(it.predicted == it.gold) for it in items]
        )
    }
    for name, keep in (("negative", lambda it: it.score < 0), ("positive", lambda it: it.score >= 0)):
        subset = [it for it in items if keep(it)]
        if len(subset) >= 2:
            fits[name] = confidence.fit_logistic(
                [abs(it.score) for it in subset], [int(it.predicted == it.gold) for it in subset]
            )
    out_dir = Path(args.out_dir)
    _write(out_dir, "regression.tsv", confidence.format_regression_report(fits))
    _emit_manifest(out_dir, build_manifest("regress", args))
    for name, fit in fits.items():
        if fit.converged:
            z, p = confidence.wald_test(fit.slope, fit.se_slope)
            print(f"{name}: slope={fit.slope:.4f} (se {fit.se_slope:.4f}, z={z:.2f}, p={p:.3g})")
        else:
            print(f"{name}: not converged ({fit.message})")
    return EXIT_OK


def cmd_serve(args) -> int:
    from . import service as service_module

    config = service_module.SessionConfig(
        seed=args.seed,
        retrain_batch=args.retrain_batch,
        stop_threshold=args.stop_threshold,
        stop_window=args.stop_window,
        feature_preset=args.features,
        min_count=args.min_count,
        C=args.C,
        tolerance=args.tolerance,
    )
    normalization = None
    if args.emoji_table or args.stopwords or args.pos_map:
        normalization = _normalization_config(args)
    session = service_module.load_or_create_session(
        args.session_dir, args.input, config, normalization
    )
    app = service_module.create_app(
        session,
        curve_file=args.curve_file,
        sweep_file=args.sweep_file,
        frontend_dir=args.frontend_dir,
    )
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


# -- argument wiring ----------------------------------------------------------


def _add_feature_flags(parser) -> None:
    parser.add_argument("--features", default="lex1", choices=sorted(features.PRESETS),
                        help="feature preset (default: lex1)")
    parser.add_argument("--min-count", type=int, default=3, dest="min_count",
                        help="minimum total ngram occurrences (default: 3)")


def _add_train_flags(parser) -> None:
    parser.add_argument("--C", type=float, default=None,
                        help="regularization trade-off (default: 1 / mean squared vector norm)")
    parser.add_argument("--tolerance", type=float, default=1e-3,
                        help="trainer optimality tolerance (default: 1e-3)")


def _add_norm_flags(parser) -> None:
    parser.add_argument("--emoji-table", dest="emoji_table", help="TSV emoji -> index table")
    parser.add_argument("--stopwords", help="one stopword per line")
    parser.add_argument("--pos-map", dest="pos_map", help="TSV fine tag -> collapsed tag")


def build_parser() -> _Parser:
    parser = _Parser(prog="relsift", description=__doc__)
    parser.add_argument("--version", action="version", version=f"relsift {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="records in -> normalized records out")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    _add_norm_flags(p)
    p.add_argument("--keywords", help="keyword OR-filter list, one token per line")
    p.add_argument("--blocked-keywords", dest="blocked_keywords", help="drop tweets containing these tokens")
    p.add_argument("--allowed-scripts", dest="allowed_scripts",
                   help="'arabic' or a file of hex codepoint ranges ('0600 06FF' per line)")
    p.add_argument("--no-dedup", action="store_true", dest="no_dedup")
    p.add_argument("--sample", type=int, help="stratified sample size (by timestamp)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("vocab", help="build and write the ngram vocabulary")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    _add_feature_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("train", help="train a model on a labeled corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    _add_feature_flags(p)
    _add_train_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="k-fold cross-validated metric report")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    _add_feature_flags(p)
    _add_train_flags(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("curve", help="learning-curve data (random or active)")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    _add_feature_flags(p)
    _add_train_flags(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--start-size", type=int, default=None, dest="start_size",
                   help="initial training-set size (default: 2%% of the pool)")
    p.add_argument("--strategy", choices=harness.STRATEGIES, default="active")
    p.add_argument("--stop-threshold", type=float, default=0.99, dest="stop_threshold")
    p.add_argument("--stop-window", type=int, default=3, dest="stop_window")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("sweep", help="score-threshold sweep over CV scores")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    _add_feature_flags(p)
    _add_train_flags(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--grid", default="default", help="'default' or comma-separated thresholds")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("regress", help="logistic regression of correctness on |score|")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    _add_feature_flags(p)
    _add_train_flags(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--session-dir", required=True, dest="session_dir")
    p.add_argument("--input", help="pool records (required when creating a session)")
    _add_feature_flags(p)
    _add_train_flags(p)
    _add_norm_flags(p)
    p.add_argument("--retrain-batch", type=int, default=50, dest="retrain_batch")
    p.add_argument("--stop-threshold", type=float, default=0.99, dest="stop_threshold")
    p.add_argument("--stop-window", type=int, default=3, dest="stop_window")
    p.add_argument("--curve-file", dest="curve_file")
    p.add_argument("--sweep-file", dest="sweep_file")
    p.add_argument("--frontend-dir", dest="frontend_dir", help="static UI directory to serve")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
