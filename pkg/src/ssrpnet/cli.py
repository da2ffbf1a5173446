"""Command-line front end.

Subcommands: ``synth`` (build a synthetic corpus), ``features extract``,
``pca fit`` / ``pca curve``, ``run`` (one cross-validated training run),
``sweep`` (pooling hyperparameter sweep), and ``report`` (markdown
comparison against the published reference numbers).

Exit codes: 0 success, 1 usage error, 2 unusable data (bad WAV, bad
manifest, degenerate features), 3 runtime failure (training divergence).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .backend import BACKEND
from .errors import (
    AudioDecodeError,
    DegenerateVarianceError,
    InsufficientAudioError,
    InsufficientSamplesError,
    SchemaError,
    ShapeError,
    ValidationError,
)
from .experiment import (
    RunConfig,
    emit_accuracy_curves,
    load_manifest,
    load_features,
    load_run,
    load_sweep,
    report_comparison,
    run_pipeline,
    save_run,
    save_sweep,
    split_fold,
    sweep,
)
from .features import (
    FeatureConfig,
    extract,
    load_wav,
    save_csv,
    save_lmsp,
)
from .pca import (
    emit_variance_curve,
    fit_pca,
    fit_standardizer,
    save_pca,
    select_k_by_variance,
)
from .pooling import PoolingSpec
from .synth import SyntheticSpec, make_corpus

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

DATA_ERRORS = (
    SchemaError, ValidationError, AudioDecodeError, InsufficientAudioError,
    InsufficientSamplesError, DegenerateVarianceError, ShapeError,
    FileNotFoundError, NotADirectoryError, IsADirectoryError,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this project reserves 2 for data."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_feature_args(p: argparse.ArgumentParser, default_frames: int | None) -> None:
    g = p.add_argument_group("features")
    g.add_argument("--sample-rate", type=int, default=44100)
    g.add_argument("--n-mels", type=int, default=40)
    g.add_argument("--clip-seconds", type=float, default=5.0)
    g.add_argument("--target-frames", type=int, default=default_frames,
                   help="time frames after padding/truncation "
                        "(default: 431, or 428 for the pca_cnn arm)")


def _feature_config(args, fallback_frames: int = 431) -> FeatureConfig:
    frames = args.target_frames if args.target_frames is not None else fallback_frames
    return FeatureConfig(sample_rate=args.sample_rate, n_mels=args.n_mels,
                         clip_seconds=args.clip_seconds, target_frames=frames)


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="dataset CSV")
    p.add_argument("--audio-dir", default=None,
                   help="defaults to <manifest dir>/audio")
    p.add_argument("--cache-dir", default=None, help="feature cache directory")
    g = p.add_argument_group("training")
    g.add_argument("--arm", choices=("ssrp_cnn", "pca_cnn"), default="ssrp_cnn")
    g.add_argument("--pooling", choices=("gap", "ssrp_b", "ssrp_t", "max"),
                   default="gap")
    g.add_argument("--window", type=int, default=None, help="ssrp_b window length")
    g.add_argument("--top-k", type=int, default=None, help="ssrp_t top-K count")
    g.add_argument("--epochs", type=int, default=700)
    g.add_argument("--batch-size", type=int, default=64)
    g.add_argument("--lr", type=float, default=0.05)
    g.add_argument("--momentum", type=float, default=0.9)
    g.add_argument("--mixup-alpha", type=float, default=0.2)
    g.add_argument("--dropout", type=float, default=0.5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--eval-every", type=int, default=10)
    g.add_argument("--stop-at-train-accuracy", type=float, default=None)
    g.add_argument("--conv-channels", default="32,64,128",
                   help="comma-separated channel counts")
    g.add_argument("--dense-units", type=int, default=128)
    g = p.add_argument_group("pca arm")
    g.add_argument("--variance-threshold", type=float, default=0.95)
    g.add_argument("--pca-scope", choices=("per_fold", "whole_dataset"),
                   default="per_fold")
    p.add_argument("--quiet", action="store_true", help="suppress progress lines")
    p.add_argument("--print-config", action="store_true",
                   help="print the resolved configuration as JSON and exit")


def _pooling_spec(parser: argparse.ArgumentParser, args) -> PoolingSpec:
    if args.pooling == "ssrp_b":
        if args.window is None:
            parser.error("--pooling ssrp_b requires --window")
        return PoolingSpec("ssrp_b", window=args.window)
    if args.pooling == "ssrp_t":
        if args.top_k is None:
            parser.error("--pooling ssrp_t requires --top-k")
        return PoolingSpec("ssrp_t", top_k=args.top_k)
    return PoolingSpec(args.pooling)


def _run_config(parser: argparse.ArgumentParser, args) -> RunConfig:
    try:
        channels = tuple(int(c) for c in args.conv_channels.split(","))
    except ValueError:
        parser.error(f"--conv-channels must be comma-separated ints, "
                     f"got {args.conv_channels!r}")
    return RunConfig(
        arm=args.arm,
        pooling=_pooling_spec(parser, args),
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        momentum=args.momentum,
        mixup_alpha=args.mixup_alpha,
        dropout=args.dropout,
        seed=args.seed,
        variance_threshold=args.variance_threshold,
        pca_scope=args.pca_scope,
        conv_channels=channels,
        dense_units=args.dense_units,
        eval_every=args.eval_every,
        stop_at_train_accuracy=args.stop_at_train_accuracy,
    )


def _progress(args):
    if args.quiet:
        return None
    return lambda line: print(line, file=sys.stderr)


def _print_config(run_cfg: RunConfig | None, feat_cfg: FeatureConfig) -> int:
    payload = {"backend": BACKEND, "features": feat_cfg.digest_fields()}
    if run_cfg is not None:
        payload["run"] = run_cfg.to_dict()
    print(json.dumps(payload, indent=2))
    return EXIT_OK


# --- subcommand handlers ---

def _cmd_synth(args) -> int:
    classes = tuple(args.classes.split(",")) if args.classes else SyntheticSpec().classes
    spec = SyntheticSpec(classes=classes, clips_per_class=args.clips_per_class,
                         seconds=args.seconds, sample_rate=args.sample_rate,
                         n_folds=args.folds, seed=args.seed)
    manifest = make_corpus(args.root, spec)
    print(manifest)
    return EXIT_OK


def _cmd_features_extract(args) -> int:
    cfg = _feature_config(args)
    if args.print_config:
        return _print_config(None, cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for wav in args.wav:
        spec = extract(load_wav(wav), cfg)
        stem = Path(wav).stem
        if args.format == "lmsp":
            out = out_dir / f"{stem}.lmsp"
            save_lmsp(out, spec)
        else:
            out = out_dir / f"{stem}.csv"
            save_csv(out, spec)
        print(f"{wav} -> {out} shape {spec.values.shape}")
    return EXIT_OK


def _load_flat_features(args, cfg: FeatureConfig):
    manifest = load_manifest(args.manifest, args.audio_dir)
    x, _ = load_features(manifest, cfg, args.cache_dir)
    flat = x.reshape(x.shape[0], -1)
    if args.exclude_fold is not None:
        train_idx, _ = split_fold(manifest, args.exclude_fold)
        flat = flat[train_idx]
    return flat


def _cmd_pca_fit(args) -> int:
    cfg = _feature_config(args, fallback_frames=428)
    if args.print_config:
        return _print_config(None, cfg)
    flat = _load_flat_features(args, cfg)
    std = fit_standardizer(flat)
    model = fit_pca(std.transform(flat), variance_threshold=args.variance_threshold)
    save_pca(args.out, std, model, threshold=args.variance_threshold)
    print(f"{flat.shape[0]} samples x {flat.shape[1]} features -> "
          f"{model.n_components} components "
          f"({model.explained_variance_ratio.sum():.4f} of variance) -> {args.out}")
    return EXIT_OK


def _cmd_pca_curve(args) -> int:
    cfg = _feature_config(args, fallback_frames=428)
    if args.print_config:
        return _print_config(None, cfg)
    flat = _load_flat_features(args, cfg)
    std = fit_standardizer(flat)
    model = fit_pca(std.transform(flat))  # keep the full spectrum
    emit_variance_curve(model.eigenvalues, args.out)
    k = select_k_by_variance(model.eigenvalues, args.variance_threshold)
    print(f"{model.eigenvalues.size} nonzero components; "
          f"{k} reach {args.variance_threshold:.0%} -> {args.out}")
    return EXIT_OK


def _cmd_run(args, parser) -> int:
    fallback = 428 if args.arm == "pca_cnn" else 431
    cfg = _feature_config(args, fallback_frames=fallback)
    run_cfg = _run_config(parser, args)
    if args.print_config:
        return _print_config(run_cfg, cfg)
    manifest = load_manifest(args.manifest, args.audio_dir)
    result = run_pipeline(manifest, run_cfg, cfg, args.cache_dir, _progress(args))
    save_run(args.out, result)
    for fr in result.folds:
        print(f"fold {fr.fold}: accuracy {fr.accuracy:.4f} "
              f"({fr.epochs_run} epochs, {fr.seconds:.1f}s)")
    print(f"mean accuracy {result.mean_accuracy:.4f} "
          f"+/- {result.std_accuracy:.4f} over {len(result.folds)} folds; "
          f"{result.param_count:,} params; backend {result.backend}")
    print(f"result -> {args.out}")
    if args.curves:
        emit_accuracy_curves(result, args.curves, args.plot)
        print(f"curves -> {args.curves}" + (f", {args.plot}" if args.plot else ""))
    return EXIT_OK


def _cmd_sweep(args, parser) -> int:
    cfg = _feature_config(args)
    base = _run_config(parser, args)
    try:
        values = [int(v) for v in args.values.split(",")]
    except ValueError:
        parser.error(f"--values must be comma-separated ints, got {args.values!r}")
    if args.print_config:
        return _print_config(base, cfg)
    manifest = load_manifest(args.manifest, args.audio_dir)
    rows = sweep(manifest, base, cfg, args.parameter, values,
                 args.cache_dir, _progress(args))
    save_sweep(args.out, args.parameter, rows)
    for row in rows:
        shown = f"failed ({row.error})" if row.error else f"{row.mean_accuracy:.4f}"
        print(f"{args.parameter}={row.value}: {shown}")
    print(f"sweep -> {args.out}")
    return EXIT_OK


def _cmd_report(args, parser) -> int:
    results = {}
    for pair in args.run or []:
        label, _, path = pair.partition("=")
        if not path:
            parser.error(f"--run expects label=path, got {pair!r}")
        results[label] = load_run(path)
    sweeps = {}
    for path in args.sweep or []:
        parameter, rows = load_sweep(path)
        sweeps[parameter] = rows
    if not results and not sweeps:
        parser.error("report needs at least one --run or --sweep")
    text = report_comparison(results, args.out, sweeps or None)
    sys.stdout.write(text)
    print(f"report -> {args.out}", file=sys.stderr)
    return EXIT_OK


# --- parser wiring ---

def build_parser() -> _Parser:
    parser = _Parser(prog="ssrpnet",
                     description="Sound classification with sparse salient "
                                 "region pooling and PCA baselines.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__} (backend: {BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("synth", help="write a small synthetic labelled corpus")
    p.add_argument("--root", required=True)
    p.add_argument("--clips-per-class", type=int, default=8)
    p.add_argument("--seconds", type=float, default=1.0)
    p.add_argument("--sample-rate", type=int, default=44100)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--classes", default=None,
                   help="comma-separated subset of tone,click_train,am_noise,chirp")
    p.set_defaults(handler=lambda a, _p: _cmd_synth(a))

    feats = sub.add_parser("features", help="feature extraction")
    fsub = feats.add_subparsers(dest="features_command", required=True,
                                parser_class=_Parser)
    p = fsub.add_parser("extract", help="WAV files to log-mel maps")
    p.add_argument("wav", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("lmsp", "csv"), default="lmsp")
    _add_feature_args(p, default_frames=431)
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(handler=lambda a, _p: _cmd_features_extract(a))

    pca = sub.add_parser("pca", help="principal component analysis")
    psub = pca.add_subparsers(dest="pca_command", required=True,
                              parser_class=_Parser)
    for name, handler in (("fit", _cmd_pca_fit), ("curve", _cmd_pca_curve)):
        p = psub.add_parser(name, help=f"{name} on flattened log-mel features")
        p.add_argument("--manifest", required=True)
        p.add_argument("--audio-dir", default=None)
        p.add_argument("--cache-dir", default=None)
        p.add_argument("--out", required=True)
        p.add_argument("--variance-threshold", type=float, default=0.95)
        p.add_argument("--exclude-fold", type=int, default=None,
                       help="fit on all folds except this one")
        _add_feature_args(p, default_frames=428)
        p.add_argument("--print-config", action="store_true")
        p.set_defaults(handler=lambda a, _p, h=handler: h(a))

    p = sub.add_parser("run", help="one cross-validated training run")
    _add_run_args(p)
    _add_feature_args(p, default_frames=None)
    p.add_argument("--out", default="run.json")
    p.add_argument("--curves", default=None, help="write loss/accuracy CSV here")
    p.add_argument("--plot", default=None, help="render curves PNG (matplotlib)")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("sweep", help="sweep a pooling hyperparameter")
    p.add_argument("--parameter", choices=("window", "top_k"), required=True)
    p.add_argument("--values", required=True, help="comma-separated ints")
    _add_run_args(p)
    _add_feature_args(p, default_frames=431)
    p.add_argument("--out", default="sweep.json")
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("report", help="markdown comparison report")
    p.add_argument("--run", action="append", metavar="LABEL=PATH")
    p.add_argument("--sweep", action="append", metavar="PATH")
    p.add_argument("--out", default="report.md")
    p.set_defaults(handler=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args, parser)
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RuntimeError as exc:  # includes training divergence
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
