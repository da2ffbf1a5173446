"""Cross-validated training runs, hyperparameter sweeps, and reports.

The dataset contract is a CSV manifest (filename, fold, target, category)
next to an ``audio/`` directory, the layout ESC-50 ships with. Folds come
from the manifest, so evaluation is leave-one-fold-out over the predefined
folds rather than a random split.

Two experiment arms share the classifier:

* ``ssrp_cnn`` -- log-mel maps go in whole, shape (T, F, 1); the global
  pooling (GAP, windowed-mean max, or top-K mean) is the arm's variable.
* ``pca_cnn``  -- log-mel maps are flattened, standardized on the training
  fold, projected onto the principal components that reach the variance
  threshold, and fed in as a (k, 1, 1) map. The 2x2 pools are skipped
  because the frequency axis has collapsed to size 1.

Per-fold seeds are ``seed + fold_id``; with a fixed backend the whole
trajectory is reproducible bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .backend import BACKEND
from .errors import DivergenceError, SchemaError, ValidationError
from .features import FeatureConfig, extract, load_lmsp, load_wav_bytes, save_lmsp
from .network import (
    NetworkConfig,
    backward,
    count_params,
    cross_entropy,
    forward,
    init_params,
    mixup_batch,
    one_hot,
    predict_logits,
    sgd_momentum_step,
    zero_velocity,
)
from .pca import fit_pca, fit_standardizer, project, reshape_for_cnn
from .pooling import PoolingSpec

MANIFEST_COLUMNS = ("filename", "fold", "target", "category")
ARMS = ("ssrp_cnn", "pca_cnn")

# Published reference results this pipeline is compared against: 5-fold
# accuracy on ESC-50 for the best windowed (W=4) and top-K (K=12) pooling,
# the plain-GAP baseline, and PCA features into the same classifier, plus
# the sweep tables and reported parameter counts.
PUBLISHED = {
    "ssrp_b": {"accuracy": 72.85, "window": 4, "params": 527_000},
    "ssrp_t": {"accuracy": 80.69, "top_k": 12, "params": 527_000},
    "gap": {"accuracy": 66.75, "params": 245_000},
    "pca_cnn": {"accuracy": 37.60, "components": 101, "variance": 0.95,
                "input_dim": 17120},
}
PUBLISHED_WINDOW_SWEEP = {2: 71.15, 4: 72.85, 6: 65.05, 8: 66.09}
PUBLISHED_TOPK_SWEEP = {4: 75.20, 8: 77.60, 10: 80.60, 12: 80.69, 14: 78.65, 16: 70.59}


# --- dataset manifest ---

@dataclass(frozen=True)
class ManifestEntry:
    filename: str
    fold: int
    target: int
    category: str


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    audio_dir: Path

    @property
    def n_classes(self) -> int:
        return len({e.target for e in self.entries})

    def fold_ids(self) -> list[int]:
        return sorted({e.fold for e in self.entries})

    def wav_path(self, entry: ManifestEntry) -> Path:
        return self.audio_dir / entry.filename


def load_manifest(path: str | Path, audio_dir: str | Path | None = None) -> DatasetManifest:
    """Parse and validate the manifest CSV.

    Structural problems (missing columns, non-integer fields) raise
    SchemaError; semantic ones (duplicates, a class absent from a fold,
    non-contiguous targets) raise ValidationError.
    """
    path = Path(path)
    audio_dir = Path(audio_dir) if audio_dir is not None else path.parent / "audio"
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty manifest")
        missing = [c for c in MANIFEST_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        entries = []
        for lineno, row in enumerate(reader, start=2):
            try:
                entries.append(ManifestEntry(
                    filename=row["filename"].strip(),
                    fold=int(row["fold"]),
                    target=int(row["target"]),
                    category=row["category"].strip(),
                ))
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad row ({exc})") from exc
    if not entries:
        raise SchemaError(f"{path}: no data rows")
    manifest = DatasetManifest(tuple(entries), audio_dir)
    validate_manifest(manifest)
    return manifest


def validate_manifest(manifest: DatasetManifest) -> None:
    names = [e.filename for e in manifest.entries]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise ValidationError(f"duplicate filenames: {dupes[:5]}")
    by_target: dict[int, str] = {}
    for e in manifest.entries:
        if e.fold < 1:
            raise ValidationError(f"{e.filename}: fold must be >= 1, got {e.fold}")
        if e.target < 0:
            raise ValidationError(f"{e.filename}: target must be >= 0, got {e.target}")
        if by_target.setdefault(e.target, e.category) != e.category:
            raise ValidationError(
                f"target {e.target} maps to both {by_target[e.target]!r} and {e.category!r}"
            )
    targets = sorted(by_target)
    if targets != list(range(len(targets))):
        raise ValidationError(f"targets must be contiguous from 0, got {targets}")
    if len(targets) < 2:
        raise ValidationError("need at least 2 classes")
    folds = manifest.fold_ids()
    if len(folds) < 2:
        raise ValidationError("need at least 2 folds for cross-validation")
    for fold in folds:
        present = {e.target for e in manifest.entries if e.fold == fold}
        absent = set(targets) - present
        if absent:
            raise ValidationError(f"fold {fold} has no examples of classes {sorted(absent)}")


def split_fold(manifest: DatasetManifest, fold: int) -> tuple[np.ndarray, np.ndarray]:
    """Row indices (into manifest order) of the train and test sets."""
    folds = np.array([e.fold for e in manifest.entries])
    if fold not in folds:
        raise ValidationError(f"fold {fold} not present in manifest")
    test = np.flatnonzero(folds == fold)
    train = np.flatnonzero(folds != fold)
    if np.intersect1d(train, test).size:
        raise ValidationError("train and test indices overlap")
    return train, test


# --- feature loading with a content-addressed cache ---

def feature_cache_key(wav_bytes: bytes, cfg: FeatureConfig) -> str:
    h = hashlib.sha256()
    h.update(wav_bytes)
    h.update(json.dumps(cfg.digest_fields(), sort_keys=True).encode())
    return h.hexdigest()


def load_features(manifest: DatasetManifest, cfg: FeatureConfig,
                  cache_dir: str | Path | None = None,
                  progress=None) -> tuple[np.ndarray, np.ndarray]:
    """Feature tensor (N, T, F) and label vector (N,) in manifest order.

    Cache entries are keyed by file content and feature parameters, so a
    changed WAV or config never serves stale features.
    """
    if cache_dir is not None:
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
    maps = []
    for i, entry in enumerate(manifest.entries):
        wav_bytes = manifest.wav_path(entry).read_bytes()
        cached = None
        if cache_dir is not None:
            cached = cache_dir / (feature_cache_key(wav_bytes, cfg) + ".lmsp")
            if cached.exists():
                maps.append(load_lmsp(cached).values)
                continue
        spec = extract(load_wav_bytes(wav_bytes), cfg)
        if cached is not None:
            save_lmsp(cached, spec)
        # always round through the on-disk float32 precision so a cold and a
        # warm cache hand the trainer bit-identical features
        maps.append(spec.values.astype(np.float32).astype(np.float64))
        if progress is not None:
            progress(f"features {i + 1}/{len(manifest.entries)}: {entry.filename}")
    x = np.stack(maps)
    y = np.array([e.target for e in manifest.entries], dtype=np.int64)
    return x, y


# --- run configuration and results ---

@dataclass(frozen=True)
class RunConfig:
    """Everything that determines one cross-validated training run."""

    arm: str = "ssrp_cnn"
    pooling: PoolingSpec = field(default_factory=PoolingSpec)
    epochs: int = 700
    batch_size: int = 64
    learning_rate: float = 0.05
    momentum: float = 0.9
    mixup_alpha: float = 0.2
    dropout: float = 0.5
    seed: int = 0
    variance_threshold: float = 0.95
    pca_scope: str = "per_fold"  # or "whole_dataset"
    conv_channels: tuple[int, ...] = (32, 64, 128)
    dense_units: int = 128
    eval_every: int = 10
    stop_at_train_accuracy: float | None = None

    def __post_init__(self):
        if self.arm not in ARMS:
            raise ValueError(f"arm must be one of {ARMS}, got {self.arm!r}")
        if self.pca_scope not in ("per_fold", "whole_dataset"):
            raise ValueError(f"bad pca_scope {self.pca_scope!r}")
        if self.epochs < 1 or self.batch_size < 2:
            raise ValueError("epochs must be >= 1 and batch_size >= 2")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "arm", "epochs", "batch_size", "learning_rate", "momentum",
            "mixup_alpha", "dropout", "seed", "variance_threshold", "pca_scope",
            "dense_units", "eval_every", "stop_at_train_accuracy")}
        d["conv_channels"] = list(self.conv_channels)
        d["pooling"] = {"kind": self.pooling.kind, "window": self.pooling.window,
                        "top_k": self.pooling.top_k}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d["pooling"] = PoolingSpec(**d["pooling"])
        d["conv_channels"] = tuple(d["conv_channels"])
        return cls(**d)


@dataclass
class FoldResult:
    fold: int
    accuracy: float
    epochs_run: int
    final_train_accuracy: float
    loss_history: list[float]
    eval_history: list[tuple[int, float]]  # (epoch, test accuracy)
    n_train: int
    n_test: int
    n_components: int | None = None  # pca arm only
    pca_digest: str | None = None    # hash of the fitted standardizer + projection
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "fold": self.fold, "accuracy": self.accuracy,
            "epochs_run": self.epochs_run,
            "final_train_accuracy": self.final_train_accuracy,
            "loss_history": self.loss_history,
            "eval_history": [list(p) for p in self.eval_history],
            "n_train": self.n_train, "n_test": self.n_test,
            "n_components": self.n_components, "pca_digest": self.pca_digest,
            "seconds": self.seconds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FoldResult":
        d = dict(d)
        d["eval_history"] = [tuple(p) for p in d["eval_history"]]
        return cls(**d)


@dataclass
class RunResult:
    config: RunConfig
    folds: list[FoldResult]
    param_count: int
    param_breakdown: dict[str, int]
    input_shape: tuple[int, ...]
    backend: str
    elapsed: float

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([f.accuracy for f in self.folds])

    @property
    def mean_accuracy(self) -> float:
        return float(self.accuracies.mean())

    @property
    def std_accuracy(self) -> float:
        accs = self.accuracies
        return float(accs.std(ddof=1)) if accs.size > 1 else 0.0

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "folds": [f.to_dict() for f in self.folds],
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "param_count": self.param_count,
            "param_breakdown": self.param_breakdown,
            "input_shape": list(self.input_shape),
            "backend": self.backend,
            "elapsed": self.elapsed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunResult":
        return cls(
            config=RunConfig.from_dict(d["config"]),
            folds=[FoldResult.from_dict(f) for f in d["folds"]],
            param_count=d["param_count"],
            param_breakdown=d["param_breakdown"],
            input_shape=tuple(d["input_shape"]),
            backend=d["backend"],
            elapsed=d["elapsed"],
        )


def save_run(path: str | Path, result: RunResult) -> None:
    Path(path).write_text(json.dumps(result.to_dict(), indent=2) + "\n")


def load_run(path: str | Path) -> RunResult:
    return RunResult.from_dict(json.loads(Path(path).read_text()))


# --- training ---

def accuracy_score(params, x: np.ndarray, y: np.ndarray, config: NetworkConfig,
                   batch_size: int = 64) -> float:
    logits = predict_logits(params, x, config, batch_size)
    return float((logits.argmax(axis=1) == y).mean())


def train_fold(x_train: np.ndarray, y_train: np.ndarray,
               x_test: np.ndarray, y_test: np.ndarray,
               net_config: NetworkConfig, run: RunConfig, fold: int,
               progress=None) -> FoldResult:
    """Train one fold from scratch; deterministic given seed + fold.

    One generator drives initialization, the epoch shuffle, mixup, and
    dropout, in that order. Batches of a single example are skipped
    because batch-norm statistics are undefined there. A non-finite loss
    aborts the fold with DivergenceError.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(run.seed + fold)
    params = init_params(net_config, rng)
    velocity = zero_velocity(params)
    targets = one_hot(y_train, net_config.n_classes)
    n = x_train.shape[0]

    loss_history: list[float] = []
    eval_history: list[tuple[int, float]] = []
    train_acc = 0.0
    epochs_run = 0
    for epoch in range(1, run.epochs + 1):
        perm = rng.permutation(n)
        batch_losses = []
        for lo in range(0, n, run.batch_size):
            idx = perm[lo:lo + run.batch_size]
            if idx.size < 2:
                continue
            xb, yb, _ = mixup_batch(x_train[idx], targets[idx], run.mixup_alpha, rng)
            # overflow here is diagnosed by the loss check, not by warnings
            with np.errstate(over="ignore", invalid="ignore"):
                logits, cache = forward(params, xb, net_config, train=True, rng=rng)
                loss, dlogits = cross_entropy(logits, yb)
                if not np.isfinite(loss):
                    raise DivergenceError(
                        f"fold {fold}: non-finite loss at epoch {epoch}", epoch=epoch)
                grads = backward(params, cache, dlogits, net_config)
            sgd_momentum_step(params, velocity, grads, run.learning_rate, run.momentum)
            batch_losses.append(loss)
        loss_history.append(float(np.mean(batch_losses)))
        epochs_run = epoch

        last = epoch == run.epochs
        if epoch % run.eval_every == 0 or last or run.stop_at_train_accuracy is not None:
            # same deal as the training step: params may already be blown up
            # here, and the next epoch's loss check is what reports that
            with np.errstate(over="ignore", invalid="ignore"):
                if run.stop_at_train_accuracy is not None:
                    train_acc = accuracy_score(params, x_train, y_train, net_config,
                                               run.batch_size)
                if epoch % run.eval_every == 0 or last:
                    test_acc = accuracy_score(params, x_test, y_test, net_config,
                                              run.batch_size)
                    eval_history.append((epoch, test_acc))
            if progress is not None and (epoch % run.eval_every == 0 or last):
                progress(f"fold {fold} epoch {epoch}: loss {loss_history[-1]:.4f} "
                         f"test_acc {test_acc:.4f}")
            if (run.stop_at_train_accuracy is not None
                    and train_acc >= run.stop_at_train_accuracy):
                break

    if not eval_history or eval_history[-1][0] != epochs_run:
        eval_history.append((epochs_run, accuracy_score(
            params, x_test, y_test, net_config, run.batch_size)))
    if run.stop_at_train_accuracy is None:
        train_acc = accuracy_score(params, x_train, y_train, net_config, run.batch_size)
    return FoldResult(
        fold=fold,
        accuracy=eval_history[-1][1],
        epochs_run=epochs_run,
        final_train_accuracy=train_acc,
        loss_history=loss_history,
        eval_history=eval_history,
        n_train=n,
        n_test=x_test.shape[0],
        seconds=time.perf_counter() - start,
    )


def _pca_digest(std, model) -> str:
    h = hashlib.sha256()
    for arr in (std.mean, std.std, model.projection, model.eigenvalues):
        h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return h.hexdigest()


def _fit_fold_pca(flat: np.ndarray, rows: np.ndarray, threshold: float):
    std = fit_standardizer(flat[rows])
    model = fit_pca(std.transform(flat[rows]), variance_threshold=threshold)
    return std, model


def leakage_check(manifest: DatasetManifest, result: RunResult,
                  x: np.ndarray) -> None:
    """Prove the evaluation never saw test-fold data during fitting.

    For every fold: train/test indices are disjoint and cover the dataset.
    For the pca arm with per-fold scope, the transform digest recorded in
    the result must equal a fresh fit on the training rows alone and must
    differ from a whole-dataset fit. Raises ValidationError on any breach.
    """
    flat = x.reshape(x.shape[0], -1)
    whole_digest = None
    if result.config.arm == "pca_cnn":
        whole_digest = _pca_digest(
            *_fit_fold_pca(flat, np.arange(flat.shape[0]),
                           result.config.variance_threshold))
    for fr in result.folds:
        train_idx, test_idx = split_fold(manifest, fr.fold)
        if np.intersect1d(train_idx, test_idx).size:
            raise ValidationError(f"fold {fr.fold}: train/test overlap")
        if len(train_idx) + len(test_idx) != len(manifest.entries):
            raise ValidationError(f"fold {fr.fold}: split does not cover the dataset")
        if result.config.arm != "pca_cnn" or result.config.pca_scope != "per_fold":
            continue
        expected = _pca_digest(
            *_fit_fold_pca(flat, train_idx, result.config.variance_threshold))
        if fr.pca_digest != expected:
            raise ValidationError(
                f"fold {fr.fold}: recorded PCA does not match a train-only fit")
        if fr.pca_digest == whole_digest:
            raise ValidationError(
                f"fold {fr.fold}: recorded PCA matches a whole-dataset fit")


def _network_for_arm(run: RunConfig, input_shape: tuple[int, int, int],
                     n_classes: int) -> NetworkConfig:
    if run.arm == "pca_cnn":
        # (k, 1, 1) input: frequency axis is gone, so no 2x2 pooling and
        # plain GAP over the component axis.
        return NetworkConfig(
            input_shape=input_shape, n_classes=n_classes,
            conv_channels=run.conv_channels, dense_units=run.dense_units,
            pool_after=(), pooling=PoolingSpec("gap"), dropout=run.dropout)
    return NetworkConfig(
        input_shape=input_shape, n_classes=n_classes,
        conv_channels=run.conv_channels, dense_units=run.dense_units,
        pool_after=(0, 1), pooling=run.pooling, dropout=run.dropout)


def run_pipeline(manifest: DatasetManifest, run: RunConfig, feat_cfg: FeatureConfig,
                 cache_dir: str | Path | None = None, progress=None) -> RunResult:
    """Leave-one-fold-out evaluation of the configured arm."""
    start = time.perf_counter()
    x, y = load_features(manifest, feat_cfg, cache_dir, progress)
    n_classes = manifest.n_classes

    whole_fit = None
    if run.arm == "pca_cnn" and run.pca_scope == "whole_dataset":
        # Deliberate leakage mode for comparison runs; the default fits
        # per fold on training data only.
        flat = x.reshape(x.shape[0], -1)
        whole_fit = _fit_fold_pca(flat, np.arange(flat.shape[0]),
                                  run.variance_threshold)

    folds: list[FoldResult] = []
    param_count = None
    breakdown = None
    input_shape = None
    for fold in manifest.fold_ids():
        train_idx, test_idx = split_fold(manifest, fold)
        if run.arm == "pca_cnn":
            flat = x.reshape(x.shape[0], -1)
            std, model = (whole_fit if whole_fit is not None else
                          _fit_fold_pca(flat, train_idx, run.variance_threshold))
            z_train = project(model, std.transform(flat[train_idx]))
            z_test = project(model, std.transform(flat[test_idx]))
            x_train = np.stack([reshape_for_cnn(z) for z in z_train])
            x_test = np.stack([reshape_for_cnn(z) for z in z_test])
            n_components = model.n_components
            pca_digest = _pca_digest(std, model)
        else:
            x_train = x[train_idx][..., None]
            x_test = x[test_idx][..., None]
            n_components = None
            pca_digest = None

        shape = tuple(x_train.shape[1:])
        net_config = _network_for_arm(run, shape, n_classes)
        if param_count is None or shape != input_shape:
            param_count, breakdown = count_params(net_config)
            input_shape = shape
        if progress is not None:
            progress(f"fold {fold}: train {len(train_idx)} test {len(test_idx)} "
                     f"input {shape} params {param_count}")
        result = train_fold(x_train, y[train_idx], x_test, y[test_idx],
                            net_config, run, fold, progress)
        result.n_components = n_components
        result.pca_digest = pca_digest
        folds.append(result)

    return RunResult(
        config=run,
        folds=folds,
        param_count=param_count,
        param_breakdown=breakdown,
        input_shape=input_shape,
        backend=BACKEND,
        elapsed=time.perf_counter() - start,
    )


# --- sweeps ---

@dataclass
class SweepRow:
    value: int
    mean_accuracy: float | None
    std_accuracy: float | None
    fold_accuracies: list[float]
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value, "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "fold_accuracies": self.fold_accuracies, "error": self.error,
        }


def sweep(manifest: DatasetManifest, base: RunConfig, feat_cfg: FeatureConfig,
          parameter: str, values: list[int], cache_dir=None,
          progress=None) -> list[SweepRow]:
    """Repeat the pipeline across pooling hyperparameter values.

    A failing value (window too large, divergence) is recorded in its row
    and the sweep continues.
    """
    if parameter not in ("window", "top_k"):
        raise ValueError(f"parameter must be 'window' or 'top_k', got {parameter!r}")
    kind = "ssrp_b" if parameter == "window" else "ssrp_t"
    rows = []
    for value in values:
        try:
            pooling = (PoolingSpec(kind, window=value) if kind == "ssrp_b"
                       else PoolingSpec(kind, top_k=value))
            run = replace(base, arm="ssrp_cnn", pooling=pooling)
            result = run_pipeline(manifest, run, feat_cfg, cache_dir, progress)
            rows.append(SweepRow(value, result.mean_accuracy, result.std_accuracy,
                                 [f.accuracy for f in result.folds]))
        except (ValueError, DivergenceError) as exc:
            rows.append(SweepRow(value, None, None, [], error=str(exc)))
        if progress is not None:
            tail = rows[-1]
            shown = "failed" if tail.error else f"mean {tail.mean_accuracy:.4f}"
            progress(f"{parameter}={value}: {shown}")
    return rows


def save_sweep(path: str | Path, parameter: str, rows: list[SweepRow]) -> None:
    payload = {"parameter": parameter, "rows": [r.to_dict() for r in rows]}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_sweep(path: str | Path) -> tuple[str, list[SweepRow]]:
    payload = json.loads(Path(path).read_text())
    return payload["parameter"], [SweepRow(**r) for r in payload["rows"]]


# --- curves and reports ---

def emit_accuracy_curves(result: RunResult, csv_path: str | Path,
                         png_path: str | Path | None = None) -> None:
    """Long-format CSV of training loss and test accuracy per fold.

    Columns: fold, epoch, series (train_loss | test_accuracy), value.
    Rendering the optional PNG needs matplotlib.
    """
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fold", "epoch", "series", "value"])
        for fr in result.folds:
            for epoch, loss in enumerate(fr.loss_history, start=1):
                writer.writerow([fr.fold, epoch, "train_loss", repr(loss)])
            for epoch, acc in fr.eval_history:
                writer.writerow([fr.fold, epoch, "test_accuracy", repr(acc)])
    if png_path is None:
        return
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4))
    for fr in result.folds:
        ax_loss.plot(range(1, len(fr.loss_history) + 1), fr.loss_history,
                     label=f"fold {fr.fold}")
        if fr.eval_history:
            epochs, accs = zip(*fr.eval_history)
            ax_acc.plot(epochs, accs, marker="o", label=f"fold {fr.fold}")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("train loss")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("test accuracy")
    ax_acc.legend(fontsize="small")
    fig.suptitle(result.config.pooling.label())
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)


def _fmt_pct(x: float | None) -> str:
    return "-" if x is None else f"{100.0 * x:.2f}%"


def report_comparison(results: dict[str, RunResult], path: str | Path,
                      sweeps: dict[str, list[SweepRow]] | None = None) -> str:
    """Markdown report: measured runs next to the published reference numbers.

    ``results`` maps a label (e.g. "ssrp_t", "gap", "pca_cnn") to a run.
    The parameter-count gap between this implementation and the published
    totals is stated rather than hidden; see the note in the output.
    """
    lines = ["# Pooling comparison report", ""]
    if results:
        lines += [f"Backend: {next(iter(results.values())).backend}", ""]
    lines += ["## Measured runs", "",
              "| arm | pooling | folds | mean acc | std | params | input |",
              "|---|---|---|---|---|---|---|"]
    for label, res in results.items():
        cfg = res.config
        lines.append(
            f"| {label} | {cfg.pooling.label() if cfg.arm == 'ssrp_cnn' else 'gap'} "
            f"| {len(res.folds)} | {_fmt_pct(res.mean_accuracy)} "
            f"| {_fmt_pct(res.std_accuracy)} | {res.param_count:,} "
            f"| {res.input_shape} |")
    lines += ["", "## Published reference (ESC-50, 5 folds)", "",
              "| system | accuracy | params |",
              "|---|---|---|",
              f"| windowed-mean max pooling, W=4 | {PUBLISHED['ssrp_b']['accuracy']:.2f}% "
              f"| {PUBLISHED['ssrp_b']['params']:,} |",
              f"| top-K mean pooling, K=12 | {PUBLISHED['ssrp_t']['accuracy']:.2f}% "
              f"| {PUBLISHED['ssrp_t']['params']:,} |",
              f"| global average pooling | {PUBLISHED['gap']['accuracy']:.2f}% "
              f"| {PUBLISHED['gap']['params']:,} |",
              f"| PCA features ({PUBLISHED['pca_cnn']['components']} components, "
              f"{PUBLISHED['pca_cnn']['variance']:.0%} variance) "
              f"| {PUBLISHED['pca_cnn']['accuracy']:.2f}% | - |"]
    if sweeps:
        for parameter, rows in sweeps.items():
            ref = PUBLISHED_WINDOW_SWEEP if parameter == "window" else PUBLISHED_TOPK_SWEEP
            lines += ["", f"## Sweep over {parameter}", "",
                      f"| {parameter} | measured mean acc | published |",
                      "|---|---|---|"]
            for row in rows:
                measured = ("failed: " + row.error if row.error
                            else _fmt_pct(row.mean_accuracy))
                pub = ref.get(row.value)
                published = f"{pub:.2f}%" if pub is not None else "-"
                lines.append(f"| {row.value} | {measured} | {published} |")
    lines += ["", "## Notes", ""]
    if results:
        default_total, _ = count_params(NetworkConfig())
        lines.append(
            f"* At the published architecture (3x3 convs 32/64/128 with "
            f"batch norm, two 2x2 average pools, dense 128, 50 classes) the "
            f"parameter bookkeeping here counts {default_total:,} trainable "
            f"parameters; each measured run's own count is in the table "
            f"above. The published totals (~527K with SSRP pooling, ~245K "
            f"with GAP) do not match, and no architecture variant stated in "
            f"the source reproduces them; the discrepancy is reported, not "
            f"reconciled.")
    lines.append(
        "* PCA projections and feature standardization are fitted on the "
        "training folds only (unless the run was configured with "
        "pca_scope=whole_dataset, which is a deliberate leakage mode for "
        "comparison).")
    lines.append(
        "* Published GAP-baseline pooling is assumed to be plain temporal "
        "averaging; the source does not pin this down.")
    text = "\n".join(lines) + "\n"
    Path(path).write_text(text)
    return text
