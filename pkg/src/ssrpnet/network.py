"""Small convolutional classifier with exact hand-derived gradients.

Architecture: three 3x3 conv blocks (conv -> batch norm -> ReLU), 2x2
average pooling after the blocks named in ``pool_after``, a global pooling
over time after the last block, then flatten -> dense -> ReLU -> dropout
-> dense -> softmax. Feature maps travel as (batch, channel, time,
frequency) float64; the public entry points accept (batch, time,
frequency, channel) to match how features are stored.

Everything here is deterministic given the generator handed in: He
initialization draws weights in declaration order, the training step draws
mixup lambda, the mixup permutation, then the dropout mask, in that order.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backend import kernels
from .errors import ShapeError
from .pooling import PooledOutput, PoolingSpec, pool_backward, pool_forward

CHECKPOINT_MAGIC = b"SSRPNET"


@dataclass(frozen=True)
class NetworkConfig:
    """Shapes and hyperparameters that define the classifier."""

    input_shape: tuple[int, int, int] = (431, 40, 1)  # (time, frequency, channel)
    n_classes: int = 50
    conv_channels: tuple[int, ...] = (32, 64, 128)
    dense_units: int = 128
    pool_after: tuple[int, ...] = (0, 1)  # conv block indices with 2x2 pooling
    pooling: PoolingSpec = field(default_factory=PoolingSpec)
    dropout: float = 0.5
    bn_eps: float = 1e-5
    bn_momentum: float = 0.9

    def __post_init__(self):
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ShapeError(f"input_shape must be (T, F, C) >= 1, got {self.input_shape}")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if not self.conv_channels:
            raise ValueError("need at least one conv block")
        if any(i < 0 or i >= len(self.conv_channels) for i in self.pool_after):
            raise ValueError(f"pool_after {self.pool_after} names a missing conv block")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "n_classes": self.n_classes,
            "conv_channels": list(self.conv_channels),
            "dense_units": self.dense_units,
            "pool_after": list(self.pool_after),
            "pooling": {
                "kind": self.pooling.kind,
                "window": self.pooling.window,
                "top_k": self.pooling.top_k,
            },
            "dropout": self.dropout,
            "bn_eps": self.bn_eps,
            "bn_momentum": self.bn_momentum,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        pooling = PoolingSpec(**d.get("pooling", {}))
        return cls(
            input_shape=tuple(d["input_shape"]),
            n_classes=d["n_classes"],
            conv_channels=tuple(d["conv_channels"]),
            dense_units=d["dense_units"],
            pool_after=tuple(d["pool_after"]),
            pooling=pooling,
            dropout=d["dropout"],
            bn_eps=d["bn_eps"],
            bn_momentum=d["bn_momentum"],
        )

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


def map_shapes(config: NetworkConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Per-layer output shapes for one example, validating the geometry."""
    t, f, c = config.input_shape
    shapes: list[tuple[str, tuple[int, ...]]] = [("input", (t, f, c))]
    for i, co in enumerate(config.conv_channels):
        shapes.append((f"conv{i + 1}", (co, t, f)))
        if i in config.pool_after:
            if t < 2 or f < 2:
                raise ShapeError(
                    f"2x2 pooling after conv{i + 1} needs T >= 2 and F >= 2, got ({t}, {f})"
                )
            t, f = t // 2, f // 2
            shapes.append((f"pool{i + 1}", (co, t, f)))
    spec = config.pooling
    if spec.kind == "ssrp_b" and spec.window > t:
        raise ShapeError(f"ssrp_b window {spec.window} exceeds {t} pooled time steps")
    if spec.kind == "ssrp_t" and spec.top_k > t:
        raise ShapeError(f"ssrp_t top_k {spec.top_k} exceeds {t} pooled time steps")
    shapes.append((spec.label(), (config.conv_channels[-1], f)))
    flat = config.conv_channels[-1] * f
    shapes.append(("flatten", (flat,)))
    shapes.append(("dense1", (config.dense_units,)))
    shapes.append(("dense2", (config.n_classes,)))
    return shapes


def flattened_size(config: NetworkConfig) -> int:
    return int(np.prod(map_shapes(config)[-3][1]))


@dataclass
class NetworkParams:
    """Trainable tensors, batch-norm running stats, and their declared order."""

    tensors: dict[str, np.ndarray]
    running: dict[str, np.ndarray]
    order: tuple[str, ...]
    running_order: tuple[str, ...]

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            {k: v.copy() for k, v in self.tensors.items()},
            {k: v.copy() for k, v in self.running.items()},
            self.order,
            self.running_order,
        )


def init_params(config: NetworkConfig, seed: int | np.random.Generator = 0) -> NetworkParams:
    """He-initialized weights: N(0, sqrt(2 / fan_in)); biases and shifts zero."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    order: list[str] = []
    running: dict[str, np.ndarray] = {}
    running_order: list[str] = []

    def declare(name: str, value: np.ndarray) -> None:
        tensors[name] = value
        order.append(name)

    ci = config.input_shape[2]
    for i, co in enumerate(config.conv_channels, start=1):
        fan_in = ci * 9
        declare(f"conv{i}_w", rng.normal(0.0, np.sqrt(2.0 / fan_in), (co, ci, 3, 3)))
        declare(f"conv{i}_b", np.zeros(co))
        declare(f"bn{i}_gamma", np.ones(co))
        declare(f"bn{i}_beta", np.zeros(co))
        running[f"bn{i}_mean"] = np.zeros(co)
        running[f"bn{i}_var"] = np.ones(co)
        running_order += [f"bn{i}_mean", f"bn{i}_var"]
        ci = co

    flat = flattened_size(config)
    declare("dense1_w", rng.normal(0.0, np.sqrt(2.0 / flat), (flat, config.dense_units)))
    declare("dense1_b", np.zeros(config.dense_units))
    declare("dense2_w", rng.normal(0.0, np.sqrt(2.0 / config.dense_units),
                                   (config.dense_units, config.n_classes)))
    declare("dense2_b", np.zeros(config.n_classes))
    return NetworkParams(tensors, running, tuple(order), tuple(running_order))


def count_params(config: NetworkConfig) -> tuple[int, dict[str, int]]:
    """Trainable parameter total and a per-layer breakdown."""
    params = init_params(config, np.random.default_rng(0))
    per_layer: dict[str, int] = {}
    for name in params.order:
        layer = name.split("_")[0]
        per_layer[layer] = per_layer.get(layer, 0) + params.tensors[name].size
    return sum(per_layer.values()), per_layer


# --- forward / backward ---

def _bn_forward(x, gamma, beta, running_mean, running_var, eps, momentum, train):
    if train:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))  # biased, matching the backward pass
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mean
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    else:
        mean, var = running_mean, running_var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[None, :, None, None]) * inv[None, :, None, None]
    y = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return y, (xhat, inv)


def _bn_backward(dy, xhat, inv, gamma):
    m = dy.shape[0] * dy.shape[2] * dy.shape[3]
    dbeta = dy.sum(axis=(0, 2, 3))
    dgamma = (dy * xhat).sum(axis=(0, 2, 3))
    scale = (gamma * inv)[None, :, None, None]
    dx = scale * (dy - (dbeta / m)[None, :, None, None]
                  - xhat * (dgamma / m)[None, :, None, None])
    return dx, dgamma, dbeta


def forward(params: NetworkParams, x: np.ndarray, config: NetworkConfig,
            train: bool = False, rng: np.random.Generator | None = None):
    """Run the network; returns (logits, cache) with cache=None when not training.

    ``x`` is (batch, time, frequency, channel). Dropout draws its mask from
    ``rng`` only when training with a nonzero rate.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or x.shape[1:] != config.input_shape:
        raise ShapeError(
            f"expected batch of shape (B, {config.input_shape}), got {x.shape}"
        )
    h = np.ascontiguousarray(x.transpose(0, 3, 1, 2))  # -> (B, C, T, F)

    t = params.tensors
    cache: dict = {"inputs": [], "bn": [], "relu": [], "pool_in": []} if train else None
    for i in range(1, len(config.conv_channels) + 1):
        if train:
            cache["inputs"].append(h)
        h = kernels.conv2d_forward(h, t[f"conv{i}_w"], t[f"conv{i}_b"])
        h, bn_cache = _bn_forward(
            h, t[f"bn{i}_gamma"], t[f"bn{i}_beta"],
            params.running[f"bn{i}_mean"], params.running[f"bn{i}_var"],
            config.bn_eps, config.bn_momentum, train,
        )
        mask = h > 0
        h = h * mask
        if train:
            cache["bn"].append(bn_cache)
            cache["relu"].append(mask)
        if (i - 1) in config.pool_after:
            if train:
                cache["pool_in"].append(h.shape)
            b, c, th, fh = h.shape
            h = kernels.avgpool2x2_forward(h.reshape(b * c, th, fh)).reshape(
                b, c, th // 2, fh // 2)
        elif train:
            cache["pool_in"].append(None)

    pooled: PooledOutput = pool_forward(h, config.pooling)
    flat = pooled.values.reshape(h.shape[0], -1)

    z1 = flat @ t["dense1_w"] + t["dense1_b"]
    a1 = np.maximum(z1, 0.0)
    if train and config.dropout > 0.0:
        if rng is None:
            raise ValueError("training with dropout needs a random generator")
        drop_mask = (rng.random(a1.shape) >= config.dropout) / (1.0 - config.dropout)
        a1d = a1 * drop_mask
    else:
        drop_mask = None
        a1d = a1
    logits = a1d @ t["dense2_w"] + t["dense2_b"]

    if train:
        cache.update(conv_out=h, pooled=pooled, flat=flat, z1=z1,
                     drop_mask=drop_mask, a1d=a1d)
    return logits, cache


def backward(params: NetworkParams, cache: dict, dlogits: np.ndarray,
             config: NetworkConfig) -> dict[str, np.ndarray]:
    """Gradients of the loss w.r.t. every trainable tensor."""
    t = params.tensors
    grads: dict[str, np.ndarray] = {}

    grads["dense2_w"] = cache["a1d"].T @ dlogits
    grads["dense2_b"] = dlogits.sum(axis=0)
    da1 = dlogits @ t["dense2_w"].T
    if cache["drop_mask"] is not None:
        da1 = da1 * cache["drop_mask"]
    dz1 = da1 * (cache["z1"] > 0)
    grads["dense1_w"] = cache["flat"].T @ dz1
    grads["dense1_b"] = dz1.sum(axis=0)
    dflat = dz1 @ t["dense1_w"].T

    conv_out = cache["conv_out"]
    dpooled = dflat.reshape(cache["pooled"].values.shape)
    dh = pool_backward(conv_out, cache["pooled"], dpooled, config.pooling)

    for i in range(len(config.conv_channels), 0, -1):
        if (i - 1) in config.pool_after:
            b, c, th, fh = cache["pool_in"][i - 1]
            dh = kernels.avgpool2x2_backward(
                dh.reshape(b * c, th // 2, fh // 2), th, fh).reshape(b, c, th, fh)
        dh = dh * cache["relu"][i - 1]
        xhat, inv = cache["bn"][i - 1]
        dh, dgamma, dbeta = _bn_backward(dh, xhat, inv, t[f"bn{i}_gamma"])
        grads[f"bn{i}_gamma"] = dgamma
        grads[f"bn{i}_beta"] = dbeta
        dh, dw, db = kernels.conv2d_backward(cache["inputs"][i - 1], t[f"conv{i}_w"], dh)
        grads[f"conv{i}_w"] = dw
        grads[f"conv{i}_b"] = db
    return grads


# --- loss, mixup, optimizer ---

def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean soft-target cross entropy and its gradient w.r.t. the logits.

    ``targets`` rows are probability vectors (one-hot or mixup blends);
    the gradient is (softmax - targets) / batch.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if logits.shape != targets.shape:
        raise ShapeError(f"logits {logits.shape} vs targets {targets.shape}")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    batch = logits.shape[0]
    loss = float(-(targets * log_probs).sum() / batch)
    dlogits = (np.exp(log_probs) - targets) / batch
    return loss, dlogits


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(f"labels out of range [0, {n_classes})")
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def mixup_batch(x: np.ndarray, y: np.ndarray, alpha: float,
                rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, float]:
    """Blend the batch with a shuffled copy of itself: one Beta(a, a) lambda.

    The permutation may map an example to itself; those rows pass through
    unchanged. ``alpha <= 0`` disables blending.
    """
    if alpha <= 0.0:
        return x, y, 1.0
    lam = float(rng.beta(alpha, alpha))
    perm = rng.permutation(x.shape[0])
    x_mix = lam * x + (1.0 - lam) * x[perm]
    y_mix = lam * y + (1.0 - lam) * y[perm]
    return x_mix, y_mix, lam


def sgd_momentum_step(params: NetworkParams, velocity: dict[str, np.ndarray],
                      grads: dict[str, np.ndarray], lr: float, momentum: float) -> None:
    """Classical momentum, in place: v <- m v + g; p <- p - lr v."""
    for name in params.order:
        v = velocity[name]
        v *= momentum
        v += grads[name]
        params.tensors[name] -= lr * v


def zero_velocity(params: NetworkParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(params.tensors[name]) for name in params.order}


def predict_logits(params: NetworkParams, x: np.ndarray, config: NetworkConfig,
                   batch_size: int = 64) -> np.ndarray:
    """Inference in slices so memory stays bounded."""
    chunks = []
    for lo in range(0, x.shape[0], batch_size):
        logits, _ = forward(params, x[lo:lo + batch_size], config, train=False)
        chunks.append(logits)
    return np.concatenate(chunks, axis=0)


# --- checkpoints: binary tensors + JSON sidecar ---

def _checkpoint_entries(params: NetworkParams, velocity: dict[str, np.ndarray]):
    for name in params.order:
        yield name, params.tensors[name]
    for name in params.running_order:
        yield f"running:{name}", params.running[name]
    for name in params.order:
        yield f"velocity:{name}", velocity[name]


def save_checkpoint(path: str | Path, params: NetworkParams,
                    velocity: dict[str, np.ndarray], config: NetworkConfig,
                    epoch: int = 0) -> None:
    """Tensors as float32 little-endian in declaration order, plus metadata."""
    digest = config.digest().encode("ascii")
    entries = list(_checkpoint_entries(params, velocity))
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(digest)))
        fh.write(digest)
        for _, tensor in entries:
            fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    meta = {
        "config": config.to_dict(),
        "config_digest": config.digest(),
        "epoch": epoch,
        "tensors": [{"name": n, "shape": list(t.shape)} for n, t in entries],
    }
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2) + "\n")


def load_checkpoint(path: str | Path):
    """Returns (params, velocity, config, epoch); tensors come back float64.

    Raises ValueError on a bad magic or when the stored digest does not
    match the stored config (a corrupted or mixed-up pair of files).
    """
    raw = Path(path).read_bytes()
    if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    offset = len(CHECKPOINT_MAGIC)
    (dlen,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    digest = raw[offset:offset + dlen].decode("ascii")
    offset += dlen

    meta = json.loads(Path(str(path) + ".json").read_text())
    config = NetworkConfig.from_dict(meta["config"])
    if config.digest() != digest:
        raise ValueError(f"{path}: config digest mismatch")

    params = init_params(config, np.random.default_rng(0))
    velocity = zero_velocity(params)
    for entry in meta["tensors"]:
        name, shape = entry["name"], tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        tensor = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
        offset += count * 4
        value = tensor.astype(np.float64).reshape(shape)
        if name.startswith("velocity:"):
            velocity[name.split(":", 1)[1]] = value
        elif name.startswith("running:"):
            params.running[name.split(":", 1)[1]] = value
        else:
            params.tensors[name] = value
    return params, velocity, config, int(meta["epoch"])
