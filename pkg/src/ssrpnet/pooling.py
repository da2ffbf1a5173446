"""Global pooling operators over the time axis of feature maps.

A feature map is an array whose last two axes are (time, frequency); any
leading axes (channels, batch x channels) are carried through. The three
global operators collapse time:

* ``gap_forward``  -- plain temporal mean.
* ``ssrp_b_forward`` -- the maximum over all dense length-W window means,
  per (channel, frequency); the selected window start is kept for backward.
* ``ssrp_t_forward`` -- the mean of the K largest activations per
  (channel, frequency); the K selected time indices are kept for backward.

Ties select the smallest time index, making forward and backward
deterministic. Backward passes are exact subgradients: ``grad/W`` across
the chosen window, ``grad/K`` at the chosen indices, ``grad/T`` everywhere
for GAP.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import ShapeError

POOLING_KINDS = ("gap", "ssrp_b", "ssrp_t", "max", "avg")


@dataclass(frozen=True)
class PoolingSpec:
    """Which global pooling the network uses, plus its one hyperparameter."""

    kind: str = "gap"
    window: int | None = None  # ssrp_b
    top_k: int | None = None   # ssrp_t

    def __post_init__(self):
        if self.kind not in POOLING_KINDS:
            raise ValueError(f"kind must be one of {POOLING_KINDS}, got {self.kind!r}")
        if self.kind == "ssrp_b" and (self.window is None or self.window < 1):
            raise ValueError("ssrp_b needs window >= 1")
        if self.kind == "ssrp_t" and (self.top_k is None or self.top_k < 1):
            raise ValueError("ssrp_t needs top_k >= 1")

    def label(self) -> str:
        if self.kind == "ssrp_b":
            return f"ssrp_b(W={self.window})"
        if self.kind == "ssrp_t":
            return f"ssrp_t(K={self.top_k})"
        return self.kind


@dataclass(frozen=True)
class PooledOutput:
    """Pooled values plus the selection the backward pass needs."""

    values: np.ndarray            # (..., F)
    starts: np.ndarray | None = None   # ssrp_b: selected window start per (..., F)
    indices: np.ndarray | None = None  # ssrp_t: (..., K, F) ascending time indices


def _as_3d(x: np.ndarray):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise ShapeError("feature map needs at least (time, frequency) axes")
    lead = x.shape[:-2]
    t, f = x.shape[-2], x.shape[-1]
    if t < 1 or f < 1:
        raise ShapeError("time and frequency axes must be non-empty")
    n = int(np.prod(lead)) if lead else 1
    return x.reshape(n, t, f), lead, t, f


def ssrp_b_forward(x: np.ndarray, window: int) -> PooledOutput:
    x3, lead, t, f = _as_3d(x)
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if window > t:
        raise ValueError(f"window {window} exceeds the {t} available time steps")
    vals, starts = kernels.ssrp_b_forward(x3, window)
    return PooledOutput(vals.reshape(*lead, f), starts=starts.reshape(*lead, f))


def ssrp_b_backward(x: np.ndarray, out: PooledOutput, grad_out: np.ndarray,
                    window: int) -> np.ndarray:
    x3, lead, t, f = _as_3d(x)
    if out.starts is None:
        raise ShapeError("PooledOutput carries no window starts; not an ssrp_b output")
    grad = np.ascontiguousarray(grad_out, dtype=np.float64)
    if grad.shape != (*lead, f):
        raise ShapeError(f"grad_out shape {grad.shape} != pooled shape {(*lead, f)}")
    starts = np.ascontiguousarray(out.starts, dtype=np.int64).reshape(-1, f)
    dx = kernels.ssrp_b_backward(grad.reshape(-1, f), starts, window, t)
    return dx.reshape(x.shape)


def ssrp_t_forward(x: np.ndarray, top_k: int) -> PooledOutput:
    x3, lead, t, f = _as_3d(x)
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    if top_k > t:
        raise ValueError(f"top_k {top_k} exceeds the {t} available time steps")
    vals, idx = kernels.ssrp_t_forward(x3, top_k)
    return PooledOutput(vals.reshape(*lead, f), indices=idx.reshape(*lead, top_k, f))


def ssrp_t_backward(x: np.ndarray, out: PooledOutput, grad_out: np.ndarray,
                    top_k: int) -> np.ndarray:
    x3, lead, t, f = _as_3d(x)
    if out.indices is None:
        raise ShapeError("PooledOutput carries no indices; not an ssrp_t output")
    grad = np.ascontiguousarray(grad_out, dtype=np.float64)
    if grad.shape != (*lead, f):
        raise ShapeError(f"grad_out shape {grad.shape} != pooled shape {(*lead, f)}")
    idx = np.ascontiguousarray(out.indices, dtype=np.int64).reshape(-1, top_k, f)
    dx = kernels.ssrp_t_backward(grad.reshape(-1, f), idx, t)
    return dx.reshape(x.shape)


def gap_forward(x: np.ndarray) -> np.ndarray:
    x3, lead, t, f = _as_3d(x)
    return kernels.gap_forward(x3).reshape(*lead, f)


def gap_backward(x_shape: tuple, grad_out: np.ndarray) -> np.ndarray:
    t, f = x_shape[-2], x_shape[-1]
    grad = np.ascontiguousarray(grad_out, dtype=np.float64)
    if grad.shape != (*x_shape[:-2], f):
        raise ShapeError(f"grad_out shape {grad.shape} incompatible with map {x_shape}")
    return kernels.gap_backward(grad.reshape(-1, f), t).reshape(x_shape)


def max_forward(x: np.ndarray) -> PooledOutput:
    """Temporal max; identical to ssrp_t with K=1."""
    return ssrp_t_forward(x, 1)


def avg_pool_2x2(x: np.ndarray) -> np.ndarray:
    """Non-overlapping 2x2 means over (time, frequency); odd trailing slices drop."""
    x3, lead, t, f = _as_3d(x)
    if t < 2 or f < 2:
        raise ShapeError(f"2x2 pooling needs T >= 2 and F >= 2, got ({t}, {f})")
    return kernels.avgpool2x2_forward(x3).reshape(*lead, t // 2, f // 2)


def avg_pool_2x2_backward(x_shape: tuple, grad_out: np.ndarray) -> np.ndarray:
    t, f = x_shape[-2], x_shape[-1]
    grad = np.ascontiguousarray(grad_out, dtype=np.float64)
    if grad.shape != (*x_shape[:-2], t // 2, f // 2):
        raise ShapeError(f"grad_out shape {grad.shape} incompatible with map {x_shape}")
    dx = kernels.avgpool2x2_backward(grad.reshape(-1, t // 2, f // 2), t, f)
    return dx.reshape(x_shape)


def pool_forward(x: np.ndarray, spec: PoolingSpec) -> PooledOutput:
    """Dispatch on the configured global pooling kind."""
    if spec.kind == "ssrp_b":
        return ssrp_b_forward(x, spec.window)
    if spec.kind == "ssrp_t":
        return ssrp_t_forward(x, spec.top_k)
    if spec.kind == "max":
        return max_forward(x)
    return PooledOutput(gap_forward(x))  # gap and avg


def pool_backward(x: np.ndarray, out: PooledOutput, grad_out: np.ndarray,
                  spec: PoolingSpec) -> np.ndarray:
    if spec.kind == "ssrp_b":
        return ssrp_b_backward(x, out, grad_out, spec.window)
    if spec.kind == "ssrp_t":
        return ssrp_t_backward(x, out, grad_out, spec.top_k)
    if spec.kind == "max":
        return ssrp_t_backward(x, out, grad_out, 1)
    return gap_backward(x.shape, grad_out)
