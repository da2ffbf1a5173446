"""Pure-NumPy kernels: the fallback backend.

Same call surface as the compiled module ``ssrpnet._kernels``. Pooled sums
accumulate selected activations in ascending time order so the degenerate
cases (window = T, top-k = T) reduce to the plain temporal mean bit-for-bit.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NAME = "numpy"


# --- convolution (3x3, stride 1, zero same-padding, NCHW) ---

def _im2col(x: np.ndarray) -> np.ndarray:
    b, c, t, f = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((b, c, 9, t, f), dtype=x.dtype)
    for k in range(9):
        dt, df = divmod(k, 3)
        cols[:, :, k] = xp[:, :, dt:dt + t, df:df + f]
    return cols.reshape(b, c * 9, t * f)


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    bsz, _, t, f = x.shape
    co = w.shape[0]
    cols = _im2col(x)
    y = w.reshape(co, -1) @ cols  # (B, Co, T*F) via broadcasting
    return y.reshape(bsz, co, t, f) + b[None, :, None, None]


def conv2d_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray):
    bsz, ci, t, f = x.shape
    co = w.shape[0]
    cols = _im2col(x)
    dy2 = dy.reshape(bsz, co, t * f)
    dw = np.einsum("bop,bcp->oc", dy2, cols).reshape(co, ci, 3, 3)
    db = dy.sum(axis=(0, 2, 3))
    dcols = w.reshape(co, -1).T @ dy2  # (B, Ci*9, T*F)
    dcols = dcols.reshape(bsz, ci, 9, t, f)
    dxp = np.zeros((bsz, ci, t + 2, f + 2), dtype=x.dtype)
    for k in range(9):
        dt, df = divmod(k, 3)
        dxp[:, :, dt:dt + t, df:df + f] += dcols[:, :, k]
    # contiguous like every other kernel output; downstream kernels rely on it
    return np.ascontiguousarray(dxp[:, :, 1:1 + t, 1:1 + f]), dw, db


# --- 2x2 average pooling (non-overlapping, trailing odd row/col dropped) ---

def avgpool2x2_forward(x: np.ndarray) -> np.ndarray:
    n, t, f = x.shape
    th, fh = t // 2, f // 2
    v = x[:, : th * 2, : fh * 2].reshape(n, th, 2, fh, 2)
    return (v[:, :, 0, :, 0] + v[:, :, 0, :, 1] + v[:, :, 1, :, 0] + v[:, :, 1, :, 1]) / 4.0


def avgpool2x2_backward(dy: np.ndarray, t: int, f: int) -> np.ndarray:
    n, th, fh = dy.shape
    dx = np.zeros((n, t, f), dtype=dy.dtype)
    spread = np.repeat(np.repeat(dy, 2, axis=1), 2, axis=2) / 4.0
    dx[:, : th * 2, : fh * 2] = spread
    return dx


# --- global pooling over the time axis ---

def gap_forward(x: np.ndarray) -> np.ndarray:
    return x.sum(axis=1) / x.shape[1]


def gap_backward(dy: np.ndarray, t: int) -> np.ndarray:
    return np.repeat(dy[:, None, :] / t, t, axis=1)


def ssrp_b_forward(x: np.ndarray, window: int):
    n, t, f = x.shape
    wins = sliding_window_view(x, window, axis=1)  # (N, T-W+1, F, W)
    means = wins.sum(axis=-1) / window
    starts = means.argmax(axis=1)  # first max: smallest start wins ties
    vals = np.take_along_axis(means, starts[:, None, :], axis=1)[:, 0, :]
    return vals, starts.astype(np.int64)


def ssrp_b_backward(dy: np.ndarray, starts: np.ndarray, window: int, t: int) -> np.ndarray:
    n, f = dy.shape
    dx = np.zeros((n, t, f), dtype=dy.dtype)
    offsets = starts[:, None, :] + np.arange(window)[None, :, None]  # (N, W, F)
    np.put_along_axis(dx, offsets, np.broadcast_to(dy[:, None, :] / window, offsets.shape), axis=1)
    return dx


def ssrp_t_forward(x: np.ndarray, top_k: int):
    n, t, f = x.shape
    order = np.argsort(-x, axis=1, kind="stable")  # ties keep smaller time first
    idx = np.sort(order[:, :top_k, :], axis=1)
    gathered = np.take_along_axis(x, idx, axis=1)
    vals = gathered.sum(axis=1) / top_k
    return vals, idx.astype(np.int64)


def ssrp_t_backward(dy: np.ndarray, idx: np.ndarray, t: int) -> np.ndarray:
    n, k, f = idx.shape
    dx = np.zeros((n, t, f), dtype=dy.dtype)
    np.put_along_axis(dx, idx, np.broadcast_to(dy[:, None, :] / k, idx.shape), axis=1)
    return dx


# --- cyclic Jacobi eigensolver for symmetric matrices ---

def jacobi_eigh(a: np.ndarray, tol_scale: float = 1e-10, max_sweeps: int = 100):
    """Eigenvalues (unsorted) and orthonormal eigenvector columns.

    Slow above a few hundred rows; the compiled backend handles large
    matrices. Convergence: off-diagonal Frobenius norm below
    ``tol_scale * ||A||_F``.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    d = a.shape[0]
    v = np.eye(d)
    norm = np.linalg.norm(a)
    if norm == 0.0 or d == 1:
        return np.diag(a).copy(), v, 0

    tol = tol_scale * norm
    # rotations on pivots this small only churn roundoff
    skip = np.finfo(np.float64).tiny / np.finfo(np.float64).eps
    sweeps = 0
    while sweeps < max_sweeps:
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= tol:
            break
        sweeps += 1
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                sign = 1.0 if theta >= 0.0 else -1.0
                tan = sign / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(tan * tan + 1.0)
                s = tan * c

                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = 0.0
                a[q, p] = 0.0

                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v, sweeps
