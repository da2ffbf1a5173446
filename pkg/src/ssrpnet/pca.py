"""Standardization and principal component analysis.

The eigensolver is a cyclic Jacobi sweep (compiled when available). For
tall feature vectors with few samples (n < d, the usual case for flattened
spectrograms) the fit switches to the n x n Gram matrix: X Xt / (n-1) has
the same nonzero spectrum as the covariance, and its eigenvectors map to
feature space via w = Xt u / ||Xt u||.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backend import kernels
from .errors import (
    ContractViolation,
    DegenerateVarianceError,
    InsufficientSamplesError,
    ShapeError,
)

PCAM_MAGIC = b"PCAM"
STD_GUARD = 1e-8


@dataclass(frozen=True)
class Standardizer:
    """Per-feature mean and standard deviation fitted on training data."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, data: np.ndarray) -> np.ndarray:
        data = np.asarray(data, dtype=np.float64)
        if data.shape[-1] != self.mean.shape[0]:
            raise ShapeError(
                f"data has {data.shape[-1]} features, standardizer has {self.mean.shape[0]}"
            )
        return (data - self.mean) / self.std


@dataclass(frozen=True)
class PcaModel:
    """Top-k eigenpairs of the training covariance.

    ``projection`` holds orthonormal eigenvector columns (d x k),
    ``eigenvalues`` the matching variances in descending order, and
    ``total_variance`` the covariance trace, so
    ``explained_variance_ratio = eigenvalues / total_variance``.
    """

    projection: np.ndarray
    eigenvalues: np.ndarray
    explained_variance_ratio: np.ndarray
    total_variance: float

    @property
    def n_features(self) -> int:
        return self.projection.shape[0]

    @property
    def n_components(self) -> int:
        return self.projection.shape[1]


def fit_standardizer(data: np.ndarray) -> Standardizer:
    """Column means and (n-1)-denominator stds, clamped away from zero."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ShapeError("data must be an n x d matrix")
    if data.shape[0] < 2:
        raise InsufficientSamplesError("standardization needs at least 2 samples")
    mean = data.mean(axis=0)
    std = np.maximum(data.std(axis=0, ddof=1), STD_GUARD)
    return Standardizer(mean, std)


def covariance(data: np.ndarray, centered: bool = False) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ShapeError("data must be an n x d matrix")
    n = data.shape[0]
    if n < 2:
        raise InsufficientSamplesError("covariance needs at least 2 samples")
    if not centered:
        data = data - data.mean(axis=0)
    sigma = data.T @ data / (n - 1)
    return (sigma + sigma.T) / 2.0  # force exact symmetry


def symmetric_eigendecomposition(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvector columns.

    Eigenvector signs are fixed so each column's largest-magnitude entry is
    positive, keeping outputs reproducible.
    """
    sigma = np.ascontiguousarray(sigma, dtype=np.float64)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ShapeError("sigma must be a square matrix")
    asym = np.max(np.abs(sigma - sigma.T)) if sigma.size else 0.0
    if asym > 1e-8 * max(1.0, np.max(np.abs(sigma))):
        raise ContractViolation(f"matrix is not symmetric (max asymmetry {asym:.3e})")

    values, vectors, _ = kernels.jacobi_eigh(sigma)
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    return values, _fix_signs(vectors)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    vectors = vectors.copy()
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            vectors[:, j] = -col
    return vectors


def explained_variance_ratios(eigenvalues: np.ndarray) -> np.ndarray:
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    total = eigenvalues.sum()
    if total <= 0:
        raise DegenerateVarianceError("eigenvalue spectrum has no variance")
    return eigenvalues / total


def select_k_by_variance(eigenvalues: np.ndarray, threshold: float) -> int:
    """Smallest k whose cumulative variance ratio reaches ``threshold``."""
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    if np.any(eigenvalues < -1e-10) or np.any(np.diff(eigenvalues) > 1e-12):
        raise ValueError("eigenvalues must be non-negative and descending")
    cumulative = np.cumsum(np.maximum(eigenvalues, 0.0))
    if cumulative[-1] <= 0:
        raise DegenerateVarianceError("all eigenvalues are zero")
    ratios = cumulative / cumulative[-1]
    return int(np.searchsorted(ratios, threshold, side="left")) + 1


def fit_pca(data: np.ndarray, variance_threshold: float | None = None,
            n_components: int | None = None, method: str = "auto") -> PcaModel:
    """Fit PCA on (typically standardized) rows of ``data``.

    Exactly one of ``variance_threshold`` / ``n_components`` picks k;
    neither keeps every component with nonzero variance. ``method`` is
    ``"direct"`` (d x d covariance), ``"gram"`` (n x n, requires n <= d+1),
    or ``"auto"``.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ShapeError("data must be an n x d matrix")
    n, d = data.shape
    if n < 2:
        raise InsufficientSamplesError("PCA needs at least 2 samples")
    if variance_threshold is not None and n_components is not None:
        raise ValueError("pass either variance_threshold or n_components, not both")
    if method not in ("auto", "direct", "gram"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        method = "gram" if n < d else "direct"

    centered = data - data.mean(axis=0)
    if method == "direct":
        sigma = covariance(centered, centered=True)
        values, vectors = symmetric_eigendecomposition(sigma)
        total = float(np.trace(sigma))
    else:
        gram = centered @ centered.T / (n - 1)
        gram = (gram + gram.T) / 2.0
        gvalues, gvectors = symmetric_eigendecomposition(gram)
        total = float(np.trace(gram))
        # map Gram eigenvectors u to feature space: w = Xt u / ||Xt u||
        keep = gvalues > max(gvalues[0], 0.0) * 1e-12 if gvalues.size else []
        values = gvalues[keep]
        w = centered.T @ gvectors[:, keep]
        norms = np.linalg.norm(w, axis=0)
        vectors = _fix_signs(w / norms)

    values = np.maximum(values, 0.0)
    rank = int(np.sum(values > max(values[0], 0.0) * 1e-12)) if values.size else 0
    if rank == 0:
        raise DegenerateVarianceError("data has no variance")

    if variance_threshold is not None:
        k = select_k_by_variance(values, variance_threshold)
        k = min(k, rank)
    elif n_components is not None:
        if n_components < 1:
            raise ValueError("n_components must be >= 1")
        k = min(n_components, rank)
    else:
        k = rank

    ratios = values / total
    return PcaModel(
        projection=np.ascontiguousarray(vectors[:, :k]),
        eigenvalues=values[:k].copy(),
        explained_variance_ratio=ratios[:k].copy(),
        total_variance=total,
    )


def project(model: PcaModel, data: np.ndarray) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.shape[-1] != model.n_features:
        raise ShapeError(
            f"data has {data.shape[-1]} features, model expects {model.n_features}"
        )
    return data @ model.projection


def reconstruct(model: PcaModel, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != model.n_components:
        raise ShapeError(
            f"z has {z.shape[-1]} components, model holds {model.n_components}"
        )
    return z @ model.projection.T


def reshape_for_cnn(z: np.ndarray) -> np.ndarray:
    """Lay a k-vector out as a (time=k, frequency=1, channel=1) map."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.size == 0:
        raise ShapeError("z must be a non-empty vector")
    return z.reshape(z.size, 1, 1)


def emit_variance_curve(eigenvalues: np.ndarray, path: str | Path) -> None:
    """CSV of (component_index, cumulative_explained_variance), ending at 1.0."""
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    if np.any(eigenvalues < 0):
        raise ValueError("eigenvalues must be non-negative")
    cumulative = np.cumsum(eigenvalues)
    if cumulative.size == 0 or cumulative[-1] <= 0:
        raise DegenerateVarianceError("no variance to plot")
    ratios = cumulative / cumulative[-1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component_index", "cumulative_explained_variance"])
        for i, r in enumerate(ratios, start=1):
            writer.writerow([i, repr(float(r))])


# --- serialization: binary model + JSON summary ---

def save_pca(path: str | Path, standardizer: Standardizer, model: PcaModel,
             threshold: float | None = None) -> None:
    d, k = model.projection.shape
    with open(path, "wb") as fh:
        fh.write(PCAM_MAGIC)
        fh.write(struct.pack("<II", d, k))
        for arr in (standardizer.mean, standardizer.std,
                    model.projection, model.eigenvalues):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        fh.write(struct.pack("<d", model.total_variance))
    summary = {
        "n_features": d,
        "n_components": k,
        "variance_threshold": threshold,
        "explained_variance_ratio": [float(r) for r in model.explained_variance_ratio],
        "retained_variance": float(model.explained_variance_ratio.sum()),
    }
    Path(str(path) + ".json").write_text(json.dumps(summary, indent=2) + "\n")


def load_pca(path: str | Path) -> tuple[Standardizer, PcaModel]:
    data = Path(path).read_bytes()
    if data[:4] != PCAM_MAGIC:
        raise ValueError(f"{path}: not a PCAM file")
    d, k = struct.unpack_from("<II", data, 4)
    offset = 12
    def take(count):
        nonlocal offset
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        offset += count * 8
        return arr.astype(np.float64)
    mean = take(d)
    std = take(d)
    projection = take(d * k).reshape(d, k)
    eigenvalues = take(k)
    (total,) = struct.unpack_from("<d", data, offset)
    model = PcaModel(projection, eigenvalues, eigenvalues / total, float(total))
    return Standardizer(mean, std), model
