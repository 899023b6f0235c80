"""PCA with a fixed sign convention and descending explained variance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..embedding import VectorSet


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray               # (d,)
    basis: np.ndarray              # (d, c), orthonormal columns
    explained_variance: np.ndarray  # (c,), non-increasing

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.basis

    def inverse_transform(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=np.float64) @ self.basis.T + self.mean


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each column made positive: removes the
    # eigenvector sign ambiguity between runs.
    out = basis.copy()
    for c in range(out.shape[1]):
        j = int(np.argmax(np.abs(out[:, c])))
        if out[j, c] < 0:
            out[:, c] = -out[:, c]
    return out


def pca_fit_transform(x: VectorSet, n_components: int) -> tuple[PcaModel, VectorSet]:
    """Fit PCA on the rows of ``x`` and project them.

    Covariance eigendecomposition when d <= 1024, thin SVD of the centered
    matrix otherwise.  Components are ordered by explained variance
    (sample covariance, ddof=1) descending.
    """
    mat = np.asarray(x.matrix, dtype=np.float64)
    n, d = mat.shape
    if n < 2:
        raise ProjectionError("PCA needs at least 2 points")
    limit = min(n - 1, d)
    if not 1 <= n_components <= limit:
        raise ProjectionError(
            f"n_components={n_components} outside [1, {limit}] for "
            f"{n} points of dimension {d}")
    if not np.all(np.isfinite(mat)):
        raise ProjectionError("input contains non-finite values")
    mean = mat.mean(axis=0)
    centered = mat - mean
    if d <= 1024:
        cov = (centered.T @ centered) / (n - 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1][:n_components]
        variance = eigvals[order]
        basis = eigvecs[:, order]
    else:
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
        variance = (s ** 2) / (n - 1)
        variance = variance[:n_components]
        basis = vt[:n_components].T
    basis = _fix_signs(basis)
    variance = np.maximum(variance, 0.0)
    model = PcaModel(mean=mean, basis=basis, explained_variance=variance)
    projected = centered @ basis
    fp = f"{x.provider_fingerprint}|pca{n_components}"
    return model, VectorSet(x.ids, projected, provider_fingerprint=fp)
