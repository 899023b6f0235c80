"""Seeded UMAP: exact kNN, fuzzy union graph, spectral init, SGD layout.

The graph construction and layout follow the standard fuzzy simplicial set
recipe: per-point bandwidths are found by binary search so the smoothed
neighbor weights sum to log2(n_neighbors), the directed graph is
symmetrized by fuzzy union, and the embedding is optimized by per-edge SGD
with negative sampling.  Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.sparse
from scipy.spatial.distance import cdist

from .. import kernels
from ..embedding import VectorSet
from .pca import ProjectionError, _fix_signs


@dataclass(frozen=True)
class UmapConfig:
    target_dim: int = 20
    n_neighbors: int = 15
    min_dist: float = 0.1
    n_epochs: int = 200
    seed: int = 42

    def __post_init__(self):
        if self.n_neighbors < 2:
            raise ProjectionError("n_neighbors must be >= 2")
        if self.target_dim < 1:
            raise ProjectionError("target_dim must be >= 1")
        if self.min_dist < 0:
            raise ProjectionError("min_dist must be >= 0")
        if self.n_epochs < 1:
            raise ProjectionError("n_epochs must be >= 1")

    @property
    def fingerprint(self) -> str:
        return (f"umap:d{self.target_dim},nn{self.n_neighbors},"
                f"md{self.min_dist},ep{self.n_epochs},seed{self.seed}")


def exact_knn(mat: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices and distances of the k nearest neighbors, self excluded."""
    dists = cdist(mat, mat)
    order = np.argsort(dists, axis=1, kind="stable")
    idx = order[:, 1:k + 1]
    return idx, np.take_along_axis(dists, idx, axis=1)


def fit_curve_params(min_dist: float, spread: float = 1.0) -> tuple[float, float]:
    """a, b of the low-dimensional similarity curve 1/(1 + a*d^(2b))."""
    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2 * b))

    xv = np.linspace(0, spread * 3, 300)
    yv = np.zeros_like(xv)
    yv[xv < min_dist] = 1.0
    mask = xv >= min_dist
    yv[mask] = np.exp(-(xv[mask] - min_dist) / spread)
    (a, b), _ = scipy.optimize.curve_fit(curve, xv, yv)
    return float(a), float(b)


def fuzzy_graph(mat: np.ndarray, n_neighbors: int) -> scipy.sparse.coo_matrix:
    n = mat.shape[0]
    k = min(n_neighbors, n - 1)
    knn_idx, knn_dists = exact_knn(mat, k)
    sigmas, rhos = kernels.smooth_knn(
        np.ascontiguousarray(knn_dists, dtype=np.float64),
        float(np.log2(k)), 64, 1e-3)
    rows = np.repeat(np.arange(n), k)
    cols = knn_idx.ravel()
    d = knn_dists - rhos[:, None]
    vals = np.where(d <= 0.0, 1.0, np.exp(-np.maximum(d, 0.0) / sigmas[:, None]))
    graph = scipy.sparse.coo_matrix((vals.ravel(), (rows, cols)), shape=(n, n))
    graph.sum_duplicates()
    # Fuzzy union: P + P.T - P*P.T
    transpose = graph.transpose()
    prod = graph.multiply(transpose)
    graph = (graph + transpose - prod).tocoo()
    return graph


def _spectral_init(graph: scipy.sparse.coo_matrix, dim: int) -> np.ndarray:
    n = graph.shape[0]
    adj = graph.toarray()
    deg = adj.sum(axis=1)
    if np.any(deg <= 0):
        raise ProjectionError("isolated vertex")
    dinv = 1.0 / np.sqrt(deg)
    lap = np.eye(n) - (adj * dinv[:, None]) * dinv[None, :]
    eigvals, eigvecs = np.linalg.eigh(lap)
    order = np.argsort(eigvals)
    comp = eigvecs[:, order[1:dim + 1]]
    if comp.shape[1] < dim or not np.all(np.isfinite(comp)):
        raise ProjectionError("degenerate spectral initialization")
    return _fix_signs(comp)


def initialize_embedding(graph: scipy.sparse.coo_matrix, dim: int,
                         seed: int) -> np.ndarray:
    """Spectral layout when feasible, otherwise seeded uniform random."""
    n = graph.shape[0]
    rng = np.random.default_rng(seed)
    if n <= 4096:
        try:
            emb = _spectral_init(graph, dim)
            scale = np.abs(emb).max()
            if scale > 0:
                emb = emb * (10.0 / scale)
            emb = emb + rng.normal(scale=1e-4, size=emb.shape)
            return np.ascontiguousarray(emb, dtype=np.float64)
        except (ProjectionError, np.linalg.LinAlgError):
            pass
    return np.ascontiguousarray(
        rng.uniform(-10.0, 10.0, size=(n, dim)), dtype=np.float64)


def make_epochs_per_sample(weights: np.ndarray, n_epochs: int) -> np.ndarray:
    result = -1.0 * np.ones(weights.shape[0], dtype=np.float64)
    n_samples = n_epochs * (weights / weights.max())
    mask = n_samples > 0
    result[mask] = float(n_epochs) / n_samples[mask]
    return result


def umap_fit_transform(x: VectorSet, cfg: UmapConfig) -> VectorSet:
    mat = np.asarray(x.matrix, dtype=np.float64)
    n = mat.shape[0]
    if cfg.target_dim >= mat.shape[1]:
        raise ProjectionError(
            f"target_dim {cfg.target_dim} must be below input dim {mat.shape[1]}")
    if n <= cfg.target_dim + 1:
        raise ProjectionError(
            f"need more than target_dim+1={cfg.target_dim + 1} points, got {n}")
    if not np.all(np.isfinite(mat)):
        raise ProjectionError("input contains non-finite values")

    graph = fuzzy_graph(mat, cfg.n_neighbors)
    embedding = initialize_embedding(graph, cfg.target_dim, cfg.seed)

    graph = graph.tocsr()
    graph.eliminate_zeros()
    graph = graph.tocoo()
    weights = graph.data.astype(np.float64)
    # Edges too weak to be sampled even once get dropped from the schedule.
    if cfg.n_epochs > 10:
        low = weights < weights.max() / float(cfg.n_epochs)
        weights = weights[~low]
        head = graph.row[~low].astype(np.int64)
        tail = graph.col[~low].astype(np.int64)
    else:
        head = graph.row.astype(np.int64)
        tail = graph.col.astype(np.int64)
    epochs_per_sample = make_epochs_per_sample(weights, cfg.n_epochs)
    a, b = fit_curve_params(cfg.min_dist)
    state = kernels.make_rng_state(cfg.seed)
    kernels.umap_optimize(embedding, head, tail, epochs_per_sample, a, b,
                          1.0, 1.0, 5, cfg.n_epochs, state)
    fp = f"{x.provider_fingerprint}|{cfg.fingerprint}"
    return VectorSet(x.ids, embedding, provider_fingerprint=fp)
