"""Cluster validity metrics over Euclidean distances, noise excluded."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .hdbscan import NOISE, ClusteringError


@dataclass(frozen=True)
class ValidityReport:
    silhouette: float
    davies_bouldin: float
    n_points_scored: int


def _scored_subset(points: np.ndarray, labels: np.ndarray):
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    keep = labels != NOISE
    points, labels = points[keep], labels[keep]
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ClusteringError("validity metrics need at least 2 clusters")
    return points, labels, uniq


def silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean of (b - a) / max(a, b); singleton-cluster points score 0."""
    points, labels, uniq = _scored_subset(points, labels)
    dists = cdist(points, points)
    scores = np.zeros(len(points))
    masks = {c: labels == c for c in uniq}
    sizes = {c: int(masks[c].sum()) for c in uniq}
    for i in range(len(points)):
        own = labels[i]
        if sizes[own] == 1:
            continue  # singleton convention: 0
        a = dists[i][masks[own]].sum() / (sizes[own] - 1)
        b = min(dists[i][masks[c]].mean() for c in uniq if c != own)
        scores[i] = (b - a) / max(a, b)
    return float(scores.mean())


def davies_bouldin(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean over clusters of the worst (S_i + S_j) / M_ij ratio."""
    points, labels, uniq = _scored_subset(points, labels)
    centroids = np.vstack([points[labels == c].mean(axis=0) for c in uniq])
    scatter = np.array([
        np.linalg.norm(points[labels == c] - centroids[k], axis=1).mean()
        for k, c in enumerate(uniq)
    ])
    sep = cdist(centroids, centroids)
    k = uniq.size
    ratios = np.zeros(k)
    for i in range(k):
        worst = 0.0
        for j in range(k):
            if i == j:
                continue
            if sep[i, j] == 0.0:
                raise ClusteringError(
                    f"coincident centroids for clusters {uniq[i]} and {uniq[j]}")
            worst = max(worst, (scatter[i] + scatter[j]) / sep[i, j])
        ratios[i] = worst
    return float(ratios.mean())


def validity_report(points: np.ndarray, labels: np.ndarray) -> ValidityReport:
    scored = int(np.sum(np.asarray(labels) != NOISE))
    return ValidityReport(silhouette=silhouette(points, labels),
                          davies_bouldin=davies_bouldin(points, labels),
                          n_points_scored=scored)
