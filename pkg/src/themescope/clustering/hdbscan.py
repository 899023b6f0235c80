"""Density-based clustering over mutual reachability with EOM extraction.

Pipeline: core distances -> mutual reachability MST (kernel) -> single
linkage hierarchy -> condensed tree at min_cluster_size -> excess-of-mass
cluster selection -> labels and membership probabilities.  NOISE is -1.
Membership probability of a point is lambda_point / lambda_max of its
cluster with lambda = 1 / death distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .. import kernels
from ..embedding import VectorSet

NOISE = -1


class ClusteringError(ValueError):
    pass


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray         # (n,) int64, NOISE = -1
    probabilities: np.ndarray  # (n,) float64 in [0, 1]
    n_clusters: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        probs = np.asarray(self.probabilities, dtype=np.float64)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "probabilities", probs)
        present = set(labels.tolist()) - {NOISE}
        if present != set(range(self.n_clusters)):
            raise ClusteringError(
                f"labels must cover 0..{self.n_clusters - 1}, got {sorted(present)}")
        if np.any(probs[labels == NOISE] != 0.0):
            raise ClusteringError("noise points must have probability 0")
        if np.any((probs < 0) | (probs > 1)):
            raise ClusteringError("probabilities outside [0, 1]")

    def members(self, label: int) -> np.ndarray:
        return np.where(self.labels == label)[0]


def core_distances(mat: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance to the min_samples-th nearest neighbor (self excluded)."""
    dists = cdist(mat, mat)
    k = min(min_samples, mat.shape[0] - 1)
    part = np.partition(dists, k, axis=1)
    return np.ascontiguousarray(part[:, k], dtype=np.float64)


def _single_linkage(edge_a, edge_b, edge_w, n):
    """Union edges in ascending weight order into a dendrogram.

    Returns (n-1, 4) rows [left, right, weight, size] with internal node
    ids n..2n-2 in creation order, scipy linkage style.
    """
    order = np.argsort(edge_w, kind="stable")
    parent = np.arange(2 * n - 1, dtype=np.int64)
    size = np.ones(2 * n - 1, dtype=np.int64)
    merges = np.zeros((n - 1, 4), dtype=np.float64)

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    nxt = n
    for row, e in enumerate(order):
        ra, rb = find(edge_a[e]), find(edge_b[e])
        merges[row] = (ra, rb, edge_w[e], size[ra] + size[rb])
        parent[ra] = parent[rb] = nxt
        size[nxt] = size[ra] + size[rb]
        nxt += 1
    return merges


def _condense_tree(merges: np.ndarray, n: int, min_cluster_size: int):
    """Prune the dendrogram: sub-min_cluster_size splits fall out as points.

    Returns parallel arrays (parents, children, lambdas, sizes) where
    children < n are points and children >= n are condensed clusters.
    """
    root = 2 * n - 2
    relabel = {root: n}
    next_label = n + 1
    parents, children, lambdas, sizes = [], [], [], []

    def node_points(node):
        stack, pts = [node], []
        while stack:
            cur = stack.pop()
            if cur < n:
                pts.append(cur)
            else:
                row = merges[cur - n]
                stack.append(int(row[0]))
                stack.append(int(row[1]))
        return pts

    def node_size(node):
        return 1 if node < n else int(merges[node - n][3])

    stack = [root]
    while stack:
        node = stack.pop()
        cid = relabel[node]
        left, right, dist, _ = merges[node - n]
        left, right = int(left), int(right)
        lam = 1.0 / dist if dist > 0.0 else np.inf
        lsize, rsize = node_size(left), node_size(right)
        big = [c for c, s in ((left, lsize), (right, rsize))
               if s >= min_cluster_size]
        small = [c for c, s in ((left, lsize), (right, rsize))
                 if s < min_cluster_size]
        if len(big) == 2:
            for child in (left, right):
                relabel[child] = next_label
                parents.append(cid)
                children.append(next_label)
                lambdas.append(lam)
                sizes.append(node_size(child))
                next_label += 1
                stack.append(child)
        else:
            for child in big:  # cluster continues through the large child
                relabel[child] = cid
                stack.append(child)
            for child in small:
                for p in node_points(child):
                    parents.append(cid)
                    children.append(p)
                    lambdas.append(lam)
                    sizes.append(1)
    return (np.asarray(parents, dtype=np.int64),
            np.asarray(children, dtype=np.int64),
            np.asarray(lambdas, dtype=np.float64),
            np.asarray(sizes, dtype=np.int64))


def _stability(parents, children, lambdas, sizes, n):
    births = {int(c): lam for c, lam in zip(children, lambdas) if c >= n}
    births[n] = 0.0
    stab = {c: 0.0 for c in births}
    for par, lam, size in zip(parents, lambdas, sizes):
        stab[int(par)] += (lam - births[int(par)]) * int(size)
    return stab


def _select_eom(parents, children, stability, n):
    cluster_children: dict[int, list[int]] = {c: [] for c in stability}
    for par, ch in zip(parents, children):
        if ch >= n:
            cluster_children[int(par)].append(int(ch))
    is_cluster = {c: True for c in stability}
    stab = dict(stability)
    for node in sorted(stability, reverse=True):
        if node == n:  # the root is never selected
            continue
        child_stab = sum(stab[c] for c in cluster_children[node])
        if child_stab > stab[node]:
            is_cluster[node] = False
            stab[node] = child_stab
        else:
            stack = list(cluster_children[node])
            while stack:
                desc = stack.pop()
                is_cluster[desc] = False
                stack.extend(cluster_children[desc])
    return sorted(c for c, keep in is_cluster.items() if keep and c != n)


def hdbscan_cluster(y: VectorSet, min_cluster_size: int = 20,
                    min_samples: int = 5) -> ClusterAssignment:
    """Cluster the rows of ``y``; deterministic given input order."""
    if min_cluster_size < 2:
        raise ClusteringError("min_cluster_size must be >= 2")
    if min_samples < 1:
        raise ClusteringError("min_samples must be >= 1")
    mat = np.ascontiguousarray(y.matrix, dtype=np.float64)
    n = mat.shape[0]
    if not np.all(np.isfinite(mat)):
        raise ClusteringError("input contains non-finite coordinates")
    if n < min_cluster_size or n < 2:
        return ClusterAssignment(np.full(n, NOISE, dtype=np.int64),
                                 np.zeros(n), 0)

    cores = core_distances(mat, min_samples)
    edge_a, edge_b, edge_w = kernels.prim_mst_mutual_reachability(mat, cores)
    merges = _single_linkage(edge_a, edge_b, edge_w, n)
    parents, children, lambdas, sizes = _condense_tree(
        merges, n, min_cluster_size)
    # Zero-distance merges give infinite lambda; cap them so stability and
    # probability arithmetic stay finite.
    finite = lambdas[np.isfinite(lambdas)]
    cap = float(finite.max()) * 2.0 if finite.size else 1.0
    lambdas = np.where(np.isfinite(lambdas), lambdas, cap)
    stab = _stability(parents, children, lambdas, sizes, n)
    selected = _select_eom(parents, children, stab, n)

    labels = np.full(n, NOISE, dtype=np.int64)
    probs = np.zeros(n, dtype=np.float64)
    if not selected:
        return ClusterAssignment(labels, probs, 0)

    label_of = {c: i for i, c in enumerate(selected)}
    parent_of = {int(c): int(p) for c, p in zip(children, parents) if c >= n}
    # Nearest selected ancestor (or self) of each condensed cluster.
    owner: dict[int, int] = {}
    for c in sorted(set(parent_of) | {n}):
        cur = c
        owner[c] = -1
        while cur is not None:
            if cur in label_of:
                owner[c] = label_of[cur]
                break
            cur = parent_of.get(cur)

    point_lambda = np.zeros(n, dtype=np.float64)
    for par, ch, lam in zip(parents, children, lambdas):
        if ch < n:
            lab = owner[int(par)]
            if lab >= 0:
                labels[ch] = lab
                point_lambda[ch] = lam

    for lab in range(len(selected)):
        idx = np.where(labels == lab)[0]
        lams = point_lambda[idx]
        lam_max = lams.max() if idx.size else 0.0
        if lam_max <= 0.0:
            probs[idx] = 1.0
        else:
            probs[idx] = lams / lam_max
    return ClusterAssignment(labels, probs, len(selected))


def select_representatives(assignment: ClusterAssignment, corpus,
                           k: int = 5) -> dict[int, list]:
    """Top-k members per cluster by (probability desc, id asc)."""
    if k < 1:
        raise ClusteringError("k must be >= 1")
    docs = list(corpus)
    if len(docs) != len(assignment.labels):
        raise ClusteringError("assignment is not aligned with the corpus")
    out: dict[int, list] = {}
    for lab in range(assignment.n_clusters):
        members = [(float(assignment.probabilities[i]), docs[i])
                   for i in assignment.members(lab)]
        members.sort(key=lambda t: (-t[0], t[1].id))
        out[lab] = [doc for _, doc in members[:k]]
    return out
