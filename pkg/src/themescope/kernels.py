"""Hot numeric kernels shared by the projection, clustering, and baseline modules.

Every kernel is written as a plain Python function over numpy arrays and
JIT-compiled with numba when available.  Set ``THEMESCOPE_NUMBA=0`` to force
the pure-numpy/Python path (slow, but dependency-free and bit-identical:
all kernels use float64/int64 arithmetic and a shared xorshift32 stream, so
both backends produce the same bytes).  When numba is active the original
Python implementation of a kernel ``k`` stays reachable as ``k.py_func``.
"""

import os

import numpy as np

_env = os.environ.get("THEMESCOPE_NUMBA", "auto").strip().lower()
if _env in ("0", "false", "off", "no"):
    USE_NUMBA = False
else:
    try:
        from numba import njit as _njit

        USE_NUMBA = True
    except ImportError:
        USE_NUMBA = False

if USE_NUMBA:
    def _maybe_jit(fn):
        return _njit(cache=True, fastmath=False)(fn)
else:
    def _maybe_jit(fn):
        return fn


def make_rng_state(seed):
    """1-element int64 state for the xorshift32 stream used inside kernels."""
    s = (int(seed) ^ 2463534242) & 0xFFFFFFFF
    if s == 0:
        s = 2463534242
    return np.array([s], dtype=np.int64)


@_maybe_jit
def _xorshift32(state):
    # 32-bit values carried in int64 slots: shifts never overflow int64.
    x = state[0]
    x ^= (x << 13) & 0xFFFFFFFF
    x ^= x >> 17
    x ^= (x << 5) & 0xFFFFFFFF
    state[0] = x
    return x


@_maybe_jit
def _rand_uniform(state):
    return _xorshift32(state) / 4294967296.0


@_maybe_jit
def _rand_below(state, n):
    return _xorshift32(state) % n


@_maybe_jit
def smooth_knn(knn_dists, target, n_iter, min_scale):
    """Per-point bandwidth search for the fuzzy neighborhood graph.

    ``knn_dists`` is (n, k), sorted ascending, self excluded.  For each point
    a binary search finds sigma such that the smoothed weights sum to
    ``target`` (log2 of the neighbor count).  Returns (sigmas, rhos) where
    rho is the distance to the nearest nonzero neighbor.
    """
    n, k = knn_dists.shape
    sigmas = np.zeros(n, dtype=np.float64)
    rhos = np.zeros(n, dtype=np.float64)
    mean_all = np.mean(knn_dists)
    for i in range(n):
        rho = 0.0
        for j in range(k):
            if knn_dists[i, j] > 0.0:
                rho = knn_dists[i, j]
                break
        rhos[i] = rho
        lo = 0.0
        hi = np.inf
        mid = 1.0
        for _ in range(n_iter):
            psum = 0.0
            for j in range(k):
                d = knn_dists[i, j] - rho
                if d > 0.0:
                    psum += np.exp(-d / mid)
                else:
                    psum += 1.0
            if abs(psum - target) < 1e-5:
                break
            if psum > target:
                hi = mid
                mid = (lo + hi) / 2.0
            else:
                lo = mid
                if hi == np.inf:
                    mid *= 2.0
                else:
                    mid = (lo + hi) / 2.0
        # Guard against degenerate (duplicate-heavy) neighborhoods.
        if rho > 0.0:
            floor = min_scale * np.mean(knn_dists[i])
        else:
            floor = min_scale * mean_all
        if mid < floor:
            mid = floor
        sigmas[i] = mid
    return sigmas, rhos


@_maybe_jit
def _clip4(v):
    if v > 4.0:
        return 4.0
    if v < -4.0:
        return -4.0
    return v


@_maybe_jit
def umap_optimize(embedding, head, tail, epochs_per_sample, a, b, gamma,
                  initial_alpha, negative_sample_rate, n_epochs, state):
    """SGD layout over attractive/repulsive pairs with negative sampling.

    Mutates ``embedding`` (n, dim) in place.  ``head``/``tail`` are the edge
    endpoints of the fuzzy graph and ``epochs_per_sample`` the per-edge
    sampling schedule.  Deterministic given the rng ``state``.
    """
    n_vertices = embedding.shape[0]
    dim = embedding.shape[1]
    n_edges = head.shape[0]
    epochs_per_negative_sample = epochs_per_sample / negative_sample_rate
    epoch_of_next_sample = epochs_per_sample.copy()
    epoch_of_next_negative_sample = epochs_per_negative_sample.copy()
    for epoch in range(n_epochs):
        alpha = initial_alpha * (1.0 - epoch / n_epochs)
        for e in range(n_edges):
            if epoch_of_next_sample[e] > epoch:
                continue
            j = head[e]
            k = tail[e]
            dist_sq = 0.0
            for d in range(dim):
                diff = embedding[j, d] - embedding[k, d]
                dist_sq += diff * diff
            if dist_sq > 0.0:
                grad_coeff = (-2.0 * a * b * dist_sq ** (b - 1.0)) / (
                    a * dist_sq ** b + 1.0
                )
            else:
                grad_coeff = 0.0
            for d in range(dim):
                g = _clip4(grad_coeff * (embedding[j, d] - embedding[k, d]))
                embedding[j, d] += g * alpha
                embedding[k, d] -= g * alpha
            epoch_of_next_sample[e] += epochs_per_sample[e]
            n_neg = int(
                (epoch - epoch_of_next_negative_sample[e])
                / epochs_per_negative_sample[e]
            )
            for _ in range(n_neg):
                k = _rand_below(state, n_vertices)
                if k == j:
                    continue
                dist_sq = 0.0
                for d in range(dim):
                    diff = embedding[j, d] - embedding[k, d]
                    dist_sq += diff * diff
                if dist_sq > 0.0:
                    grad_coeff = (2.0 * gamma * b) / (
                        (0.001 + dist_sq) * (a * dist_sq ** b + 1.0)
                    )
                else:
                    grad_coeff = 0.0
                for d in range(dim):
                    if grad_coeff > 0.0:
                        g = _clip4(grad_coeff * (embedding[j, d] - embedding[k, d]))
                    else:
                        g = 4.0
                    embedding[j, d] += g * alpha
            epoch_of_next_negative_sample[e] += (
                n_neg * epochs_per_negative_sample[e]
            )


@_maybe_jit
def prim_mst_mutual_reachability(data, core_dists):
    """Minimum spanning tree over the mutual reachability metric.

    mreach(a, b) = max(core(a), core(b), euclid(a, b)).  The pairwise matrix
    is never materialized.  Ties break toward the lower point index (both in
    candidate updates and in the argmin scan), so the tree is deterministic
    for a fixed input order.  Returns (parents, children, weights) of the
    n-1 edges in insertion order.
    """
    n = data.shape[0]
    dim = data.shape[1]
    in_tree = np.zeros(n, dtype=np.bool_)
    best_dist = np.full(n, np.inf, dtype=np.float64)
    best_src = np.zeros(n, dtype=np.int64)
    edge_a = np.zeros(n - 1, dtype=np.int64)
    edge_b = np.zeros(n - 1, dtype=np.int64)
    edge_w = np.zeros(n - 1, dtype=np.float64)
    in_tree[0] = True
    current = 0
    for step in range(n - 1):
        for j in range(n):
            if in_tree[j]:
                continue
            dist_sq = 0.0
            for d in range(dim):
                diff = data[current, d] - data[j, d]
                dist_sq += diff * diff
            mr = np.sqrt(dist_sq)
            if core_dists[current] > mr:
                mr = core_dists[current]
            if core_dists[j] > mr:
                mr = core_dists[j]
            if mr < best_dist[j]:
                best_dist[j] = mr
                best_src[j] = current
        pick = -1
        pick_dist = np.inf
        for j in range(n):
            if not in_tree[j] and best_dist[j] < pick_dist:
                pick_dist = best_dist[j]
                pick = j
        edge_a[step] = best_src[pick]
        edge_b[step] = pick
        edge_w[step] = pick_dist
        in_tree[pick] = True
        current = pick
    return edge_a, edge_b, edge_w


@_maybe_jit
def gibbs_sweeps(words, docs, z, n_dk, n_kw, n_k, alpha, beta, n_sweeps, state):
    """Collapsed Gibbs sweeps for LDA; mutates z and all count arrays.

    ``words``/``docs``/``z`` are flat per-token arrays.  One sweep resamples
    every token from p(k) ~ (n_dk + alpha) * (n_kw + beta) / (n_k + V*beta)
    with the token's own assignment removed.
    """
    n_tokens = words.shape[0]
    n_topics = n_kw.shape[0]
    vocab_size = n_kw.shape[1]
    probs = np.zeros(n_topics, dtype=np.float64)
    for _ in range(n_sweeps):
        for t in range(n_tokens):
            w = words[t]
            d = docs[t]
            k_old = z[t]
            n_dk[d, k_old] -= 1
            n_kw[k_old, w] -= 1
            n_k[k_old] -= 1
            total = 0.0
            for k in range(n_topics):
                p = (n_dk[d, k] + alpha) * (n_kw[k, w] + beta) / (
                    n_k[k] + vocab_size * beta
                )
                total += p
                probs[k] = total
            u = _rand_uniform(state) * total
            k_new = n_topics - 1
            for k in range(n_topics):
                if u < probs[k]:
                    k_new = k
                    break
            n_dk[d, k_new] += 1
            n_kw[k_new, w] += 1
            n_k[k_new] += 1
            z[t] = k_new


def warmup():
    """Trigger JIT compilation of every kernel on tiny inputs."""
    st = make_rng_state(1)
    _rand_uniform(st)
    _rand_below(st, 7)
    smooth_knn(np.array([[0.5, 1.0], [0.5, 1.5]]), 1.0, 8, 1e-3)
    emb = np.zeros((3, 2))
    umap_optimize(emb, np.array([0, 1]), np.array([1, 2]),
                  np.array([1.0, 1.0]), 1.57, 0.89, 1.0, 1.0, 5, 2, st)
    prim_mst_mutual_reachability(np.arange(6, dtype=np.float64).reshape(3, 2),
                                 np.zeros(3))
    gibbs_sweeps(np.array([0, 1], dtype=np.int64),
                 np.array([0, 0], dtype=np.int64),
                 np.array([0, 1], dtype=np.int64),
                 np.ones((1, 2), dtype=np.int64),
                 np.ones((2, 2), dtype=np.int64),
                 np.array([2, 2], dtype=np.int64), 0.1, 0.01, 1, st)
