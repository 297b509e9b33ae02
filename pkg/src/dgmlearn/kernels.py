"""Hot inner loops.

Each kernel has a numba implementation (``*_nb``) and a numpy fallback
(``*_np``).  The public name points at one of them depending on
:data:`dgmlearn._accel.USE_NUMBA`; both are importable so tests and the
benchmark can compare them directly.
"""

import numpy as np

from ._accel import USE_NUMBA, njit


# --------------------------------------------------------------------------
# breadth-first search over a CSR adjacency
# --------------------------------------------------------------------------

@njit
def bfs_depths_nb(indptr, indices, source, max_depth):
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    queue = np.empty(n, dtype=np.int64)
    queue[0] = source
    head = 0
    tail = 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        if max_depth >= 0 and du >= max_depth:
            continue
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            if dist[v] < 0:
                dist[v] = du + 1
                queue[tail] = v
                tail += 1
    return dist


def bfs_depths_np(indptr, indices, source, max_depth):
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    depth = 0
    while frontier.size and (max_depth < 0 or depth < max_depth):
        starts = indptr[frontier]
        stops = indptr[frontier + 1]
        if not np.any(stops > starts):
            break
        nbrs = np.concatenate([indices[a:b] for a, b in zip(starts, stops)])
        nbrs = np.unique(nbrs)
        nbrs = nbrs[dist[nbrs] < 0]
        depth += 1
        dist[nbrs] = depth
        frontier = nbrs
    return dist


# --------------------------------------------------------------------------
# neighborhood-restricted grounding counts
# --------------------------------------------------------------------------

@njit
def count_inside_nb(bound, mask):
    """Rows of ``bound`` (n_subs, n_vars) whose entities are all in ``mask``."""
    total = 0
    for i in range(bound.shape[0]):
        ok = True
        for j in range(bound.shape[1]):
            if not mask[bound[i, j]]:
                ok = False
                break
        if ok:
            total += 1
    return total


def count_inside_np(bound, mask):
    if bound.shape[0] == 0:
        return 0
    if bound.shape[1] == 0:
        return int(bound.shape[0])
    return int(np.count_nonzero(mask[bound].all(axis=1)))


# --------------------------------------------------------------------------
# gradient-boosting split search (second-order gain)
# --------------------------------------------------------------------------

@njit
def best_split_nb(X, grad, hess, rows, reg_lambda, min_child_weight):
    n_feat = X.shape[1]
    G = 0.0
    H = 0.0
    for r in rows:
        G += grad[r]
        H += hess[r]
    parent = G * G / (H + reg_lambda)
    best_gain = 0.0
    best_feat = -1
    best_thr = 0.0
    for f in range(n_feat):
        vals = X[rows, f]
        order = np.argsort(vals, kind="mergesort")
        gl = 0.0
        hl = 0.0
        for i in range(order.shape[0] - 1):
            r = rows[order[i]]
            gl += grad[r]
            hl += hess[r]
            v = vals[order[i]]
            v_next = vals[order[i + 1]]
            if v_next <= v:
                continue
            hr = H - hl
            if hl < min_child_weight or hr < min_child_weight:
                continue
            gr = G - gl
            gain = gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent
            if gain > best_gain + 1e-12:
                best_gain = gain
                best_feat = f
                best_thr = 0.5 * (v + v_next)
    return best_feat, best_thr, best_gain


def best_split_np(X, grad, hess, rows, reg_lambda, min_child_weight):
    g = grad[rows]
    h = hess[rows]
    G = g.sum()
    H = h.sum()
    parent = G * G / (H + reg_lambda)
    best_gain, best_feat, best_thr = 0.0, -1, 0.0
    for f in range(X.shape[1]):
        vals = X[rows, f]
        order = np.argsort(vals, kind="mergesort")
        sv = vals[order]
        gl = np.cumsum(g[order])[:-1]
        hl = np.cumsum(h[order])[:-1]
        hr = H - hl
        gr = G - gl
        valid = (sv[1:] > sv[:-1]) & (hl >= min_child_weight) & (hr >= min_child_weight)
        if not valid.any():
            continue
        gain = gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent
        gain = np.where(valid, gain, -np.inf)
        # first strict improvement, scanning features then positions, like the loop
        i = int(np.argmax(gain))
        if gain[i] > best_gain + 1e-12:
            best_gain = float(gain[i])
            best_feat = f
            best_thr = 0.5 * (sv[i] + sv[i + 1])
    return best_feat, best_thr, best_gain


if USE_NUMBA:
    bfs_depths = bfs_depths_nb
    count_inside = count_inside_nb
    best_split = best_split_nb
else:
    bfs_depths = bfs_depths_np
    count_inside = count_inside_np
    best_split = best_split_np
