"""Jitted CART internals: greedy variance-reduction growth and routing.

The grower is a single nopython function so forests stay cheap on large
Monte Carlo budgets. Candidate features are drawn from an inlined
splitmix64 stream seeded per tree, which keeps trees independent of
thread scheduling.
"""

import numpy as np
from numba import njit

U64 = np.uint64
_NO_DEPTH_CAP = 1 << 60


@njit(cache=True, inline="always")
def _mix64(state):
    # splitmix64; state is a length-1 uint64 array
    state[0] += U64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return z ^ (z >> U64(31))


@njit(cache=True, nogil=True)
def grow(X, y, rows, mtry, min_node, depth_cap, seed):
    """Grow one regression tree on the row multiset ``rows``.

    Splits maximize the decrease in summed squared error; thresholds are
    midpoints between consecutive distinct sorted values. Exact gain ties
    are broken uniformly at random from the tree's own stream. A node
    becomes a leaf when it is smaller than ``min_node``, is constant in
    response, sits at ``depth_cap``, or admits no strictly positive gain.
    """
    n_train = rows.size
    p = X.shape[1]
    max_nodes = 2 * n_train + 1

    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    value = np.zeros(max_nodes, np.float64)
    count = np.zeros(max_nodes, np.int64)
    variance = np.zeros(max_nodes, np.float64)
    depth = np.zeros(max_nodes, np.int64)

    idx = rows.copy()
    state = np.empty(1, np.uint64)
    state[0] = seed
    perm = np.arange(p)

    stack = np.empty((max_nodes, 4), np.int64)  # start, end, node, depth
    stack[0, 0] = 0
    stack[0, 1] = n_train
    stack[0, 2] = 0
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    xbuf = np.empty(n_train, np.float64)
    ybuf = np.empty(n_train, np.float64)
    part = np.empty(n_train, np.int64)

    while top > 0:
        top -= 1
        start, end, node, dep = stack[top, 0], stack[top, 1], stack[top, 2], stack[top, 3]
        m = end - start

        s = 0.0
        s2 = 0.0
        for i in range(start, end):
            yv = y[idx[i]]
            s += yv
            s2 += yv * yv
        mean = s / m
        sse = s2 - s * s / m
        if sse < 0.0:
            sse = 0.0
        value[node] = mean
        count[node] = m
        variance[node] = sse / m
        depth[node] = dep

        if m < min_node or sse <= 0.0 or dep >= depth_cap:
            continue

        # mtry candidates without replacement
        for j in range(mtry):
            k = j + np.int64(_mix64(state) % U64(p - j))
            perm[j], perm[k] = perm[k], perm[j]
        cand = np.sort(perm[:mtry])

        # Exact gain ties are common in small nodes (the gain depends only
        # on the induced response partition, which different candidates
        # frequently share), so ties are resolved uniformly at random from
        # the tree's stream via reservoir sampling. A positional rule would
        # systematically favor low column indices, which biases any scheme
        # that compares real features against appended probe columns.
        best_gain = 0.0
        best_feat = -1
        best_thr = 0.0
        ties = U64(0)
        for cj in range(mtry):
            f = cand[cj]
            for i in range(m):
                xbuf[i] = X[idx[start + i], f]
            order = np.argsort(xbuf[:m], kind="mergesort")
            for i in range(m):
                ybuf[i] = y[idx[start + order[i]]]
            csum = 0.0
            csum2 = 0.0
            for i in range(m - 1):
                yv = ybuf[i]
                csum += yv
                csum2 += yv * yv
                xa = xbuf[order[i]]
                xb = xbuf[order[i + 1]]
                if xb <= xa:
                    continue
                nl = i + 1
                nr = m - nl
                sse_l = csum2 - csum * csum / nl
                rs = s - csum
                rs2 = s2 - csum2
                sse_r = rs2 - rs * rs / nr
                if sse_l < 0.0:
                    sse_l = 0.0
                if sse_r < 0.0:
                    sse_r = 0.0
                gain = sse - sse_l - sse_r
                if gain > best_gain:
                    best_gain = gain
                    best_feat = f
                    best_thr = 0.5 * (xa + xb)
                    ties = U64(1)
                elif best_feat >= 0 and gain == best_gain:
                    ties += U64(1)
                    if _mix64(state) % ties == U64(0):
                        best_feat = f
                        best_thr = 0.5 * (xa + xb)
        if best_feat < 0:
            continue

        # Partition preserving row order, re-deriving child sums in the
        # order the children will see, then re-check the gain on those
        # canonical sums so a stored split always has a positive decrease.
        nl = 0
        for i in range(start, end):
            if X[idx[i], best_feat] <= best_thr:
                nl += 1
        a = 0
        b = nl
        sl = 0.0
        sl2 = 0.0
        for i in range(start, end):
            r = idx[i]
            if X[r, best_feat] <= best_thr:
                part[a] = r
                a += 1
                sl += y[r]
                sl2 += y[r] * y[r]
            else:
                part[b] = r
                b += 1
        for i in range(m):
            idx[start + i] = part[i]
        nr = m - nl
        sse_l = sl2 - sl * sl / nl
        sr = s - sl
        sr2 = s2 - sl2
        sse_r = sr2 - sr * sr / nr
        if sse_l < 0.0:
            sse_l = 0.0
        if sse_r < 0.0:
            sse_r = 0.0
        if sse - sse_l - sse_r <= 1e-12 * sse:
            continue

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        stack[top, 0] = start
        stack[top, 1] = start + nl
        stack[top, 2] = lid
        stack[top, 3] = dep + 1
        top += 1
        stack[top, 0] = start + nl
        stack[top, 1] = end
        stack[top, 2] = rid
        stack[top, 3] = dep + 1
        top += 1

    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        value[:n_nodes],
        count[:n_nodes],
        variance[:n_nodes],
        depth[:n_nodes],
    )


@njit(cache=True, nogil=True)
def route(feature, threshold, left, right, value, X):
    """Leaf value for each row of ``X`` under one tree's split rules."""
    n = X.shape[0]
    out = np.empty(n, np.float64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


