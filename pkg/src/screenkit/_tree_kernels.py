"""Compiled CART kernels for the random forest.

Node impurity is the weighted sum of squares ``sum w (y - ybar_w)^2``.  The
best split maximizes ``S_L^2 / W_L + S_R^2 / W_R`` over centred targets,
which is the impurity decrease up to a node constant.  Features are scanned
in ascending index and thresholds in ascending value, and a candidate
replaces the incumbent only if it is larger by more than 1e-10 of the node
impurity.  Ties (including rounding-level differences between mirrored
partitions) therefore go to the lowest feature index and then the lowest
threshold, and a split must gain more than that margin to be made.
"""

import numpy as np
from numba import njit

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0
_N_BUCKETS = 256
# scores closer than this fraction of the node impurity count as tied
_REL_TOL = 1e-10


@njit(cache=True, nogil=True)
def _splitmix(seed, counter):
    z = seed + np.uint64(counter) * _GAMMA
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def build_tree(X, y, w, rows, mult, max_depth, min_samples_leaf, n_try, seed):
    """Grow one tree on the bootstrap sample ``rows`` (unique) with counts ``mult``.

    Returns ``(feature, threshold, left, right, value, depth)`` arrays; leaves
    have ``feature == -1``.
    """
    n = rows.shape[0]
    p = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    value = np.zeros(cap, dtype=np.float64)
    depth_of = np.zeros(cap, dtype=np.int32)

    idx = rows.copy()
    ew = np.empty(X.shape[0], dtype=np.float64)
    cnt = np.zeros(X.shape[0], dtype=np.int64)
    for t in range(n):
        ew[rows[t]] = w[rows[t]] * mult[t]
        cnt[rows[t]] = mult[t]

    feats = np.arange(p).astype(np.int64)
    counter = 0

    # stack of (node, start, end)
    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    top = 1
    n_nodes = 1
    vals = np.empty(n, dtype=np.float64)
    yc = np.empty(n, dtype=np.float64)
    wl = np.empty(n, dtype=np.float64)
    cl = np.empty(n, dtype=np.int64)
    part = np.empty(n, dtype=np.int64)
    bw = np.empty(_N_BUCKETS, dtype=np.float64)
    bs = np.empty(_N_BUCKETS, dtype=np.float64)
    bc = np.empty(_N_BUCKETS, dtype=np.int64)

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        m = end - start

        W = 0.0
        S = 0.0
        count = 0
        ymin = np.inf
        ymax = -np.inf
        for t in range(start, end):
            r = idx[t]
            W += ew[r]
            S += ew[r] * y[r]
            count += cnt[r]
            if y[r] < ymin:
                ymin = y[r]
            if y[r] > ymax:
                ymax = y[r]
        mean = S / W
        value[node] = mean
        if depth_of[node] >= max_depth or ymin == ymax or count < 2 * min_samples_leaf:
            continue

        for t in range(m):
            r = idx[start + t]
            yc[t] = y[r] - mean
            wl[t] = ew[r]
            cl[t] = cnt[r]
        Sc = 0.0
        T = 0.0
        for t in range(m):
            Sc += wl[t] * yc[t]
            T += wl[t] * yc[t] * yc[t]
        base = Sc * Sc / W
        tol = _REL_TOL * T

        # partial Fisher-Yates: first n_try entries of feats become the subset
        for i in range(n_try):
            counter += 1
            u = (_splitmix(seed, counter) >> _S11) * _INV53
            j = i + int(u * (p - i))
            if j >= p:
                j = p - 1
            tmp = feats[i]
            feats[i] = feats[j]
            feats[j] = tmp
        subset = np.sort(feats[:n_try])

        best_score = -np.inf
        best_f = -1
        best_thr = 0.0
        for fi in range(n_try):
            f = subset[fi]
            vmin = np.inf
            vmax = -np.inf
            integral = True
            for t in range(m):
                v = np.float64(X[idx[start + t], f])
                vals[t] = v
                if v < vmin:
                    vmin = v
                if v > vmax:
                    vmax = v
                if integral and v != np.floor(v):
                    integral = False
            if vmin == vmax:
                continue
            if integral and vmax - vmin < _N_BUCKETS:
                # small-integer feature: accumulate per value, no sort needed
                nb = int(vmax - vmin) + 1
                for b in range(nb):
                    bw[b] = 0.0
                    bs[b] = 0.0
                    bc[b] = 0
                for t in range(m):
                    b = int(vals[t] - vmin)
                    bw[b] += wl[t]
                    bs[b] += wl[t] * yc[t]
                    bc[b] += cl[t]
                WL = 0.0
                SL = 0.0
                CL = 0
                prev = -1
                for b in range(nb):
                    if bc[b] == 0:
                        continue
                    if prev >= 0 and CL >= min_samples_leaf and count - CL >= min_samples_leaf:
                        WR = W - WL
                        SR = Sc - SL
                        score = SL * SL / WL + SR * SR / WR
                        if score > best_score + tol:
                            best_score = score
                            best_f = f
                            best_thr = vmin + prev + 0.5 * (b - prev)
                    WL += bw[b]
                    SL += bs[b]
                    CL += bc[b]
                    prev = b
                continue
            order = np.argsort(vals[:m], kind="mergesort")
            WL = 0.0
            SL = 0.0
            CL = 0
            for q in range(m - 1):
                o = order[q]
                WL += wl[o]
                SL += wl[o] * yc[o]
                CL += cl[o]
                v_here = vals[o]
                v_next = vals[order[q + 1]]
                if v_here == v_next:
                    continue
                if CL < min_samples_leaf or count - CL < min_samples_leaf:
                    continue
                WR = W - WL
                SR = Sc - SL
                score = SL * SL / WL + SR * SR / WR
                if score > best_score + tol:
                    best_score = score
                    best_f = f
                    thr = 0.5 * (v_here + v_next)
                    if thr >= v_next:
                        thr = v_here
                    best_thr = thr

        if best_f < 0 or not (best_score - base > tol):
            continue

        # partition idx[start:end] in place, stable order within each side
        k = 0
        for t in range(m):
            r = idx[start + t]
            if np.float64(X[r, best_f]) <= best_thr:
                part[k] = r
                k += 1
        k_left = k
        for t in range(m):
            r = idx[start + t]
            if np.float64(X[r, best_f]) > best_thr:
                part[k] = r
                k += 1
        for t in range(m):
            idx[start + t] = part[t]

        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lnode
        right[node] = rnode
        depth_of[lnode] = depth_of[node] + 1
        depth_of[rnode] = depth_of[node] + 1
        # push right first so the left subtree is grown first
        st_node[top] = rnode
        st_start[top] = start + k_left
        st_end[top] = end
        top += 1
        st_node[top] = lnode
        st_start[top] = start
        st_end[top] = start + k_left
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), depth_of[:n_nodes].copy())


@njit(cache=True, nogil=True)
def predict_forest(X, offsets, feature, threshold, left, right, value):
    """Mean leaf value over trees, summed in tree order."""
    n_rows = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.zeros(n_rows, dtype=np.float64)
    for i in range(n_rows):
        total = 0.0
        for t in range(n_trees):
            base = offsets[t]
            node = 0
            while feature[base + node] >= 0:
                if np.float64(X[i, feature[base + node]]) <= threshold[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            total += value[base + node]
        out[i] = total / n_trees
    return out
