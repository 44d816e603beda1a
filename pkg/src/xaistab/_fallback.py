"""Pure numpy implementations of the compiled kernels in ``_kernels.pyx``."""
from math import comb

import numpy as np


def tree_apply(feature, threshold, left, right, X):
    X = np.asarray(X, dtype=np.float64)
    node = np.zeros(X.shape[0], dtype=np.int32)
    active = np.flatnonzero(feature[node] >= 0)
    while active.size:
        nd = node[active]
        f = feature[nd]
        go_left = X[active, f] <= threshold[nd]
        node[active] = np.where(go_left, left[nd], right[nd])
        active = active[feature[node[active]] >= 0]
    return node


def best_split(binned, rows, y, n_classes, features, n_bins, min_leaf):
    rows = np.asarray(rows)
    yr = y[rows]
    n = rows.size
    tot = np.bincount(yr, minlength=n_classes).astype(np.int64)
    parent = float((tot * tot).sum()) / n
    features = np.asarray(features)
    nb = n_bins[features]
    max_b = int(nb.max()) if features.size else 0
    if max_b < 2:
        return -1, -1, -1.0, parent

    codes = binned[np.ix_(rows, features)]
    flat = (np.arange(features.size)[None, :] * max_b + codes) * n_classes + yr[:, None]
    hist = np.bincount(flat.ravel(), minlength=features.size * max_b * n_classes)
    hist = hist.reshape(features.size, max_b, n_classes).astype(np.int64)
    lc = np.cumsum(hist, axis=1)[:, :-1, :]
    rc = tot[None, None, :] - lc
    n_l = lc.sum(axis=2)
    n_r = n - n_l
    valid = (n_l >= min_leaf) & (n_r >= min_leaf)
    # split after bin b only exists for b < n_bins[f] - 1
    valid &= np.arange(max_b - 1)[None, :] < (nb[:, None] - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = (lc * lc).sum(axis=2) / n_l + (rc * rc).sum(axis=2) / n_r
    score = np.where(valid, score, -np.inf)
    best = int(np.argmax(score))
    a, b = divmod(best, max_b - 1)
    if not np.isfinite(score[a, b]) or score[a, b] <= -1.0:
        return -1, -1, -1.0, parent
    return int(features[a]), int(b), float(score[a, b]), parent


def _weights(m):
    return np.array([1.0 / (m * comb(m - 1, s)) for s in range(m)])


def exact_tree_pairs(feature, threshold, left, right, value, X, B):
    """Same quantity as the compiled kernel, by enumerating every coalition of
    the features the tree uses (no per-pair reduction)."""
    X = np.asarray(X, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    n, d = X.shape
    phi = np.zeros((n, d))
    used = np.unique(feature[feature >= 0])
    m = used.size
    if m == 0:
        return phi
    masks = ((np.arange(1 << m)[:, None] >> np.arange(m)[None, :]) & 1).astype(bool)
    sizes = masks.sum(axis=1)
    w = _weights(m)
    for i in range(n):
        comp = np.broadcast_to(B, (1 << m,) + B.shape).copy()
        comp[:, :, used] = np.where(masks[:, None, :], X[i, used], comp[:, :, used])
        leaves = tree_apply(feature, threshold, left, right, comp.reshape(-1, d))
        v = value[leaves].reshape(1 << m, B.shape[0]).mean(axis=1)
        for j in range(m):
            without = np.flatnonzero(~masks[:, j])
            phi[i, used[j]] = np.sum(w[sizes[without]] * (v[without | (1 << j)] - v[without]))
    return phi


def forest_proba(feature, threshold, left, right, value, roots, X):
    X = np.asarray(X, dtype=np.float64)
    out = np.zeros((X.shape[0], value.shape[1]))
    for t in range(roots.shape[0]):
        node = np.full(X.shape[0], roots[t], dtype=np.int32)
        active = np.flatnonzero(feature[node] >= 0)
        while active.size:
            nd = node[active]
            f = feature[nd]
            node[active] = np.where(X[active, f] <= threshold[nd], left[nd], right[nd])
            active = active[feature[node[active]] >= 0]
        out += value[node]
    return out / roots.shape[0]
