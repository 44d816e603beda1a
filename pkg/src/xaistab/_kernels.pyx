# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: tree traversal, histogram split search, pairwise exact Shapley.

Every function here has a numpy twin in ``_fallback`` with identical semantics.
"""
import numpy as np
cimport numpy as cnp
from math import comb

cnp.import_array()


def tree_apply(const int[:] feature, const double[:] threshold,
               const int[:] left, const int[:] right, const double[:, :] X):
    """Leaf index reached by each row of ``X``."""
    cdef Py_ssize_t n = X.shape[0], i
    cdef int node, f
    out = np.empty(n, dtype=np.int32)
    cdef int[:] leaves = out
    with nogil:
        for i in range(n):
            node = 0
            f = feature[0]
            while f >= 0:
                if X[i, f] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
                f = feature[node]
            leaves[i] = node
    return out


def best_split(const int[:, :] binned, const long long[:] rows, const int[:] y,
               int n_classes, const int[:] features, const int[:] n_bins,
               int min_leaf):
    """Best Gini split over ``features`` for the node holding ``rows``.

    Returns ``(feature, bin, score, parent_score)`` where score is
    sum_c L_c^2 / n_L + sum_c R_c^2 / n_R (maximised). ``feature`` is -1
    when no admissible split exists.
    """
    cdef Py_ssize_t n = rows.shape[0], nf = features.shape[0]
    cdef int max_b = 0
    cdef Py_ssize_t a, i, b, c
    for a in range(nf):
        if n_bins[features[a]] > max_b:
            max_b = n_bins[features[a]]
    hist_arr = np.zeros((max_b, n_classes), dtype=np.int64)
    tot_arr = np.zeros(n_classes, dtype=np.int64)
    lc_arr = np.zeros(n_classes, dtype=np.int64)
    cdef long long[:, :] hist = hist_arr
    cdef long long[:] tot = tot_arr
    cdef long long[:] lc = lc_arr
    cdef long long sq_l, sq_r, n_l, n_r, sq_p, rc
    cdef double score, parent, best_score = -1.0
    cdef int best_f = -1, best_b = -1, f, nb

    for i in range(n):
        tot[y[rows[i]]] += 1
    sq_p = 0
    for c in range(n_classes):
        sq_p += tot[c] * tot[c]
    parent = <double>sq_p / <double>n

    for a in range(nf):
        f = features[a]
        nb = n_bins[f]
        if nb < 2:
            continue
        for b in range(nb):
            for c in range(n_classes):
                hist[b, c] = 0
        for i in range(n):
            hist[binned[rows[i], f], y[rows[i]]] += 1
        for c in range(n_classes):
            lc[c] = 0
        n_l = 0
        for b in range(nb - 1):
            sq_l = 0
            sq_r = 0
            for c in range(n_classes):
                lc[c] += hist[b, c]
                n_l += hist[b, c]
            n_r = n - n_l
            if n_l < min_leaf or n_r < min_leaf:
                continue
            for c in range(n_classes):
                sq_l += lc[c] * lc[c]
                rc = tot[c] - lc[c]
                sq_r += rc * rc
            score = <double>sq_l / <double>n_l + <double>sq_r / <double>n_r
            if score > best_score:
                best_score = score
                best_f = f
                best_b = b
    return best_f, best_b, best_score, parent


def exact_tree_pairs(const int[:] feature, const double[:] threshold,
                     const int[:] left, const int[:] right, const double[:] value,
                     const double[:, :] X, const double[:, :] B):
    """Exact interventional Shapley values of one tree, averaged over background rows.

    For each (x, r) pair only features split differently by x and r can change
    the composite output; the others are null players and are skipped.
    """
    cdef Py_ssize_t n = X.shape[0], nb = B.shape[0], d = X.shape[1]
    cdef Py_ssize_t n_nodes = feature.shape[0]
    cdef Py_ssize_t i, k, node_i, mask, j, full
    cdef int m, f, node, pos, s
    cdef double xv, t
    phi_arr = np.zeros((n, d), dtype=np.float64)
    cdef double[:, :] phi = phi_arr
    posmap_arr = np.full(d, -1, dtype=np.int32)
    cdef int[:] posmap = posmap_arr
    dlist_arr = np.empty(d, dtype=np.int32)
    cdef int[:] dlist = dlist_arr

    used = np.unique(np.asarray(feature)[np.asarray(feature) >= 0]).astype(np.int32)
    cdef int n_used = used.shape[0]
    vbuf_arr = np.empty(1 << n_used, dtype=np.float64)
    popc_arr = np.zeros(1 << n_used, dtype=np.int32)
    w_arr = np.empty((n_used + 1, n_used + 1), dtype=np.float64)
    cdef double[:] vbuf = vbuf_arr
    cdef int[:] popc = popc_arr
    cdef double[:, :] w = w_arr
    for mask in range(1, 1 << n_used):
        popc[mask] = popc[mask >> 1] + (mask & 1)
    for m in range(1, n_used + 1):
        for s in range(m):
            # s! (m - s - 1)! / m! == 1 / (m * C(m - 1, s))
            w[m, s] = 1.0 / (m * comb(m - 1, s))

    with nogil:
        for i in range(n):
            for k in range(nb):
                m = 0
                for node_i in range(n_nodes):
                    f = feature[node_i]
                    if f < 0 or posmap[f] >= 0:
                        continue
                    t = threshold[node_i]
                    if (X[i, f] <= t) != (B[k, f] <= t):
                        posmap[f] = m
                        dlist[m] = f
                        m += 1
                if m == 0:
                    continue
                full = 1 << m
                for mask in range(full):
                    node = 0
                    f = feature[0]
                    while f >= 0:
                        pos = posmap[f]
                        if pos >= 0 and (mask >> pos) & 1:
                            xv = X[i, f]
                        else:
                            xv = B[k, f]
                        if xv <= threshold[node]:
                            node = left[node]
                        else:
                            node = right[node]
                        f = feature[node]
                    vbuf[mask] = value[node]
                for mask in range(full):
                    s = popc[mask]
                    for j in range(m):
                        if not (mask >> j) & 1:
                            phi[i, dlist[j]] += w[m, s] * (vbuf[mask | (1 << j)] - vbuf[mask])
                for j in range(m):
                    posmap[dlist[j]] = -1
            for j in range(d):
                phi[i, j] /= nb
    return phi_arr


def forest_proba(const int[:] feature, const double[:] threshold,
                 const int[:] left, const int[:] right, const double[:, :] value,
                 const int[:] roots, const double[:, :] X):
    """Mean leaf probability over trees packed into shared node arrays.

    Child indices are absolute; ``roots[t]`` is the root node of tree ``t``.
    """
    cdef Py_ssize_t n = X.shape[0], n_trees = roots.shape[0]
    cdef Py_ssize_t n_classes = value.shape[1], i, t, c
    cdef int node, f
    out_arr = np.zeros((n, n_classes), dtype=np.float64)
    cdef double[:, :] out = out_arr
    cdef double inv = 1.0 / n_trees
    with nogil:
        for i in range(n):
            for t in range(n_trees):
                node = roots[t]
                f = feature[node]
                while f >= 0:
                    if X[i, f] <= threshold[node]:
                        node = left[node]
                    else:
                        node = right[node]
                    f = feature[node]
                for c in range(n_classes):
                    out[i, c] += value[node, c]
            for c in range(n_classes):
                out[i, c] *= inv
    return out_arr
