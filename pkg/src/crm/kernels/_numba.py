"""Loop kernels compiled with numba (identity-decorated when numba is absent).

Signatures match :mod:`crm.kernels._numpy` exactly.
"""
import numpy as np

from .._accel import njit


@njit
def bottleneck(S, T):
    a = S.shape[0]
    b = T.shape[0]
    d = S.shape[1]
    buf = np.empty(a * b)
    p = 0
    for i in range(a):
        for j in range(b):
            acc = 0.0
            for f in range(d):
                diff = S[i, f] - T[j, f]
                acc += diff * diff
            buf[p] = np.sqrt(acc)
            p += 1
    buf.sort()
    k = max(a, b)
    total = 0.0
    for i in range(k):
        total += buf[i]
    return total / k


@njit
def _insert_smallest(buf, filled, k, v):
    """Keep ``buf[:k]`` as the ``k`` smallest values seen so far, ascending."""
    if filled == k:
        if v >= buf[k - 1]:
            return filled
        i = k - 1
    else:
        i = filled
        filled += 1
    while i > 0 and buf[i - 1] > v:
        buf[i] = buf[i - 1]
        i -= 1
    buf[i] = v
    return filled


@njit
def _class_pair(qf, qorder, qstart, af, al, ma, n_classes, penalty, buf):
    d = qf.shape[1]
    total = 0.0
    count = 0
    for c in range(n_classes):
        na = qstart[c + 1] - qstart[c]
        nb = 0
        for j in range(ma):
            if al[j] == c:
                nb += 1
        if na > 0 and nb > 0:
            k = max(na, nb)
            filled = 0
            for ii in range(qstart[c], qstart[c + 1]):
                i = qorder[ii]
                for j in range(ma):
                    if al[j] != c:
                        continue
                    acc = 0.0
                    for f in range(d):
                        diff = qf[i, f] - af[j, f]
                        acc += diff * diff
                    filled = _insert_smallest(buf, filled, k, np.sqrt(acc))
            s = 0.0
            for i in range(k):
                s += buf[i]
            total += s / k
            count += 1
        elif (na > 0 or nb > 0) and not np.isnan(penalty):
            total += penalty
            count += 1
    if count == 0:
        return np.nan
    return total / count


@njit
def _group(labels, n_classes):
    start = np.zeros(n_classes + 1, dtype=np.int64)
    for v in labels:
        if 0 <= v < n_classes:
            start[v + 1] += 1
    for c in range(n_classes):
        start[c + 1] += start[c]
    fill = start[:-1].copy()
    order = np.empty(start[n_classes], dtype=np.int64)
    for i in range(labels.shape[0]):
        v = labels[i]
        if 0 <= v < n_classes:
            order[fill[v]] = i
            fill[v] += 1
    return order, start


@njit
def class_window_distance(sf, sl, tf, tl, n_classes, penalty):
    order, start = _group(sl, n_classes)
    buf = np.empty(max(sf.shape[0], tf.shape[0]))
    return _class_pair(sf, order, start, tf, tl, tf.shape[0], n_classes, penalty, buf)


@njit
def class_window_to_anchors(qf, ql, af, al, alen, n_classes, penalty):
    n = af.shape[0]
    out = np.empty(n)
    order, start = _group(ql, n_classes)
    buf = np.empty(max(qf.shape[0], af.shape[1]))
    for a in range(n):
        out[a] = _class_pair(qf, order, start, af[a], al[a], alen[a],
                             n_classes, penalty, buf)
    return out


@njit
def aligned_to_anchors(q, qlen, A, alen):
    n, w, d = A.shape
    out = np.empty(n)
    for a in range(n):
        L = min(qlen, alen[a])
        if L == 0:
            out[a] = 0.0
            continue
        total = 0.0
        for k in range(w - L, w):
            acc = 0.0
            for f in range(d):
                diff = q[k, f] - A[a, k, f]
                acc += diff * diff
            total += np.sqrt(acc)
        out[a] = total / L
    return out


@njit
def markov_labels(cum, start, u):
    n = u.shape[0] + 1
    k = cum.shape[0]
    labels = np.empty(n, dtype=np.int64)
    labels[0] = start
    for t in range(1, n):
        row = cum[labels[t - 1]]
        nxt = np.searchsorted(row, u[t - 1], side="right")
        labels[t] = min(nxt, k - 1)
    return labels


@njit
def greedy_net(D, eps):
    n = D.shape[0]
    centers = np.empty(n, dtype=np.int64)
    mind = D[0].copy()
    centers[0] = 0
    m = 1
    while True:
        i = np.argmax(mind)
        if mind[i] <= eps:
            break
        centers[m] = i
        m += 1
        for j in range(n):
            if D[i, j] < mind[j]:
                mind[j] = D[i, j]
    return centers[:m]


@njit
def first_triangle_violation(D, tol):
    n = D.shape[0]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if D[i, k] > D[i, j] + D[j, k] + tol:
                    return i, j, k
    return -1, -1, -1
