"""Vectorized numpy counterparts of the numba kernels."""
import numpy as np


def bottleneck(S, T):
    d = np.sqrt(((S[:, None, :] - T[None, :, :]) ** 2).sum(-1)).ravel()
    k = max(S.shape[0], T.shape[0])
    return np.sort(d)[:k].sum() / k


def class_window_to_anchors(qf, ql, af, al, alen, n_classes, penalty):
    n = af.shape[0]
    if n == 0:
        return np.empty(0)
    dist = np.sqrt(((qf[None, :, None, :] - af[:, None, :, :]) ** 2).sum(-1))
    use_penalty = not np.isnan(penalty)
    total = np.zeros(n)
    count = np.zeros(n, dtype=np.int64)
    for c in range(n_classes):
        qmask = ql == c
        amask = al == c
        na = int(qmask.sum())
        nb = amask.sum(1)
        joint = (na > 0) & (nb > 0)
        if joint.any():
            pair = qmask[None, :, None] & amask[:, None, :]
            dd = np.sort(np.where(pair, dist, np.inf).reshape(n, -1), axis=1)
            k = np.maximum(na, nb)
            csum = np.cumsum(dd, axis=1)
            picked = np.take_along_axis(csum, np.maximum(k - 1, 0)[:, None], axis=1)[:, 0]
            total += np.where(joint, picked / np.maximum(k, 1), 0.0)
            count += joint
        if use_penalty:
            one = (na > 0) ^ (nb > 0)
            total += np.where(one, penalty, 0.0)
            count += one
    with np.errstate(invalid="ignore"):
        return np.where(count > 0, total / np.maximum(count, 1), np.nan)


def class_window_distance(sf, sl, tf, tl, n_classes, penalty):
    return float(class_window_to_anchors(
        sf, sl, tf[None], tl[None], np.array([tf.shape[0]]), n_classes, penalty)[0])


def aligned_to_anchors(q, qlen, A, alen):
    n, w, _ = A.shape
    if n == 0:
        return np.empty(0)
    L = np.minimum(qlen, alen)
    pos = np.arange(w)
    valid = pos[None, :] >= (w - L)[:, None]
    norms = np.sqrt(((A - q[None]) ** 2).sum(-1))
    total = np.where(valid, norms, 0.0).sum(1)
    return np.where(L > 0, total / np.maximum(L, 1), 0.0)


def markov_labels(cum, start, u):
    k = cum.shape[0]
    nxt = np.minimum(
        np.stack([np.searchsorted(cum[s], u, side="right") for s in range(k)]), k - 1)
    labels = np.empty(u.shape[0] + 1, dtype=np.int64)
    labels[0] = state = start
    for t in range(u.shape[0]):
        state = nxt[state, t]
        labels[t + 1] = state
    return labels


def greedy_net(D, eps):
    centers = [0]
    mind = D[0].copy()
    while True:
        i = int(np.argmax(mind))
        if mind[i] <= eps:
            break
        centers.append(i)
        np.minimum(mind, D[i], out=mind)
    return np.asarray(centers, dtype=np.int64)


def first_triangle_violation(D, tol):
    for i in range(D.shape[0]):
        bad = D[i][None, :] > D[i][:, None] + D + tol
        hit = np.argwhere(bad)
        if hit.size:
            return i, int(hit[0, 0]), int(hit[0, 1])
    return -1, -1, -1
