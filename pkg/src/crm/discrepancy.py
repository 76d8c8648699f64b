"""Computable upper bounds on the discrepancy between two time steps.

A bound compares the history window that precedes step ``t`` with the one
that precedes an anchor step ``tau``, so ``M(t, tau)`` is available before
``z_t`` is revealed.  Anchor windows are cached when a subroutine is created.

Step 1 has no history.  A subroutine anchored at step 1 therefore adopts the
window of step 2 (``[z_1]``) as soon as ``z_1`` has been observed; queries
against it only happen from step 2 onwards, so no comparison ever sees an
empty window.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, EvaluationError, PreconditionError

DEFAULT_WINDOW = 5
BOUND_KINDS = (
    "zero",
    "markov_indicator",
    "feature_window_D1",
    "label_window_D2",
    "aligned_window",
    "precomputed_matrix",
)


@dataclass(frozen=True)
class HistoryWindow:
    """Observations of the ``w`` most recent steps, oldest first.

    ``features``/``labels`` flatten every member of every step; ``step_features``
    holds one row per step (the member mean when a step is a chunk).
    """

    features: np.ndarray
    labels: np.ndarray
    step_features: np.ndarray
    time_indices: tuple = ()

    @classmethod
    def from_steps(cls, steps, feature_dim=None) -> "HistoryWindow":
        obs = [m for step in steps for m in step]
        if feature_dim is None:
            feature_dim = obs[0].features.shape[0] if obs else 0
        if obs:
            features = np.array([m.features for m in obs], dtype=np.float64).reshape(len(obs), feature_dim)
        else:
            features = np.empty((0, feature_dim))
        labels = np.fromiter((m.label for m in obs), dtype=np.int64, count=len(obs))
        if len(obs) == len(steps):
            step_features = features
        else:
            step_features = np.empty((len(steps), feature_dim))
            for i, step in enumerate(steps):
                step_features[i] = np.mean([m.features for m in step], axis=0) if feature_dim else 0.0
        return cls(features, labels, step_features, tuple(s[0].time_index for s in steps))

    @classmethod
    def from_observations(cls, observations) -> "HistoryWindow":
        return cls.from_steps([(o,) for o in observations])

    def __len__(self):
        return self.step_features.shape[0]


def zero_bound(t: int, tau: int) -> float:
    return 0.0


def markov_indicator(t: int, tau: int, labels) -> float:
    """``1[z_{t-1} != z_{tau-1}]`` where ``labels[i]`` is the label at step ``i + 1``."""
    if t < 2 or tau < 2:
        raise PreconditionError("markov_indicator needs a previous observation at both steps")
    return float(labels[t - 2] != labels[tau - 2])


def _require_nonempty(*windows):
    for w in windows:
        if w.labels.shape[0] == 0:
            raise PreconditionError("history window is empty")


def label_fractions(window: HistoryWindow, num_classes: int) -> np.ndarray:
    labels = window.labels
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise PreconditionError(f"labels must lie in 0..{num_classes - 1}")
    return np.bincount(labels, minlength=num_classes) / labels.shape[0]


def label_fraction_distance(S: HistoryWindow, T: HistoryWindow, num_classes: int) -> float:
    """Squared Euclidean distance between class-fraction vectors (range [0, 2])."""
    _require_nonempty(S, T)
    diff = label_fractions(S, num_classes) - label_fractions(T, num_classes)
    return float(diff @ diff)


def bottleneck_distance(S, T) -> float:
    """Mean of the ``max(|S|, |T|)`` smallest pairwise Euclidean distances."""
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    T = np.atleast_2d(np.asarray(T, dtype=np.float64))
    if S.shape[0] == 0 or T.shape[0] == 0:
        raise PreconditionError("bottleneck distance needs nonempty sets")
    if S.shape[1] != T.shape[1]:
        raise PreconditionError(f"dimension mismatch: {S.shape[1]} vs {T.shape[1]}")
    return float(kernels.bottleneck(S, T))


def feature_window_d1(S: HistoryWindow, T: HistoryWindow, num_classes: int, penalty=None) -> float:
    """Per-class bottleneck distance averaged over classes.

    Classes present in both windows contribute their bottleneck distance; a
    class present in exactly one window contributes ``penalty`` (skipped when
    ``penalty`` is None).
    """
    _require_nonempty(S, T)
    if S.features.shape[1] != T.features.shape[1]:
        raise PreconditionError("dimension mismatch between windows")
    p = np.nan if penalty is None else float(penalty)
    value = kernels.class_window_distance(S.features, S.labels, T.features, T.labels, num_classes, p)
    if np.isnan(value):
        raise EvaluationError("no class is present in both windows and the penalty is disabled")
    return float(value)


def fixed_window_d2_aligned(S: HistoryWindow, T: HistoryWindow) -> float:
    """Average Euclidean distance between same-position step features."""
    if len(S) != len(T):
        raise PreconditionError(f"window lengths differ: {len(S)} vs {len(T)}")
    if len(S) == 0:
        raise PreconditionError("history window is empty")
    if S.step_features.shape[1] != T.step_features.shape[1]:
        raise PreconditionError("dimension mismatch between windows")
    return float(np.sqrt(((S.step_features - T.step_features) ** 2).sum(1)).mean())


class _Rows:
    """Append-only array with amortized growth along axis 0."""

    def __init__(self, tail, dtype=np.float64, fill=0):
        self.fill = fill
        self.data = np.full((16, *tail), fill, dtype=dtype)
        self.n = 0

    def append(self):
        if self.n == self.data.shape[0]:
            extra = np.full_like(self.data, self.fill)
            self.data = np.concatenate([self.data, extra])
        self.n += 1
        return self.n - 1

    def widen(self, axis, size):
        shape = list(self.data.shape)
        if shape[axis] >= size:
            return
        shape[axis] = size
        grown = np.full(shape, self.fill, dtype=self.data.dtype)
        grown[tuple(slice(0, s) for s in self.data.shape)] = self.data
        self.data = grown

    def view(self):
        return self.data[: self.n]


class DiscrepancyBound:
    """Base class: history bookkeeping plus anchor caching.

    Subclasses implement :meth:`distance` (two windows) and the batched
    :meth:`_store` / :meth:`_query` pair used once per step.
    """

    kind = "abstract"
    pseudometric = False
    window_length = DEFAULT_WINDOW

    def __init__(self, window=None, num_classes=2):
        if window is not None:
            if window < 1:
                raise ConfigError("window length must be >= 1")
            self.window_length = int(window)
        self.num_classes = int(num_classes)
        self.steps: list[tuple] = []
        self.anchors: list[int] = []
        self._pending: list[int] = []
        self._cache = (None, None)

    @property
    def observed(self) -> int:
        return len(self.steps)

    def advance(self, members) -> None:
        """Append the members revealed at the next step."""
        self.steps.append(tuple(members))
        if self._pending:
            w = self.window_at(self.observed + 1)
            for slot in self._pending:
                self._store(slot, w)
            self._pending.clear()

    def window_at(self, t: int) -> HistoryWindow:
        if t == 1 and self.steps:
            t = 2
        hi = min(t - 1, self.observed)
        lo = max(0, t - 1 - self.window_length)
        return HistoryWindow.from_steps(self.steps[lo:hi], self._feature_dim())

    def _feature_dim(self):
        return self.steps[0][0].features.shape[0] if self.steps else None

    def _query_window(self, t):
        key, w = self._cache
        if key != (t, self.observed):
            w = self.window_at(t)
            self._cache = ((t, self.observed), w)
        return w

    def add_anchor(self, t: int) -> None:
        slot = len(self.anchors)
        self.anchors.append(t)
        w = self._query_window(t)
        if len(w) == 0:
            self._reserve(slot)
            self._pending.append(slot)
        else:
            self._reserve(slot)
            self._store(slot, w)

    def to_anchors(self, t: int, eps: float) -> np.ndarray:
        """``M(t, tau_j)`` for every anchor, in creation order."""
        if not self.anchors:
            return np.empty(0)
        w = self._query_window(t)
        if len(w) == 0:
            return np.zeros(len(self.anchors))
        return self._query(w, eps)

    def value(self, t: int, tau: int, eps: float = 0.0) -> float:
        return self.distance(self.window_at(t), self.window_at(tau), eps)

    def matrix(self, n: int, eps: float = 0.0) -> np.ndarray:
        """Bound values between all pairs of steps ``1..n`` from the stored history."""
        if n > self.observed + 1:
            raise PreconditionError(f"history covers steps up to {self.observed + 1}, asked for {n}")
        windows = [self.window_at(t) for t in range(1, n + 1)]
        D = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                D[i, j] = D[j, i] = self.distance(windows[i], windows[j], eps)
        return D

    def distance(self, S: HistoryWindow, T: HistoryWindow, eps: float) -> float:
        raise NotImplementedError

    def _reserve(self, slot):
        pass

    def _store(self, slot, window):
        pass

    def _query(self, window, eps):
        raise NotImplementedError


class ZeroBound(DiscrepancyBound):
    """``M == 0``: every step shares one conditional distribution."""

    kind = "zero"
    pseudometric = True

    def distance(self, S, T, eps):
        return 0.0

    def to_anchors(self, t, eps):
        return np.zeros(len(self.anchors))

    def matrix(self, n, eps=0.0):
        return np.zeros((n, n))


class MarkovIndicatorBound(DiscrepancyBound):
    """0 when the labels preceding the two steps agree, else 1.

    For chunked steps the last member's label is the chain state.
    """

    kind = "markov_indicator"
    pseudometric = True
    window_length = 1

    def __init__(self, window=None, num_classes=2):
        super().__init__(1, num_classes)
        self._keys = _Rows((), dtype=np.int64, fill=-1)

    def _state_before(self, t):
        return self.steps[max(t, 2) - 2][-1].label

    def distance(self, S, T, eps):
        _require_nonempty(S, T)
        return float(S.labels[-1] != T.labels[-1])

    def add_anchor(self, t):
        slot = len(self.anchors)
        self.anchors.append(t)
        self._keys.append()
        if self.steps and t <= self.observed + 1:
            self._keys.data[slot] = self._state_before(t)
        else:
            self._pending.append(slot)

    def advance(self, members):
        self.steps.append(tuple(members))
        for slot in self._pending:
            self._keys.data[slot] = self._state_before(self.observed + 1)
        self._pending.clear()

    def to_anchors(self, t, eps):
        if not self.steps:
            return np.zeros(len(self.anchors))
        return (self._keys.view() != self._state_before(t)).astype(np.float64)

    def value(self, t, tau, eps=0.0):
        return float(self._state_before(t) != self._state_before(tau))


class LabelWindowD2Bound(DiscrepancyBound):
    """Squared distance between label-fraction vectors of the two windows."""

    kind = "label_window_D2"

    def __init__(self, window=None, num_classes=2):
        super().__init__(window, num_classes)
        self._rows = _Rows((self.num_classes,))

    def distance(self, S, T, eps):
        return label_fraction_distance(S, T, self.num_classes)

    def _reserve(self, slot):
        self._rows.append()

    def _store(self, slot, window):
        self._rows.data[slot] = label_fractions(window, self.num_classes)

    def _query(self, window, eps):
        diff = self._rows.view() - label_fractions(window, self.num_classes)
        return (diff * diff).sum(1)


class FeatureWindowD1Bound(DiscrepancyBound):
    """Per-class approximate bottleneck distance between feature windows.

    A class present in only one window contributes ``eps + 1``, where ``eps``
    is the threshold in force at query time.
    """

    kind = "feature_window_D1"

    def __init__(self, window=None, num_classes=2, penalty=True):
        super().__init__(window, num_classes)
        self.penalty = penalty
        self._feat = None
        self._lab = _Rows((1,), dtype=np.int64, fill=-1)
        self._len = _Rows((), dtype=np.int64, fill=0)

    def _penalty(self, eps):
        return float(eps) + 1.0 if self.penalty else np.nan

    def distance(self, S, T, eps):
        return feature_window_d1(S, T, self.num_classes, None if not self.penalty else float(eps) + 1.0)

    def _reserve(self, slot):
        self._lab.append()
        self._len.append()
        if self._feat is not None:
            self._feat.append()

    def _store(self, slot, window):
        m, d = window.features.shape
        if self._feat is None:
            self._feat = _Rows((max(m, 1), d))
            while self._feat.n < self._lab.n:
                self._feat.append()
        self._feat.widen(1, m)
        self._lab.widen(1, m)
        self._feat.data[slot, :m] = window.features
        self._lab.data[slot, :] = -1
        self._lab.data[slot, :m] = window.labels
        self._len.data[slot] = m

    def _query(self, window, eps):
        out = kernels.class_window_to_anchors(
            window.features, window.labels, self._feat.view(), self._lab.view(),
            self._len.view(), self.num_classes, self._penalty(eps))
        if np.isnan(out).any():
            raise EvaluationError("no class is present in both windows and the penalty is disabled")
        return out


class AlignedWindowBound(DiscrepancyBound):
    """Average same-position feature distance over fixed-length windows.

    During bootstrap the most recent ``min(|S|, |T|)`` positions are compared.
    """

    kind = "aligned_window"
    pseudometric = False

    def __init__(self, window=None, num_classes=2):
        super().__init__(window, num_classes)
        self._rows = None
        self._len = _Rows((), dtype=np.int64)

    def _aligned(self, window):
        w = self.window_length
        out = np.zeros((w, window.step_features.shape[1]))
        L = len(window)
        if L:
            out[w - L:] = window.step_features[-w:]
        return out, min(L, w)

    def distance(self, S, T, eps):
        L = min(len(S), len(T))
        if L == 0:
            raise PreconditionError("history window is empty")
        return fixed_window_d2_aligned(
            HistoryWindow(S.features, S.labels, S.step_features[len(S) - L:]),
            HistoryWindow(T.features, T.labels, T.step_features[len(T) - L:]))

    def _reserve(self, slot):
        self._len.append()
        if self._rows is not None:
            self._rows.append()

    def _store(self, slot, window):
        a, L = self._aligned(window)
        if self._rows is None:
            self._rows = _Rows(a.shape)
            while self._rows.n < self._len.n:
                self._rows.append()
        self._rows.data[slot] = a
        self._len.data[slot] = L

    def _query(self, window, eps):
        q, L = self._aligned(window)
        return kernels.aligned_to_anchors(q, L, self._rows.view(), self._len.view())


class PrecomputedBound(DiscrepancyBound):
    """Reads ``M(t, tau)`` from a dense matrix; row ``i`` is step ``i + 1``."""

    kind = "precomputed_matrix"

    def __init__(self, matrix, window=None, num_classes=2):
        super().__init__(None, num_classes)
        D = np.asarray(matrix, dtype=np.float64)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ConfigError(f"bound matrix must be square, got shape {D.shape}")
        if np.any(D < 0) or not np.all(np.isfinite(D)):
            raise ConfigError("bound matrix entries must be finite and non-negative")
        self.D = D
        self._idx = _Rows((), dtype=np.int64)

    def add_anchor(self, t):
        self._check(t)
        self.anchors.append(t)
        self._idx.data[self._idx.append()] = t - 1

    def _check(self, t):
        if t > self.D.shape[0]:
            raise PreconditionError(f"step {t} is beyond the {self.D.shape[0]}x{self.D.shape[0]} bound matrix")

    def advance(self, members):
        self.steps.append(tuple(members))

    def to_anchors(self, t, eps):
        self._check(t)
        return self.D[t - 1, self._idx.view()]

    def value(self, t, tau, eps=0.0):
        return float(self.D[t - 1, tau - 1])

    def matrix(self, n, eps=0.0):
        return self.D[:n, :n].copy()


def make_bound(kind: str, window=None, num_classes=2, matrix=None, penalty=True) -> DiscrepancyBound:
    kind = {"markov-indicator": "markov_indicator", "d1": "feature_window_D1",
            "d2": "label_window_D2", "aligned": "aligned_window",
            "matrix": "precomputed_matrix"}.get(kind, kind)
    if kind == "zero":
        return ZeroBound(window, num_classes)
    if kind == "markov_indicator":
        return MarkovIndicatorBound(None, num_classes)
    if kind == "feature_window_D1":
        return FeatureWindowD1Bound(window, num_classes, penalty=penalty)
    if kind == "label_window_D2":
        return LabelWindowD2Bound(window, num_classes)
    if kind == "aligned_window":
        return AlignedWindowBound(window, num_classes)
    if kind == "precomputed_matrix":
        if matrix is None:
            raise ConfigError("precomputed_matrix bound needs a matrix")
        return PrecomputedBound(matrix, None, num_classes)
    raise ConfigError(f"unknown bound kind {kind!r}; expected one of {BOUND_KINDS}")
