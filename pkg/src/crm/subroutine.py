"""Incremental learners and online-to-batch conversions.

A learner is updated one observation at a time and can replay any of its
past parameter vectors (``params``) for prediction.  Conversions turn the
trajectory of parameter vectors into the hypothesis that is actually output:

* ``last``: the current parameters;
* ``averaging``: the running mean of all post-update parameter vectors;
* ``score_based``: the snapshot minimizing held-out loss plus a confidence
  penalty that shrinks with the number of points it was validated on.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, PreconditionError

LOGISTIC_SCALE = math.log(100.0)
LEARNER_KINDS = ("sgd_logistic", "gaussian_nb", "finite_erm")
CONVERSION_MODES = ("last", "averaging", "score_based")
LOSS_KINDS = ("zero_one", "logistic")
DEFAULT_LR = 0.1
DEFAULT_DELTA = 0.05


def sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def logistic_loss_raw(weights, x, y) -> float | np.ndarray:
    """Unclipped binary log-loss ``-log P(y | x, w)`` of a linear model.

    ``x`` must already carry the bias coordinate; ``weights`` may be a single
    vector or a stack of vectors (one loss per row).
    """
    z = np.asarray(weights) @ np.asarray(x)
    return np.logaddexp(0.0, -z) if y == 1 else np.logaddexp(0.0, z)


def clip_logistic(raw):
    """Map a log-loss into [0, 1]; un-saturated for probabilities in [0.01, 0.99]."""
    return np.minimum(1.0, np.asarray(raw) / LOGISTIC_SCALE)


def zero_one_loss(prediction, label) -> float:
    return float(np.mean(np.asarray(prediction) != np.asarray(label)))


def _rows(X):
    """A single observation's features become a one-row matrix."""
    X = np.asarray(X, dtype=np.float64)
    return X.reshape(1, -1) if X.ndim == 1 else X


def _augment(X):
    X = _rows(X)
    return np.hstack([X, np.ones((X.shape[0], 1))])


class Learner:
    """Common bookkeeping for incremental learners."""

    kind = "abstract"

    def __init__(self, n_features: int, n_classes: int):
        if n_classes < 1:
            raise ConfigError("n_classes must be >= 1")
        self.n_features = int(n_features)
        self.n_classes = int(n_classes)
        self.update_count = 0

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.n_features:
            raise PreconditionError(
                f"{self.kind}: expected {self.n_features} features, got {x.shape[0]}")
        return x

    def predict(self, X) -> np.ndarray:
        return self.predict_with(self.params(), X)

    def update(self, x, y) -> None:
        self._update(self._check(x), int(y))
        self.update_count += 1

    def predict_snapshots(self, P, x) -> np.ndarray:
        """Prediction on one point for every row of a snapshot matrix."""
        return np.array([self.predict_with(p, x[None, :])[0] for p in P], dtype=np.int64)

    def loss_snapshots(self, P, x, y, loss="zero_one") -> np.ndarray:
        if loss != "zero_one":
            raise ConfigError(f"{self.kind} supports only the zero_one loss")
        return (self.predict_snapshots(P, x) != y).astype(np.float64)

    def params(self) -> np.ndarray:
        raise NotImplementedError

    def predict_with(self, params, X) -> np.ndarray:
        raise NotImplementedError

    def warm_start(self, parent: "Learner") -> None:
        raise NotImplementedError

    def _update(self, x, y):
        raise NotImplementedError


class SGDLogistic(Learner):
    """Logistic regression trained by plain SGD on the log-likelihood.

    Binary problems keep one weight vector; more classes use one-vs-rest.
    The last weight of every row multiplies the constant bias feature.
    """

    kind = "sgd_logistic"

    def __init__(self, n_features, n_classes=2, lr=DEFAULT_LR):
        super().__init__(n_features, n_classes)
        if lr < 0:
            raise ConfigError("learning rate must be non-negative")
        self.lr = float(lr)
        rows = 1 if self.n_classes <= 2 else self.n_classes
        self.weights = np.zeros((rows, self.n_features + 1))

    def _update(self, x, y):
        xt = np.append(x, 1.0)
        W = self.weights
        if W.shape[0] == 1:
            W[0] += self.lr * (y - sigmoid(W[0] @ xt)) * xt
        else:
            target = (np.arange(self.n_classes) == y).astype(np.float64)
            W += self.lr * np.outer(target - sigmoid(W @ xt), xt)

    def params(self):
        return self.weights.ravel().copy()

    def set_params(self, params):
        self.weights = np.asarray(params, dtype=np.float64).reshape(self.weights.shape).copy()

    def _decide(self, scores):
        if scores.shape[-1] == 1:
            return (scores[..., 0] > 0).astype(np.int64)
        return np.argmax(scores, axis=-1).astype(np.int64)

    def predict_with(self, params, X):
        W = np.asarray(params).reshape(self.weights.shape)
        return self._decide(_augment(X) @ W.T)

    def predict_snapshots(self, P, x):
        W = np.asarray(P).reshape(-1, *self.weights.shape)
        return self._decide(W @ np.append(x, 1.0))

    def raw_loss(self, params, x, y):
        """Unclipped log-loss of parameter vector(s) on one observation."""
        xt = np.append(np.asarray(x, dtype=np.float64), 1.0)
        W = np.asarray(params).reshape(-1, *self.weights.shape)
        if W.shape[1] == 1:
            return logistic_loss_raw(W[:, 0, :], xt, int(y))
        logp = -np.logaddexp(0.0, -(W @ xt))
        return -(logp[:, int(y)] - np.log(np.exp(logp).sum(1)))

    def loss_snapshots(self, P, x, y, loss="zero_one"):
        if loss == "logistic":
            return clip_logistic(self.raw_loss(P, x, y))
        return super().loss_snapshots(P, x, y, loss)

    def warm_start(self, parent):
        self.weights = parent.weights.copy()


class GaussianNB(Learner):
    """Nearest class mean with running per-class means.

    Ties in distance go to the class seen most often, then to the smallest
    index; with no features this makes the learner a majority-class predictor.
    """

    kind = "gaussian_nb"

    def __init__(self, n_features, n_classes=2):
        super().__init__(n_features, n_classes)
        self.means = np.zeros((self.n_classes, self.n_features))
        self.counts = np.zeros(self.n_classes)

    def _update(self, x, y):
        if not 0 <= y < self.n_classes:
            raise PreconditionError(f"label {y} outside 0..{self.n_classes - 1}")
        self.counts[y] += 1
        self.means[y] += (x - self.means[y]) / self.counts[y]

    def params(self):
        return np.concatenate([self.means.ravel(), self.counts])

    def _split(self, P):
        P = np.asarray(P)
        k, d = self.n_classes, self.n_features
        return P[..., : k * d].reshape(*P.shape[:-1], k, d), P[..., k * d:]

    @staticmethod
    def _nearest(d2, counts):
        seen = counts > 0
        d2 = np.where(seen, d2, np.inf)
        best = d2.min(axis=-1, keepdims=True)
        rank = np.where(seen & (d2 == best), counts, -1.0)
        return np.where(seen.any(axis=-1), np.argmax(rank, axis=-1), 0).astype(np.int64)

    def predict(self, X):
        return self._predict(self.means, self.counts, X)

    def predict_with(self, params, X):
        return self._predict(*self._split(params), X)

    def _predict(self, means, counts, X):
        X = _rows(X)
        d2 = ((X[:, None, :] - means[None]) ** 2).sum(-1)
        return self._nearest(d2, np.broadcast_to(counts, d2.shape))

    def predict_snapshots(self, P, x):
        means, counts = self._split(P)
        d2 = ((means - np.asarray(x)[None, None, :]) ** 2).sum(-1)
        return self._nearest(d2, counts)

    def warm_start(self, parent):
        # inherited means count as at most one observation per class
        self.means = parent.means.copy()
        self.counts = np.minimum(parent.counts, 1.0)


class ConstantHypothesis:
    def __init__(self, label):
        self.label = int(label)

    def __call__(self, X):
        return np.full(np.atleast_2d(X).shape[0], self.label, dtype=np.int64)

    def __repr__(self):
        return f"ConstantHypothesis({self.label})"


class StumpHypothesis:
    """Predicts ``above`` when ``x[feature] > threshold``, else ``below``."""

    def __init__(self, feature, threshold, above=1, below=0):
        self.feature, self.threshold = int(feature), float(threshold)
        self.above, self.below = int(above), int(below)

    def __call__(self, X):
        X = np.atleast_2d(X)
        return np.where(X[:, self.feature] > self.threshold, self.above, self.below).astype(np.int64)

    def __repr__(self):
        return f"StumpHypothesis({self.feature}, {self.threshold}, {self.above}, {self.below})"


def default_hypotheses(n_classes, n_features=0, thresholds=()):
    hyps = [ConstantHypothesis(c) for c in range(n_classes)]
    for f in range(n_features):
        for th in thresholds:
            hyps += [StumpHypothesis(f, th, 1, 0), StumpHypothesis(f, th, 0, 1)]
    return hyps


class FiniteERM(Learner):
    """Exact empirical risk minimization over a finite hypothesis list (0/1 loss)."""

    kind = "finite_erm"

    def __init__(self, hypotheses: Sequence[Callable], n_features=0, n_classes=2):
        super().__init__(n_features, n_classes)
        self.hypotheses = list(hypotheses)
        if not self.hypotheses:
            raise ConfigError("finite_erm needs a nonempty hypothesis list")
        self.cumulative = np.zeros(len(self.hypotheses))

    def _outputs(self, X):
        return np.stack([h(X) for h in self.hypotheses])

    def _update(self, x, y):
        self.cumulative += self._outputs(x[None, :])[:, 0] != y

    def params(self):
        return self.cumulative.copy()

    def best(self, params=None):
        return int(np.argmin(self.cumulative if params is None else params))

    def predict_with(self, params, X):
        X = _rows(X)
        return self.hypotheses[self.best(params)](X)

    def predict_snapshots(self, P, x):
        outs = self._outputs(np.asarray(x)[None, :])[:, 0]
        return outs[np.argmin(np.asarray(P), axis=1)]

    def warm_start(self, parent):
        self.cumulative = parent.cumulative / max(parent.update_count, 1)


def confidence_term(s: int, t, delta: float):
    """Confidence width ``sqrt(log(s^3 (s+1) / delta) / (2 (t+1)))``.

    ``t`` may be an array.  A log argument below 1 is clamped to 1 with a
    warning.
    """
    if delta <= 0:
        raise ConfigError("delta must be positive")
    if s < 1:
        raise PreconditionError("snapshot count must be >= 1")
    arg = float(s) ** 3 * (s + 1) / delta
    if arg < 1.0:
        warnings.warn(f"confidence log argument {arg:.3g} < 1 clamped to 1", RuntimeWarning)
        arg = 1.0
    return np.sqrt(math.log(arg) / (2.0 * (np.asarray(t, dtype=np.float64) + 1.0)))


def score_based_select(future_loss_sums, s: int, delta: float) -> int:
    """Index (1-based) of the snapshot with the lowest score.

    ``future_loss_sums[i - 1]`` is the summed loss of snapshot ``i`` on the
    points ``i+1..s``.  Snapshot ``s`` has no held-out points and is never
    scored; with ``s == 1`` the only snapshot is returned.
    """
    if s < 1:
        raise PreconditionError("score-based selection needs at least one snapshot")
    if s == 1:
        return 1
    remaining = s - np.arange(1, s)
    u = np.asarray(future_loss_sums[: s - 1], dtype=np.float64) / remaining
    u = u + confidence_term(s, remaining, delta)
    return int(np.argmin(u)) + 1


def empirical_regret(loss_stream, oracle_losses) -> float:
    a = np.asarray(loss_stream, dtype=np.float64)
    b = np.asarray(oracle_losses, dtype=np.float64)
    if a.shape != b.shape:
        raise PreconditionError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(a.sum() - b.sum())


class LastIterate:
    mode = "last"

    def __init__(self, learner):
        self.learner = learner

    def before_update(self, x, y):
        pass

    def after_update(self):
        pass

    def output(self):
        return self.learner.params()

    def predict(self, X):
        return self.learner.predict(X)


class Averaging(LastIterate):
    """Running mean of the post-update parameter vectors."""

    mode = "averaging"

    def __init__(self, learner):
        if not isinstance(learner, SGDLogistic):
            raise ConfigError("averaging conversion requires the sgd_logistic learner")
        super().__init__(learner)
        self.mean = learner.params()
        self.count = 0

    def after_update(self):
        self.count += 1
        self.mean += (self.learner.params() - self.mean) / self.count

    def output(self):
        return self.mean.copy()

    def predict(self, X):
        return self.learner.predict_with(self.mean, X)


class ScoreBased(LastIterate):
    """Keeps every snapshot and its summed loss on later points."""

    mode = "score_based"

    def __init__(self, learner, delta=DEFAULT_DELTA, loss="zero_one"):
        super().__init__(learner)
        if delta <= 0 or delta > 1:
            raise ConfigError("delta must lie in (0, 1]")
        if loss not in LOSS_KINDS:
            raise ConfigError(f"unknown loss {loss!r}")
        self.delta = float(delta)
        self.loss = loss
        width = learner.params().shape[0]
        self._snaps = np.empty((16, width))
        self.future_sums = np.zeros(16)
        self.s = 0

    @property
    def snapshots(self):
        return self._snaps[: self.s]

    def before_update(self, x, y):
        if self.s:
            self.future_sums[: self.s] += self.learner.loss_snapshots(self.snapshots, x, y, self.loss)

    def after_update(self):
        if self.s == self._snaps.shape[0]:
            self._snaps = np.concatenate([self._snaps, np.empty_like(self._snaps)])
            self.future_sums = np.concatenate([self.future_sums, np.zeros_like(self.future_sums)])
        self._snaps[self.s] = self.learner.params()
        self.s += 1

    def record_losses(self, losses):
        """Feed one new point's losses for snapshots ``1..s`` without a learner."""
        self.future_sums[: self.s] += np.asarray(losses)[: self.s]

    def select(self) -> int:
        if self.s == 0:
            return 0
        return score_based_select(self.future_sums, self.s, self.delta)

    def output(self):
        i = self.select()
        return self.learner.params() if i == 0 else self._snaps[i - 1].copy()

    def predict(self, X):
        i = self.select()
        if i == 0:
            return self.learner.predict(X)
        return self.learner.predict_with(self._snaps[i - 1], X)


@dataclass
class LearnerSpec:
    """Recipe for fresh learners; one per pooled subroutine."""

    kind: str = "gaussian_nb"
    n_features: int = 0
    n_classes: int = 2
    lr: float = DEFAULT_LR
    hypotheses: list = field(default_factory=list)

    def __post_init__(self):
        aliases = {"sgd": "sgd_logistic", "gnb": "gaussian_nb", "erm": "finite_erm"}
        self.kind = aliases.get(self.kind, self.kind)
        if self.kind not in LEARNER_KINDS:
            raise ConfigError(f"unknown subroutine {self.kind!r}; expected one of {LEARNER_KINDS}")
        if self.kind == "sgd_logistic" and self.lr <= 0:
            raise ConfigError("learning rate must be positive")

    def build(self) -> Learner:
        if self.kind == "sgd_logistic":
            return SGDLogistic(self.n_features, self.n_classes, self.lr)
        if self.kind == "gaussian_nb":
            return GaussianNB(self.n_features, self.n_classes)
        return FiniteERM(self.hypotheses or default_hypotheses(self.n_classes),
                         self.n_features, self.n_classes)


@dataclass
class ConversionSpec:
    mode: str = "last"
    delta: float = DEFAULT_DELTA
    loss: str = "zero_one"

    def __post_init__(self):
        self.mode = {"score": "score_based", "average": "averaging"}.get(self.mode, self.mode)
        if self.mode not in CONVERSION_MODES:
            raise ConfigError(f"unknown conversion {self.mode!r}; expected one of {CONVERSION_MODES}")
        if self.delta <= 0 or self.delta > 1:
            raise ConfigError("delta must lie in (0, 1]")

    def build(self, learner):
        if self.mode == "averaging":
            return Averaging(learner)
        if self.mode == "score_based":
            return ScoreBased(learner, self.delta, self.loss)
        return LastIterate(learner)
