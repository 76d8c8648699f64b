"""The meta-algorithm: a growing pool of subroutines anchored at time steps.

At step ``t`` every subroutine whose anchor is within the threshold under the
discrepancy bound is eligible; if none is, a new subroutine is anchored at
``t``.  The closest eligible subroutine supplies the prediction, and once
``z_t`` is revealed every eligible subroutine is updated with it.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .discrepancy import DiscrepancyBound
from .errors import ConfigError, ProtocolError
from .process import members_of
from .subroutine import ConversionSpec, Learner, LearnerSpec

TRACE_HEADER = ("step", "chosen_id", "created", "pool_size", "prediction", "label", "loss", "epsilon")
DEFAULT_DECAY = 0.25


@dataclass(frozen=True)
class EpsilonSchedule:
    """Constant threshold, or ``eps0 * n ** -gamma`` for the decaying kind."""

    kind: str = "constant"
    eps0: float = 0.5
    gamma: float = DEFAULT_DECAY

    def __post_init__(self):
        if self.kind not in ("constant", "decaying"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "decaying":
            if self.eps0 <= 0:
                raise ConfigError("decaying schedule needs eps0 > 0")
            if not 0 < self.gamma <= 1:
                raise ConfigError("decay exponent must lie in (0, 1]")
        elif self.eps0 < 0:
            raise ConfigError("threshold must be non-negative")

    @classmethod
    def coerce(cls, threshold) -> "EpsilonSchedule":
        if isinstance(threshold, cls):
            return threshold
        return cls("constant", float(threshold))

    def __call__(self, n: int) -> float:
        if self.kind == "constant":
            return self.eps0
        return self.eps0 * n ** (-self.gamma)


@dataclass
class SubroutineRecord:
    id: int
    anchor: int
    learner: Learner
    conversion: object
    update_steps: list | None = None
    creation_values: np.ndarray = field(default_factory=lambda: np.empty(0))
    parent: int | None = None

    @property
    def update_count(self) -> int:
        return self.learner.update_count


@dataclass
class StepTrace:
    step: int
    chosen_id: int
    created: bool
    pool_size: int
    prediction: tuple
    label: tuple
    loss: float
    epsilon: float
    bound_value: float = 0.0
    update_set: tuple = ()

    def row(self):
        return (
            self.step,
            self.chosen_id,
            int(self.created),
            self.pool_size,
            " ".join(map(str, self.prediction)),
            " ".join(map(str, self.label)),
            repr(float(self.loss)),
            repr(float(self.epsilon)),
        )


@dataclass
class _Pending:
    step: int
    eps: float
    update_set: list
    active: SubroutineRecord
    created: bool
    value: float
    prediction: np.ndarray


class Macro:
    """One instance of the meta-algorithm.

    Use :meth:`predict` before each observation is revealed and :meth:`observe`
    after; the pair makes one step.
    """

    def __init__(
        self,
        bound: DiscrepancyBound,
        learner: LearnerSpec,
        threshold=0.5,
        conversion: ConversionSpec | None = None,
        warm_start: bool = True,
        diagnostics: bool = False,
    ):
        self.bound = bound
        self.learner_spec = learner
        self.conversion_spec = conversion or ConversionSpec()
        self.schedule = EpsilonSchedule.coerce(threshold)
        self.warm_start = warm_start
        self.diagnostics = diagnostics
        self.pool: list[SubroutineRecord] = []
        self.n = 0
        self._pending: _Pending | None = None

    @property
    def pool_size(self) -> int:
        return len(self.pool)

    def _create(self, t, values):
        learner = self.learner_spec.build()
        parent = None
        if self.warm_start and self.pool:
            parent = int(np.argmin(values))
            learner.warm_start(self.pool[parent].learner)
        record = SubroutineRecord(
            id=len(self.pool) + 1,
            anchor=t,
            learner=learner,
            conversion=self.conversion_spec.build(learner),
            update_steps=[] if self.diagnostics else None,
            creation_values=np.asarray(values, dtype=np.float64).copy(),
            parent=None if parent is None else parent + 1,
        )
        self.pool.append(record)
        self.bound.add_anchor(t)
        return record

    def predict(self, X) -> np.ndarray:
        """Choose the active subroutine for the next step and predict ``X``."""
        if self._pending is not None:
            raise ProtocolError("predict called twice without observe")
        t = self.n + 1
        eps = self.schedule(t)
        values = self.bound.to_anchors(t, eps)
        close = np.flatnonzero(values <= eps)
        if close.size == 0:
            record = self._create(t, values)
            update_set, active, created, value = [record], record, True, 0.0
        else:
            # pool is in creation order, so argmin ties resolve to the smallest anchor
            best = close[np.argmin(values[close])]
            update_set = [self.pool[j] for j in close]
            active, created, value = self.pool[best], False, float(values[best])
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        prediction = active.conversion.predict(X)
        self._pending = _Pending(t, eps, update_set, active, created, value, prediction)
        return prediction

    def observe(self, item) -> StepTrace:
        """Reveal the observation (or chunk) for the pending step and update."""
        p = self._pending
        if p is None:
            raise ProtocolError("observe called without a pending prediction")
        members = members_of(item)
        labels = tuple(m.label for m in members)
        if len(labels) == 1:
            loss = float(p.prediction[0] != labels[0])
        else:
            loss = float(np.mean(p.prediction != np.asarray(labels)))
        for record in p.update_set:
            conv, learner = record.conversion, record.learner
            for m in members:
                conv.before_update(m.features, m.label)
                learner.update(m.features, m.label)
                conv.after_update()
            if record.update_steps is not None:
                record.update_steps.extend([p.step] * len(members))
        self.bound.advance(members)
        self.n = p.step
        self._pending = None
        return StepTrace(
            step=p.step,
            chosen_id=p.active.id,
            created=p.created,
            pool_size=len(self.pool),
            prediction=tuple(int(v) for v in p.prediction),
            label=labels,
            loss=loss,
            epsilon=p.eps,
            bound_value=p.value,
            update_set=tuple(r.id for r in p.update_set),
        )

    def step(self, item) -> StepTrace:
        members = members_of(item)
        self.predict(np.array([m.features for m in members]))
        return self.observe(item)

    def update_counts(self) -> dict:
        return {r.id: r.update_count for r in self.pool}


def diagnostics_k_m(traces, counts) -> tuple[int, int]:
    """Support size of the chosen ids and the smallest final update count on it."""
    support = {t.chosen_id for t in traces}
    if not support:
        return 0, 0
    return len(support), min(counts[j] for j in support)


@dataclass
class RunResult:
    traces: list
    summary: dict
    macro: Macro | None = None

    def write_trace(self, path):
        write_trace_csv(self.traces, path)

    def write_summary(self, path):
        write_json(self.summary, path)


def summarize(traces, counts, extra=None) -> dict:
    k, m = diagnostics_k_m(traces, counts)
    losses = [t.loss for t in traces]
    summary = {
        "n": len(traces),
        "error_rate": math.fsum(losses) / len(losses) if losses else 0.0,
        "pool_size": traces[-1].pool_size if traces else 0,
        "k_support": k,
        "m_min_updates": m,
        "update_counts": {str(j): int(s) for j, s in counts.items()},
    }
    if extra:
        summary.update(extra)
    return summary


def run(sequence, macro: Macro) -> RunResult:
    """Prequential run: predict each step from the past, then reveal it."""
    if len(sequence) == 0:
        raise ConfigError("cannot run on an empty sequence")
    traces = [macro.step(item) for item in sequence]
    counts = macro.update_counts()
    return RunResult(traces, summarize(traces, counts), macro)


def run_bare(sequence, learner: LearnerSpec, conversion: ConversionSpec | None = None) -> list[StepTrace]:
    """One learner trained on everything; the marginal baseline."""
    conversion = conversion or ConversionSpec()
    model = learner.build()
    conv = conversion.build(model)
    traces = []
    for t, item in enumerate(sequence, start=1):
        members = members_of(item)
        pred = conv.predict(np.array([m.features for m in members]))
        labels = tuple(m.label for m in members)
        for m in members:
            conv.before_update(m.features, m.label)
            model.update(m.features, m.label)
            conv.after_update()
        traces.append(StepTrace(t, 1, t == 1, 1, tuple(int(v) for v in pred), labels,
                                float(np.mean(pred != np.asarray(labels))), 0.0))
    return traces


def write_trace_csv(traces, path, header=TRACE_HEADER, rows=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows if rows is not None else (t.row() for t in traces):
            w.writerow(r)


def write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
