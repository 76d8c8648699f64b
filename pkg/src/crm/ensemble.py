"""Parameter-free threshold selection over parallel MACRO instances."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .macro import Macro, RunResult, summarize
from .process import members_of

COMBINERS = ("ftl", "ewa")

# default threshold grids for the feature-window and label-window bounds
D1_GRID = (0.15, 0.17, 0.19, 0.22, 0.25, 0.28, 0.31, 0.34, 0.37, 0.4, 0.45, 0.47)
D2_GRID = (0.005, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5)


def ftl_choose(cumulative_losses) -> int:
    """Index of the smallest cumulative loss (first one on ties)."""
    L = np.asarray(cumulative_losses, dtype=np.float64)
    if L.size == 0:
        raise ConfigError("FTL needs at least one member")
    return int(np.argmin(L))


def ewa_weights(cumulative_losses, eta: float) -> np.ndarray:
    if eta <= 0:
        raise ConfigError("EWA learning rate must be positive")
    z = -eta * np.asarray(cumulative_losses, dtype=np.float64)
    w = np.exp(z - z.max())
    return w / w.sum()


def default_eta(n_members: int, horizon: int | None = None) -> float:
    if horizon and n_members > 1:
        return math.sqrt(8.0 * math.log(n_members) / horizon)
    return 1.0


def weighted_vote(predictions, weights, n_classes) -> np.ndarray:
    """Per-position weighted majority over member predictions; ties to class 0."""
    P = np.asarray(predictions)
    votes = np.zeros((P.shape[1], n_classes))
    for member, w in zip(P, weights):
        votes[np.arange(P.shape[1]), member] += w
    return np.argmax(votes, axis=1).astype(np.int64)


class FollowTheLeader:
    name = "ftl"

    def __init__(self, n_members):
        self.cumulative = np.zeros(n_members)

    def choose(self) -> int:
        return ftl_choose(self.cumulative)

    def update(self, losses):
        self.cumulative += losses


class ExponentialWeights:
    """Hedge over members; :attr:`mixture_loss` accumulates ``<w_t, loss_t>``."""

    name = "ewa"

    def __init__(self, n_members, eta=1.0):
        if eta <= 0:
            raise ConfigError("EWA learning rate must be positive")
        self.eta = float(eta)
        self.cumulative = np.zeros(n_members)
        self.mixture_loss = 0.0

    def weights(self) -> np.ndarray:
        return ewa_weights(self.cumulative, self.eta)

    def update(self, losses):
        losses = np.asarray(losses, dtype=np.float64)
        self.mixture_loss += float(self.weights() @ losses)
        self.cumulative += losses


@dataclass
class EnsembleStep:
    step: int
    prediction: tuple
    label: tuple
    loss: float
    choice: int
    top_weight: float = 1.0

    def row(self, combiner):
        base = (self.step, " ".join(map(str, self.prediction)), " ".join(map(str, self.label)),
                repr(float(self.loss)))
        if combiner == "ftl":
            return base + (self.choice,)
        return base + (self.choice, repr(float(self.top_weight)))


def ensemble_header(combiner):
    base = ("step", "prediction", "label", "loss")
    return base + (("combiner_choice",) if combiner == "ftl" else ("top_weight_member", "top_weight"))


@dataclass
class EnsembleResult:
    combiner: str
    steps: list
    members: list
    summary: dict

    def rows(self):
        return [s.row(self.combiner) for s in self.steps]


def run_ensemble(sequence, members: list[Macro], combiner="ftl", eta=None,
                 sample=False, seed=0, n_classes=2) -> EnsembleResult:
    """Run every member prequentially and combine their predictions.

    FTL follows the member with the least cumulative loss so far; EWA takes a
    weighted majority vote (or samples one member when ``sample`` is set).
    Members are scored with one loss per step.
    """
    if not members:
        raise ConfigError("ensemble grid is empty")
    if combiner not in COMBINERS:
        raise ConfigError(f"unknown combiner {combiner!r}; expected one of {COMBINERS}")
    if len(sequence) == 0:
        raise ConfigError("cannot run on an empty sequence")
    K = len(members)
    if combiner == "ftl":
        comb = FollowTheLeader(K)
    else:
        comb = ExponentialWeights(K, default_eta(K, len(sequence)) if eta is None else eta)
    rng = np.random.Generator(np.random.Philox(seed))

    steps, member_traces = [], [[] for _ in members]
    for item in sequence:
        obs = members_of(item)
        X = np.array([m.features for m in obs])
        labels = np.array([m.label for m in obs])
        preds = np.stack([m.predict(X) for m in members])
        top_w = 1.0
        if combiner == "ftl":
            choice = comb.choose()
            pred = preds[choice]
        else:
            w = comb.weights()
            choice = int(np.argmax(w))
            top_w = float(w[choice])
            if sample:
                pred = preds[int(rng.choice(K, p=w))]
            else:
                pred = weighted_vote(preds, w, n_classes)
        losses = np.empty(K)
        for i, m in enumerate(members):
            tr = m.observe(item)
            member_traces[i].append(tr)
            losses[i] = tr.loss
        comb.update(losses)
        steps.append(EnsembleStep(len(steps) + 1, tuple(int(v) for v in pred), tuple(int(v) for v in labels),
                                  float(np.mean(pred != labels)), choice, top_w))

    member_results = [RunResult(tr, summarize(tr, m.update_counts()), m)
                      for tr, m in zip(member_traces, members)]
    losses = [s.loss for s in steps]
    summary = {
        "n": len(steps),
        "error_rate": math.fsum(losses) / len(losses),
        "combiner": combiner,
        "members": len(members),
        "thresholds": [m.schedule.eps0 for m in members],
        "member_error_rates": [r.summary["error_rate"] for r in member_results],
        "cumulative_member_losses": comb.cumulative.tolist(),
    }
    if combiner == "ewa":
        summary["eta"] = comb.eta
        summary["sample"] = bool(sample)
        summary["mixture_loss"] = comb.mixture_loss
    return EnsembleResult(combiner, steps, member_results, summary)
