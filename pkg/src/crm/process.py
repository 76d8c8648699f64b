"""Synthetic stochastic processes and CSV ingestion.

Every generator draws from a Philox counter-based generator seeded from the
descriptor, so a ``(descriptor, n)`` pair always yields the same sequence.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, RowError, SchemaError

KINDS = ("iid", "markov_label", "regime_drift", "csv")
_ROW_TOL = 1e-9


@dataclass(frozen=True)
class Observation:
    features: np.ndarray
    label: int
    time_index: int

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64).reshape(-1))


@dataclass(frozen=True)
class Chunk:
    """Observations revealed together at one time step."""

    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ConfigError("a chunk needs at least one observation")
        t = members[0].time_index
        if any(m.time_index != t for m in members):
            raise ConfigError("chunk members must share one time_index")
        object.__setattr__(self, "members", members)

    @property
    def time_index(self):
        return self.members[0].time_index

    def __len__(self):
        return len(self.members)


def members_of(item) -> tuple:
    """Return the observations carried by a sequence item."""
    if isinstance(item, Chunk):
        return item.members
    return (item,)


@dataclass
class ProcessDescriptor:
    kind: str
    parameters: dict = field(default_factory=dict)
    num_classes: int = 2
    feature_dim: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown process kind {self.kind!r}; expected one of {KINDS}")
        if self.num_classes < 1:
            raise ConfigError("num_classes must be >= 1")
        if self.feature_dim < 0:
            raise ConfigError("feature_dim must be >= 0")

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(int(self.seed) & (2**64 - 1)))


def _probability_vector(p, k, name="class_probs"):
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (k,):
        raise ConfigError(f"{name} must have {k} entries, got shape {p.shape}")
    if np.any(p < 0) or np.any(p > 1) or abs(p.sum() - 1.0) > _ROW_TOL:
        raise ConfigError(f"{name} is not a probability vector: {p.tolist()}")
    return p


def _stochastic_matrix(P, k):
    P = np.asarray(P, dtype=np.float64)
    if P.shape != (k, k):
        raise ConfigError(f"transition matrix must be {k}x{k}, got shape {P.shape}")
    if np.any(P < 0) or np.any(P > 1):
        raise ConfigError("transition probabilities must lie in [0, 1]")
    bad = np.flatnonzero(np.abs(P.sum(1) - 1.0) > _ROW_TOL)
    if bad.size:
        raise ConfigError(f"transition row {int(bad[0])} does not sum to 1")
    return P


def _default_means(k, d):
    return np.arange(k, dtype=np.float64)[:, None] * np.ones((1, d))


def _observations(labels, features):
    return [Observation(features[t], int(labels[t]), t + 1) for t in range(len(labels))]


def _check_kind(descriptor, kind):
    if descriptor.kind != kind:
        raise ConfigError(f"descriptor kind is {descriptor.kind!r}, expected {kind!r}")


def gen_iid(descriptor: ProcessDescriptor, n: int) -> list[Observation]:
    """Independent draws from one fixed joint distribution.

    Parameters: ``class_probs`` (default uniform), and when ``feature_dim > 0``
    optional ``means`` (K x d, default class index on every axis) and ``noise``
    (Gaussian standard deviation, default 1).
    """
    _check_kind(descriptor, "iid")
    k, d = descriptor.num_classes, descriptor.feature_dim
    params = descriptor.parameters
    probs = _probability_vector(params.get("class_probs", np.full(k, 1.0 / k)), k)
    rng = descriptor.rng()
    labels = rng.choice(k, size=n, p=probs)
    if d == 0:
        features = np.empty((n, 0))
    else:
        means = np.asarray(params.get("means", _default_means(k, d)), dtype=np.float64)
        if means.shape != (k, d):
            raise ConfigError(f"means must be {k}x{d}")
        features = means[labels] + float(params.get("noise", 1.0)) * rng.standard_normal((n, d))
    return _observations(labels, features)


def gen_markov_label(descriptor: ProcessDescriptor, n: int) -> list[Observation]:
    """Label sequence that is itself a Markov chain over the K classes.

    Parameters: ``transition`` (K x K row-stochastic), ``start`` (default 0),
    ``encode_label`` (bool; one-hot features, requires ``feature_dim == K``).
    """
    _check_kind(descriptor, "markov_label")
    k, d = descriptor.num_classes, descriptor.feature_dim
    params = descriptor.parameters
    if "transition" not in params:
        raise ConfigError("markov_label needs a 'transition' matrix")
    P = _stochastic_matrix(params["transition"], k)
    start = int(params.get("start", 0))
    if not 0 <= start < k:
        raise ConfigError(f"start state {start} outside 0..{k - 1}")
    if n <= 0:
        return []
    rng = descriptor.rng()
    cum = np.cumsum(P, axis=1)
    labels = kernels.markov_labels(cum, start, rng.random(n - 1))
    if params.get("encode_label", False):
        if d != k:
            raise ConfigError("encode_label requires feature_dim == num_classes")
        features = np.eye(k)[labels]
    elif d == 0:
        features = np.empty((n, 0))
    else:
        raise ConfigError("markov_label features must be empty unless encode_label is set")
    return _observations(labels, features)


def symmetric_chain(num_states: int, stay: float) -> np.ndarray:
    """Transition matrix that keeps its state with probability ``stay``."""
    if num_states < 2:
        raise ConfigError("a symmetric chain needs at least two states")
    if not 0.0 <= stay <= 1.0:
        raise ConfigError("stay probability must lie in [0, 1]")
    off = (1.0 - stay) / (num_states - 1)
    P = np.full((num_states, num_states), off)
    np.fill_diagonal(P, stay)
    return P


def gen_regime_drift(descriptor: ProcessDescriptor, n: int) -> list[Observation]:
    """Gaussian class-conditionals whose means switch regime every ``period`` steps.

    Parameters: ``means`` (R x K x d), ``period``, ``noise`` (default 1),
    ``class_probs`` (default uniform).  Regime at step t is
    ``((t - 1) // period) % R``.
    """
    _check_kind(descriptor, "regime_drift")
    k, d = descriptor.num_classes, descriptor.feature_dim
    params = descriptor.parameters
    period = int(params.get("period", 0))
    if period <= 0:
        raise ConfigError("regime period must be positive")
    if "means" not in params:
        raise ConfigError("regime_drift needs per-regime 'means'")
    means = np.asarray(params["means"], dtype=np.float64)
    if means.ndim != 3 or means.shape[1:] != (k, d):
        raise ConfigError(f"means must have shape (regimes, {k}, {d})")
    probs = _probability_vector(params.get("class_probs", np.full(k, 1.0 / k)), k)
    rng = descriptor.rng()
    labels = rng.choice(k, size=n, p=probs)
    noise = rng.standard_normal((n, d))
    regime = (np.arange(n) // period) % means.shape[0]
    features = means[regime, labels] + float(params.get("noise", 1.0)) * noise
    return _observations(labels, features)


def swapped_regimes(separation: float, feature_dim: int = 2) -> np.ndarray:
    """Two binary regimes whose class means trade places."""
    a = np.zeros(feature_dim)
    b = np.full(feature_dim, float(separation))
    return np.array([[a, b], [b, a]])


@dataclass
class CsvSchema:
    label: str
    features: Sequence[str] = ()

    @classmethod
    def coerce(cls, schema) -> "CsvSchema":
        if isinstance(schema, cls):
            return schema
        if isinstance(schema, Mapping):
            return cls(label=schema["label"], features=tuple(schema.get("features", ())))
        raise ConfigError(f"cannot interpret schema {schema!r}")


def ingest_csv(path, schema, chunk_key: str | None = None) -> list[Chunk]:
    """Read a headed CSV into chunks, one per time step.

    Rows sharing a ``chunk_key`` value form one chunk; chunks are ordered by
    first appearance of their key.  Without a key every row is its own chunk.
    """
    schema = CsvSchema.coerce(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(schema.label) from None
        for col in (schema.label, *schema.features, *([chunk_key] if chunk_key else [])):
            if col not in header:
                raise SchemaError(col)
        li = header.index(schema.label)
        fi = [header.index(c) for c in schema.features]
        ki = header.index(chunk_key) if chunk_key else None

        groups: dict = {}
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise RowError(line, f"expected {len(header)} cells, got {len(row)}")
            try:
                x = np.array([float(row[i]) for i in fi], dtype=np.float64)
            except ValueError as exc:
                raise RowError(line, f"feature cell is not a real number ({exc})") from None
            cell = row[li].strip()
            if not cell.isdigit():
                raise RowError(line, f"label {cell!r} is not a non-negative integer")
            key = row[ki] if ki is not None else line
            groups.setdefault(key, []).append((x, int(cell)))

    return [
        Chunk(tuple(Observation(x, y, t) for x, y in rows))
        for t, rows in enumerate(groups.values(), start=1)
    ]


GENERATORS = {
    "iid": gen_iid,
    "markov_label": gen_markov_label,
    "regime_drift": gen_regime_drift,
}


def generate(descriptor: ProcessDescriptor, n: int) -> list[Observation]:
    try:
        gen = GENERATORS[descriptor.kind]
    except KeyError:
        raise ConfigError(f"{descriptor.kind!r} is not a synthetic process") from None
    return gen(descriptor, n)
