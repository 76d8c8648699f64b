"""Covering numbers, pseudometric checks and report files.

Covers are internal (centers are drawn from the points) and balls are closed
(``distance <= eps``), matching the ``M <= eps`` closeness test of the pool.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, NotPseudometricError, PreconditionError
from .macro import TRACE_HEADER, write_json, write_trace_csv

EXACT_LIMIT = 20
SYMMETRY_TOL = 1e-12


def euclidean_matrix(points) -> np.ndarray:
    P = np.asarray(points, dtype=np.float64)
    if P.ndim == 1:
        P = P[:, None]
    return np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(-1))


def load_matrix_csv(path) -> np.ndarray:
    """Read ``n`` rows of ``n`` comma-separated reals (no header)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for line, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ConfigError(f"{path}: line {line} holds a non-numeric cell") from None
    D = np.array(rows, dtype=np.float64) if rows else np.empty((0, 0))
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ConfigError(f"{path}: distance matrix must be square")
    return D


def save_matrix_csv(D, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(D):
            w.writerow([repr(float(v)) for v in row])


@dataclass
class PseudometricReport:
    valid: bool
    violation: str | None = None
    where: tuple = ()

    def describe(self):
        if self.valid:
            return "valid pseudometric"
        return f"{self.violation} violation at {self.where}"


def validate_pseudometric(D, tol=SYMMETRY_TOL) -> PseudometricReport:
    """Check shape, non-negativity, zero diagonal, symmetry and the triangle inequality."""
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        return PseudometricReport(False, "shape", D.shape)
    bad = np.argwhere(~np.isfinite(D) | (D < 0))
    if bad.size:
        return PseudometricReport(False, "non-negativity", tuple(int(v) for v in bad[0]))
    bad = np.flatnonzero(np.diag(D) != 0)
    if bad.size:
        return PseudometricReport(False, "zero-diagonal", (int(bad[0]), int(bad[0])))
    bad = np.argwhere(np.abs(D - D.T) > tol)
    if bad.size:
        return PseudometricReport(False, "symmetry", tuple(int(v) for v in bad[0]))
    i, j, k = kernels.first_triangle_violation(D, tol)
    if i >= 0:
        return PseudometricReport(False, "triangle", (int(i), int(j), int(k)))
    return PseudometricReport(True)


def _ball_masks(D, eps):
    close = np.asarray(D) <= eps
    return [sum(1 << int(j) for j in np.flatnonzero(row)) for row in close]


def exact_cover(D, eps) -> list[int]:
    """A minimum internal eps-cover, found by iterative deepening over its size.

    Centers whose ball is contained in another center's ball are dropped
    before the search; the branch point is always the uncovered point with
    the fewest candidate centers.
    """
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if n > EXACT_LIMIT:
        raise PreconditionError(
            f"exact covering is limited to {EXACT_LIMIT} points (got {n}); use the greedy cover")
    if n == 0:
        return []
    masks = _ball_masks(D, eps)
    keep = []
    for c, m in enumerate(masks):
        dominated = any(
            (m | o) == o and (m != o or d < c)
            for d, o in enumerate(masks) if d != c)
        if not dominated:
            keep.append(c)
    by_point = [[c for c in keep if masks[c] >> p & 1] for p in range(n)]
    widest = max(bin(masks[c]).count("1") for c in keep)
    full = (1 << n) - 1

    def search(uncovered, budget, chosen):
        if uncovered == 0:
            return True
        if budget == 0 or bin(uncovered).count("1") > budget * widest:
            return False
        p = min((q for q in range(n) if uncovered >> q & 1), key=lambda q: len(by_point[q]))
        for c in sorted(by_point[p], key=lambda c: -bin(masks[c] & uncovered).count("1")):
            chosen.append(c)
            if search(uncovered & ~masks[c], budget - 1, chosen):
                return True
            chosen.pop()
        return False

    for k in range(1, n + 1):
        chosen: list[int] = []
        if search(full, k, chosen):
            return sorted(chosen)
    raise AssertionError("every point covers itself; unreachable")


def covering_number_exact(D, eps) -> int:
    return len(exact_cover(D, eps))


def greedy_cover(D, eps) -> list[int]:
    """Farthest-first eps-net; its centers are pairwise more than eps apart."""
    D = np.asarray(D, dtype=np.float64)
    if D.shape[0] == 0:
        return []
    return [int(c) for c in kernels.greedy_net(D, float(eps))]


def covering_number_greedy(D, eps) -> int:
    return len(greedy_cover(D, eps))


@dataclass
class SandwichCheck:
    """Outcome of ``N(M, n, eps) <= N_n <= N(M, n, eps/2)``."""

    passed: bool
    lower: int | None
    pool_size: int
    upper: int
    violated: str | None = None
    lower_centers: list = field(default_factory=list)
    upper_centers: list = field(default_factory=list)
    mode: str = "exact"

    def as_dict(self):
        return {
            "passed": self.passed,
            "lower": self.lower,
            "pool_size": self.pool_size,
            "upper": self.upper,
            "violated": self.violated,
            "lower_centers": self.lower_centers,
            "upper_centers": self.upper_centers,
            "mode": self.mode,
        }


def verify_covering_sandwich(pool_size: int, D, eps: float, mode: str = "exact") -> SandwichCheck:
    """Sandwich the pool size between covering numbers at eps and eps/2.

    In ``greedy`` mode only the upper side is checked (a greedy cover
    overestimates the covering number, so it can certify the upper side but
    not the lower one).
    """
    D = np.asarray(D, dtype=np.float64)
    report = validate_pseudometric(D)
    if not report.valid:
        raise NotPseudometricError(report)
    if mode == "exact":
        lo_c, hi_c = exact_cover(D, eps), exact_cover(D, eps / 2)
        lower = len(lo_c)
    elif mode == "greedy":
        lo_c, hi_c = [], greedy_cover(D, eps / 2)
        lower = None
    else:
        raise ConfigError(f"unknown covering mode {mode!r}")
    upper = len(hi_c)
    violated = None
    if lower is not None and lower > pool_size:
        violated = "lower"
    elif pool_size > upper:
        violated = "upper"
    return SandwichCheck(violated is None, lower, int(pool_size), upper, violated, lo_c, hi_c, mode)


def error_report(result, trace_path, summary_path) -> None:
    """Write a run's trace CSV and summary JSON."""
    write_trace_csv(result.traces, trace_path, TRACE_HEADER)
    write_json(result.summary, summary_path)


def error_table(rates: dict) -> tuple[list, list, np.ndarray]:
    """Arrange ``{(threshold, subroutine): error_rate}`` as a threshold x subroutine grid."""
    thresholds = sorted({k[0] for k in rates})
    subs = list(dict.fromkeys(k[1] for k in rates))
    table = np.full((len(thresholds), len(subs)), np.nan)
    for (th, sub), r in rates.items():
        table[thresholds.index(th), subs.index(sub)] = r
    return thresholds, subs, table


def write_error_table(rates: dict, path) -> None:
    thresholds, subs, table = error_table(rates)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", *subs])
        for th, row in zip(thresholds, table):
            w.writerow([repr(float(th)), *(repr(float(v)) for v in row)])
