"""Diagrams as measures: step-function integrals and persistence statistics.

Lifetimes are d - b; the never-dying component has infinite lifetime and is
excluded wherever an unbounded functional would diverge.  Persistent entropy
is the Shannon entropy (natural log) of the normalized finite lifetimes; the
ALPS statistic integrates log of the count of points with lifetime > ell
over ell, which is finite because exactly one point survives forever.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .diagram import PersistenceDiagram, Rectangle, rectangle_count
from .errors import (
    DomainError,
    EmptyDiagramError,
    InfiniteLifetimeError,
    NoFinitePointsError,
)

__all__ = [
    "StepFunction",
    "PowerP",
    "XLogX",
    "Indicator",
    "CustomLifetime",
    "integrate_step",
    "lifetime_integral",
    "persistent_entropy",
    "alps",
    "lifetime_ecdf_sup_distance",
    "sup_distance_from_lifetimes",
    "stats_report",
]


@dataclass(frozen=True)
class StepFunction:
    """Finite weighted sum of rectangle indicators sum_l a_l 1_{R_l}."""

    terms: tuple[tuple[float, Rectangle], ...] = ()

    @classmethod
    def of(cls, *terms: tuple[float, Rectangle]) -> "StepFunction":
        return cls(tuple((float(a), r) for a, r in terms))


@dataclass(frozen=True)
class PowerP:
    """g(ell) = ell^p with p > 0 (degree-p total persistence)."""

    p: float

    def __post_init__(self) -> None:
        if not self.p > 0:
            raise DomainError(f"power must be positive, got {self.p}")

    bounded_at_infinity = False

    def __call__(self, ell: float) -> float:
        return float(ell) ** self.p


@dataclass(frozen=True)
class XLogX:
    """g(ell) = ell * log(ell), with g(0) = 0 (the entropy kernel)."""

    bounded_at_infinity = False

    def __call__(self, ell: float) -> float:
        return 0.0 if ell == 0.0 else float(ell) * math.log(ell)


@dataclass(frozen=True)
class Indicator:
    """g(ell') = 1{ell' > ell}, the lifetime-tail indicator."""

    ell: float

    def __post_init__(self) -> None:
        if self.ell < 0:
            raise DomainError(f"indicator level must be >= 0, got {self.ell}")

    bounded_at_infinity = True

    def __call__(self, lifetime: float) -> float:
        return 1.0 if lifetime > self.ell else 0.0


@dataclass(frozen=True)
class CustomLifetime:
    """Arbitrary map applied pointwise to lifetimes.

    ``bounded_at_infinity`` defaults to False; set it to True only when the
    map has a finite limit at +inf (it is then evaluated at math.inf for the
    infinite point in unrestricted sums).
    """

    fn: Callable[[float], float]
    bounded_at_infinity: bool = False

    def __call__(self, lifetime: float) -> float:
        return float(self.fn(lifetime))


def integrate_step(diagram: PersistenceDiagram, f: StepFunction) -> float:
    """Integral of a step function against the diagram counting measure."""
    return math.fsum(a * rectangle_count(diagram, r) for a, r in f.terms)


def lifetime_integral(
    diagram: PersistenceDiagram,
    g,
    restricted: bool = True,
    normalized: bool = False,
) -> float:
    """Sum of g(d - b) over diagram points.

    ``restricted`` sums over finite points only and is required for any g
    unbounded at infinity (the never-dying component has infinite lifetime).
    ``normalized`` divides by the number of points summed over.
    """
    if not restricted and not getattr(g, "bounded_at_infinity", False):
        raise InfiniteLifetimeError(
            "unrestricted evaluation of a lifetime functional unbounded at +inf"
        )
    total = math.fsum(g(ell) for ell in diagram.lifetimes.tolist())
    count = diagram.n_finite
    if not restricted:
        total += g(math.inf)
        count += 1
    if normalized:
        if count == 0:
            raise NoFinitePointsError("cannot normalize over zero points")
        return total / count
    return total


def persistent_entropy(diagram: PersistenceDiagram) -> float:
    """Shannon entropy of normalized finite lifetimes, natural log.

    The infinite bar is excluded.  Zero lifetimes contribute nothing
    (0 log 0 := 0); if no finite point has positive lifetime the statistic
    is undefined and NoFinitePointsError is raised.
    """
    if diagram.n_finite == 0:
        raise NoFinitePointsError("diagram has no finite points")
    ell = diagram.lifetimes
    pos = ell[ell > 0]
    total = float(pos.sum())
    if total <= 0.0:
        raise NoFinitePointsError("all finite lifetimes are zero")
    return float(math.log(total) - float(np.dot(pos, np.log(pos))) / total)


def _tail_counts(lifetimes: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    """Distinct positive lifetimes v_1 < ... < v_k and counts #{ell >= v_j}."""
    pos = np.sort(lifetimes[lifetimes > 0])
    if not pos.size:
        return np.empty(0), np.empty(0, dtype=np.int64)
    vals, first = np.unique(pos, return_index=True)
    at_least = pos.size - first  # count of lifetimes >= vals[j]
    return vals, at_least.astype(np.int64)


def alps(diagram: PersistenceDiagram, L: float = math.inf) -> float:
    """Integral over [0, L] of log(count of points with lifetime > ell).

    The count is piecewise constant with jumps at the finite lifetimes and
    reaches 1 (the infinite bar) beyond the largest one, so the L = +inf
    integral is finite.  Computed exactly as a sum over segments.
    """
    if diagram.n_points < 1:
        raise EmptyDiagramError("diagram has no points")
    if not (L == math.inf or L > 0):
        raise DomainError(f"truncation must be positive or +inf, got {L}")
    vals, at_least = _tail_counts(diagram.lifetimes)
    # count of points with lifetime > ell for ell in [prev, v_j) is
    # 1 + #{lifetimes >= v_j}
    total = 0.0
    prev = 0.0
    for v, c in zip(vals.tolist(), at_least.tolist()):
        hi = min(v, L)
        if hi > prev:
            total += (hi - prev) * math.log(1 + c)
        if v >= L:
            return total
        prev = v
    # beyond the largest finite lifetime the count is 1: log 1 = 0
    return total


def sup_distance_from_lifetimes(
    lifetimes: NDArray[np.float64], n_infinite: int, tail: Callable[[float], float]
) -> float:
    """Sup over ell >= 0 of |empirical lifetime tail - tail(ell)|.

    The empirical tail is (n_infinite + #{lifetimes > ell}) / N with N the
    total point count; the supremum of the step-versus-monotone comparison
    is attained at a jump (from either side), at 0, or in the limit
    ell -> +inf, so those candidates are enumerated.  Exact for continuous
    nonincreasing theoretical tails; ``tail`` must accept math.inf.
    """
    n_total = int(lifetimes.size) + n_infinite
    if n_total < 1:
        raise EmptyDiagramError("no points")
    vals, at_least = _tail_counts(lifetimes)

    def tail_at(arr: NDArray[np.float64]) -> NDArray[np.float64]:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error")
                out = np.asarray(tail(arr), dtype=np.float64)
            if out.shape == arr.shape:
                return out
        except Exception:
            pass
        return np.asarray([float(tail(v)) for v in arr.tolist()], dtype=np.float64)

    # T just right of v_j: (n_inf + #{ell_i > v_j}) / N; just left uses >=.
    # The left-limit comparison needs the tail's own left limit, taken one
    # ulp below the jump so that step-valued references are handled exactly.
    right = np.concatenate((at_least[1:], [0]))
    t_right = (n_infinite + right) / n_total
    t_left = (n_infinite + at_least) / n_total
    top0 = n_infinite + (at_least[0] if at_least.size else 0)
    best = abs(top0 / n_total - float(tail(0.0)))
    if vals.size:
        th = tail_at(vals)
        th_left = tail_at(np.nextafter(vals, -math.inf))
        best = max(
            best,
            float(np.max(np.abs(t_right - th))),
            float(np.max(np.abs(t_left - th_left))),
        )
    # limit ell -> inf: only the never-dying bars survive
    best = max(best, abs(n_infinite / n_total - float(tail(math.inf))))
    return best


def lifetime_ecdf_sup_distance(
    diagram: PersistenceDiagram, tail: Callable[[float], float]
) -> float:
    """Sup distance between the diagram's lifetime tail and a reference tail."""
    return sup_distance_from_lifetimes(diagram.lifetimes, 1, tail)


def stats_report(
    diagram: PersistenceDiagram,
    alps_L: float = math.inf,
    total_p: float = 1.0,
) -> dict:
    """JSON-ready summary: entropy, ALPS, total persistence and point counts.

    ``entropy`` is None when the diagram has no finite point with positive
    lifetime (callers that require it should treat None as an error).
    """
    try:
        entropy: float | None = persistent_entropy(diagram)
    except NoFinitePointsError:
        entropy = None
    return {
        "entropy": entropy,
        "alps": alps(diagram, alps_L),
        "alps_truncation_L": None if alps_L == math.inf else alps_L,
        "total_persistence_p": lifetime_integral(diagram, PowerP(total_p)),
        "n_points": diagram.n_points,
        "n_finite_points": diagram.n_finite,
    }
