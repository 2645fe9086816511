"""Slow, literal evaluations of the combinatorial Betti-number formulas.

These are ground-truth oracles: the persistent Betti number beta^{s,t} is
written as an explicit double sum over runs.  A run of length i starting at
j qualifies when every value in x_j..x_{j+i-1} is <= t, at least one of them
is <= s, and both flanking values (with +inf padding) exceed t.  The y-term
groups the same sum by start index, the c-term is a single (i, j) summand.

Everything here favors transparency over speed; the batch grid evaluators
enumerate the identical window and run sets but count them vectorized so
that whole threshold grids are checkable in tests.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .diagram import TimeSeries
from .errors import DomainError, IndexOutOfRangeError, InvalidThresholdsError

__all__ = [
    "betti_bruteforce",
    "y_term",
    "c_term",
    "geometric_weighted_sum",
    "threshold_grid",
    "betti_grid_windows",
    "betti_grid_runs",
]


def _check_thresholds(s: float, t: float) -> None:
    if math.isnan(s) or math.isnan(t) or s > t:
        raise InvalidThresholdsError(f"need s <= t, got s={s}, t={t}")


def _padded(series: TimeSeries) -> list[float]:
    return [math.inf] + series.values.tolist() + [math.inf]


def betti_bruteforce(series: TimeSeries, s: float, t: float) -> int:
    """Literal double-sum persistent Betti number; O(n^3) worst case.

    For t = +inf no flank can exceed t, and the value is instead the
    indicator that the global minimum is <= s.
    """
    _check_thresholds(s, t)
    n = len(series)
    if t == math.inf:
        return int(min(series.values) <= s)
    x = _padded(series)
    total = 0
    for i in range(1, n + 1):
        for j in range(1, n - i + 2):
            run = x[j : j + i]
            if max(run) <= t and min(run) <= s and min(x[j - 1], x[j + i]) > t:
                total += 1
    return total


def y_term(series: TimeSeries, j: int, m: int | float, s: float, t: float) -> int:
    """Indicator that some run of length <= m starting at j qualifies.

    ``m`` may be math.inf; runs cannot extend past the series, so the
    effective cap is n - j + 1.  At most one run length can fire (the run
    must be flanked by values > t on both sides), hence the 0/1 value.
    """
    _check_thresholds(s, t)
    n = len(series)
    if not 1 <= j <= n:
        raise IndexOutOfRangeError(f"j={j} outside 1..{n}")
    x = _padded(series)
    cap = n - j + 1 if m == math.inf else min(int(m), n - j + 1)
    total = 0
    for i in range(1, cap + 1):
        run = x[j : j + i]
        if max(run) <= t and min(run) <= s and min(x[j - 1], x[j + i]) > t:
            total += 1
    return total


def c_term(series: TimeSeries, i: int, j: int, s: float, t: float) -> int:
    """Single-run indicator: run j..j+i-1 all <= t, min <= s, flanks > t."""
    _check_thresholds(s, t)
    n = len(series)
    if i < 1 or j < 1 or j + i - 1 > n:
        raise IndexOutOfRangeError(f"run (i={i}, j={j}) outside series of length {n}")
    x = _padded(series)
    run = x[j : j + i]
    ok = max(run) <= t and min(run) <= s and min(x[j - 1], x[j + i]) > t
    return int(ok)


def geometric_weighted_sum(a: float, n: int) -> float:
    """Closed form of sum_{i=1..n} (n - i + 1) a^i.

    Equals (n*b - (n+1) + a^n) / (b - 1)^2 with b = 1/a for a in (0, 1),
    and the triangular number n(n+1)/2 at a = 1.
    """
    if not 0.0 < a <= 1.0:
        raise DomainError(f"a must lie in (0, 1], got {a}")
    if n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    if a == 1.0:
        return n * (n + 1) / 2.0
    b = 1.0 / a
    return (n * b - (n + 1) + a**n) / (b - 1.0) ** 2


def threshold_grid(series: TimeSeries) -> NDArray[np.float64]:
    """Oracle test grid: distinct data values, midpoints between consecutive
    order statistics, and one value below the minimum and above the maximum.

    Betti numbers are step functions of (s, t) changing only at data values,
    so equality on this grid pins them down everywhere.
    """
    u = np.unique(series.values)
    mids = (u[:-1] + u[1:]) / 2.0
    return np.sort(np.concatenate(([u[0] - 1.0], u, mids, [u[-1] + 1.0])))


def _window_tables(
    series: TimeSeries,
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Max, min, and flank-min for every run window (i, j), enumerated flat."""
    x = series.values
    n = x.size
    pad = np.concatenate(([np.inf], x, [np.inf]))
    mx_parts = []
    mn_parts = []
    fl_parts = []
    mx = x.copy()
    mn = x.copy()
    for i in range(1, n + 1):
        if i > 1:
            mx = np.maximum(mx[:-1], x[i - 1 :])
            mn = np.minimum(mn[:-1], x[i - 1 :])
        # windows start at j = 1..n-i+1; flanks are pad[j-1] and pad[j+i]
        fl = np.minimum(pad[: n - i + 1], pad[i + 1 :])
        mx_parts.append(mx)
        mn_parts.append(mn)
        fl_parts.append(fl)
    return (
        np.concatenate(mx_parts),
        np.concatenate(mn_parts),
        np.concatenate(fl_parts),
    )


def betti_grid_windows(
    series: TimeSeries, svals: Sequence[float], tvals: Sequence[float]
) -> NDArray[np.int64]:
    """Betti numbers on a full (s, t) grid by explicit window enumeration.

    Counts, for every threshold pair, the windows whose max is <= t, min is
    <= s and flank-min is > t -- the same set the literal double sum visits.
    Entries with s > t are set to -1.  Shape (len(svals), len(tvals)).
    """
    mx, mn, fl = _window_tables(series)
    s_arr = np.asarray(svals, dtype=np.float64)
    t_arr = np.asarray(tvals, dtype=np.float64)
    out = np.full((s_arr.size, t_arr.size), -1, dtype=np.int64)
    for k, t in enumerate(t_arr):
        qual_mins = np.sort(mn[(mx <= t) & (fl > t)])
        counts = np.searchsorted(qual_mins, s_arr, side="right")
        out[:, k] = np.where(s_arr <= t, counts, -1)
    return out


def betti_grid_runs(
    series: TimeSeries, svals: Sequence[float], tvals: Sequence[float]
) -> NDArray[np.int64]:
    """Betti numbers on a full (s, t) grid by maximal-run detection.

    For fixed t the only qualifying windows are the maximal runs of values
    <= t, one per start index with a flank > t on the left -- the y-term
    grouping.  Counting run minima <= s gives the same grid as
    :func:`betti_grid_windows` through an independent code path.
    """
    x = series.values
    s_arr = np.asarray(svals, dtype=np.float64)
    t_arr = np.asarray(tvals, dtype=np.float64)
    out = np.full((s_arr.size, t_arr.size), -1, dtype=np.int64)
    for k, t in enumerate(t_arr):
        mask = x <= t
        starts = mask.copy()
        starts[1:] &= ~mask[:-1]
        idx = np.flatnonzero(starts)
        if idx.size:
            run_min = np.minimum.reduceat(np.where(mask, x, np.inf), idx)
            qual = np.sort(run_min)
        else:
            qual = np.empty(0)
        counts = np.searchsorted(qual, s_arr, side="right")
        out[:, k] = np.where(s_arr <= t, counts, -1)
    return out
