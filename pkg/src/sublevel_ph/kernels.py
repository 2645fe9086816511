"""Vectorized O(n) kernels for the Monte Carlo harness.

These operate on raw float arrays and avoid building diagram objects when
only counts or lifetimes are needed.  ``betti_count`` mirrors
``diagram.betti``, ``rect_count`` mirrors ``diagram.rectangle_count`` via
the four-corner inclusion-exclusion (t = +inf corners vanish), and
``finite_lifetimes`` runs the same elder-rule sweep as ``compute_diagram``.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import NDArray

from .diagram import Rectangle

__all__ = [
    "local_minima_count",
    "betti_count",
    "rect_count",
    "finite_lifetimes",
]


def local_minima_count(x: NDArray[np.float64]) -> int:
    """Strict local minima of the +inf-padded array, index-tiebroken."""
    n = x.size
    if n == 1:
        return 1
    left_ok = np.empty(n, dtype=bool)
    right_ok = np.empty(n, dtype=bool)
    left_ok[0] = True
    left_ok[1:] = x[1:] < x[:-1]
    right_ok[-1] = True
    right_ok[:-1] = x[:-1] <= x[1:]
    return int(np.count_nonzero(left_ok & right_ok))


def betti_count(x: NDArray[np.float64], s: float, t: float) -> int:
    """Maximal runs of values <= t containing a value <= s; t=+inf is the
    indicator that the minimum is <= s."""
    if t == math.inf:
        return int(x.min() <= s)
    if s == -math.inf:
        return 0
    mask = x <= t
    starts = mask.copy()
    starts[1:] &= ~mask[:-1]
    idx = np.flatnonzero(starts)
    if not idx.size:
        return 0
    run_min = np.minimum.reduceat(np.where(mask, x, np.inf), idx)
    return int(np.count_nonzero(run_min <= s))


def _corner(x: NDArray[np.float64], s: float, t: float) -> int:
    # measure convention: the (t = +inf) and (s = -inf) corners carry 0
    if t == math.inf or s == -math.inf:
        return 0
    return betti_count(x, s, t)


def rect_count(x: NDArray[np.float64], r: Rectangle) -> int:
    """Diagram mass of (s1, s2] x (t1, t2] without building the diagram."""
    return (
        _corner(x, r.s2, r.t1)
        - _corner(x, r.s2, r.t2)
        - _corner(x, r.s1, r.t1)
        + _corner(x, r.s1, r.t2)
    )


def finite_lifetimes(x: NDArray[np.float64]) -> NDArray[np.float64]:
    """Lifetimes d - b of all finite elder-rule pairs of the array."""
    values: list[float] = x.tolist()
    n = x.size
    order = np.lexsort((np.arange(n), x)).tolist()
    parent = list(range(n))
    birth = list(range(n))
    alive = bytearray(n)
    out: list[float] = []
    for idx in order:
        alive[idx] = 1
        for nb in (idx - 1, idx + 1):
            if 0 <= nb < n and alive[nb]:
                r1 = idx
                while parent[r1] != r1:
                    parent[r1] = parent[parent[r1]]
                    r1 = parent[r1]
                r2 = nb
                while parent[r2] != r2:
                    parent[r2] = parent[parent[r2]]
                    r2 = parent[r2]
                if r1 == r2:
                    continue
                b1, b2 = birth[r1], birth[r2]
                v1, v2 = values[b1], values[b2]
                if v1 < v2 or (v1 == v2 and b1 < b2):
                    elder, younger = b1, b2
                else:
                    elder, younger = b2, b1
                if younger != idx:
                    out.append(values[idx] - values[younger])
                parent[r2] = r1
                birth[r1] = elder
    return np.asarray(out, dtype=np.float64)
