"""Exact 0-dimensional sublevel-set persistence of finite real sequences.

A series x_1, ..., x_n is padded with x_0 = x_{n+1} = +inf and filtered by
sublevel sets: vertex i enters at x_i, the edge {i, i+1} at max(x_i, x_{i+1}).
Connected components are born at strict local minima; when an edge joins two
components the one with the larger birth value dies at the edge value (elder
rule), and the component of the global minimum never dies.

The diagram is exposed both as a multiset of (birth, death) points and as a
counting measure: ``rectangle_count`` evaluates it on half-open rectangles
(s1, s2] x (t1, t2] and ``betti`` returns the count of components born by
level s that are still alive after level t.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, TextIO

import numpy as np
from numpy.typing import NDArray

from .errors import (
    ConsecutiveTieError,
    EmptySeriesError,
    InvalidRectangleError,
    InvalidThresholdsError,
    NonFiniteInputError,
)

__all__ = [
    "TiePolicy",
    "TimeSeries",
    "Rectangle",
    "PersistenceDiagram",
    "compute_diagram",
    "count_local_minima",
    "rectangle_count",
    "betti",
]


class TiePolicy(Enum):
    """How equal consecutive values are handled.

    ERROR rejects them (the stochastic model assumes ties have probability
    zero).  PERTURB_BY_INDEX breaks every tie by treating the earlier index
    as strictly smaller during comparisons; stored values are not modified,
    so a diagram point may then have birth == death numerically.
    """

    ERROR = "error"
    PERTURB_BY_INDEX = "perturb"


@dataclass(frozen=True)
class TimeSeries:
    """A finite sequence of real values with boundary convention +inf.

    Parameters
    ----------
    values:
        The observations x_1, ..., x_n (n >= 1), all finite.
    tie_policy:
        Tie handling; under ``TiePolicy.ERROR`` consecutive values must be
        distinct.
    """

    values: NDArray[np.float64]
    tie_policy: TiePolicy = TiePolicy.ERROR

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1:
            arr = arr.ravel()
        if arr.size == 0:
            raise EmptySeriesError("series must contain at least one value")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInputError("series values must all be finite reals")
        if self.tie_policy is TiePolicy.ERROR and arr.size > 1:
            if np.any(arr[1:] == arr[:-1]):
                raise ConsecutiveTieError(
                    "consecutive equal values are not allowed under TiePolicy.ERROR"
                )
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True, slots=True)
class Rectangle:
    """Half-open rectangle (s1, s2] x (t1, t2] above the diagonal.

    Coordinates satisfy -inf <= s1 <= s2 <= t1 <= t2 <= +inf.  s1 = -inf is
    admitted so that persistent-Betti sets (-inf, s] x (t, inf] are
    expressible.
    """

    s1: float
    s2: float
    t1: float
    t2: float

    def __post_init__(self) -> None:
        c = (self.s1, self.s2, self.t1, self.t2)
        if any(math.isnan(v) for v in c):
            raise InvalidRectangleError("rectangle coordinates must not be NaN")
        if not (self.s1 <= self.s2 <= self.t1 <= self.t2):
            raise InvalidRectangleError(
                f"rectangle coordinates must be ordered s1 <= s2 <= t1 <= t2, got {c}"
            )


@dataclass(frozen=True)
class PersistenceDiagram:
    """Multiset of (birth, death) pairs of a sublevel-set filtration.

    ``births``/``deaths`` hold the finite points sorted by (birth, death);
    the unique never-dying component is stored separately as
    ``infinite_birth`` (its birth equals the global minimum of the series).
    Coincident points are kept with their true multiplicity.
    """

    births: NDArray[np.float64]
    deaths: NDArray[np.float64]
    infinite_birth: float
    n: int

    @property
    def n_finite(self) -> int:
        return int(self.births.size)

    @property
    def n_points(self) -> int:
        return self.n_finite + 1

    @property
    def lifetimes(self) -> NDArray[np.float64]:
        """Lifetimes d - b of the finite points."""
        return self.deaths - self.births

    def points(self) -> list[tuple[float, float]]:
        """All points, the infinite one last among equal births."""
        pts = list(zip(self.births.tolist(), self.deaths.tolist()))
        pts.append((self.infinite_birth, math.inf))
        pts.sort()
        return pts

    def to_csv(self, stream: TextIO | None = None) -> str | None:
        """Write ``birth,death`` rows, death ``inf`` for the infinite point."""
        buf = stream if stream is not None else io.StringIO()
        buf.write("birth,death\n")
        for b, d in self.points():
            buf.write(f"{b!r},{'inf' if d == math.inf else repr(d)}\n")
        if stream is None:
            return buf.getvalue()  # type: ignore[union-attr]
        return None

    @classmethod
    def from_csv(cls, text: str, n: int | None = None) -> "PersistenceDiagram":
        """Inverse of :meth:`to_csv`; bit-exact for repr-serialized floats."""
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines or lines[0].lower() != "birth,death":
            raise ValueError("expected header 'birth,death'")
        fin_b: list[float] = []
        fin_d: list[float] = []
        inf_b: float | None = None
        for ln in lines[1:]:
            bs, ds = ln.split(",")
            b, d = float(bs), float(ds)
            if math.isinf(d):
                if inf_b is not None:
                    raise ValueError("more than one infinite point")
                inf_b = b
            else:
                fin_b.append(b)
                fin_d.append(d)
        if inf_b is None:
            raise ValueError("diagram must contain exactly one infinite point")
        return _make_diagram(fin_b, fin_d, inf_b, n if n is not None else len(lines) - 1)


def _make_diagram(
    births: Sequence[float], deaths: Sequence[float], infinite_birth: float, n: int
) -> PersistenceDiagram:
    b = np.asarray(births, dtype=np.float64)
    d = np.asarray(deaths, dtype=np.float64)
    if b.size:
        order = np.lexsort((d, b))
        b, d = b[order], d[order]
    b.flags.writeable = False
    d.flags.writeable = False
    return PersistenceDiagram(births=b, deaths=d, infinite_birth=float(infinite_birth), n=n)


def compute_diagram(series: TimeSeries) -> PersistenceDiagram:
    """Compute the exact 0-dimensional sublevel-set persistence diagram.

    Vertices are processed in increasing value order (ties broken by index);
    a union-find structure tracks components.  A vertex with no previously
    seen neighbor starts a component born at its value; a vertex connecting
    to two distinct components is a saddle, and the component with the
    larger birth dies there (elder rule).  O(n log n) sort plus near-linear
    merging.

    Returns
    -------
    PersistenceDiagram
        Finite merge pairs plus the never-dying component born at the
        global minimum.
    """
    arr = series.values
    n = arr.size
    values: list[float] = arr.tolist()
    order = np.lexsort((np.arange(n), arr)).tolist()

    parent = list(range(n))
    birth = list(range(n))  # root -> vertex index of the component minimum
    alive = bytearray(n)
    births: list[float] = []
    deaths: list[float] = []

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
                # A fresh vertex absorbed into an existing component is not
                # a merge of two components: emit a pair only for real merges.
                if younger != idx:
                    births.append(values[younger])
                    deaths.append(values[idx])
                parent[r2] = r1
                birth[r1] = elder
        # vertex with no alive neighbor: new component, birth recorded lazily
        # via birth[idx] == idx set at initialization

    gmin_idx = order[0]
    return _make_diagram(births, deaths, values[gmin_idx], n)


def count_local_minima(series: TimeSeries) -> int:
    """Number of strict local minima of the padded series.

    With x_0 = x_{n+1} = +inf, position i counts when x_i is below both
    neighbors; equal neighbors are resolved by the earlier-index-smaller
    order, so x_i beats a tied right neighbor and loses to a tied left one.
    Always equals the total point count of :func:`compute_diagram`.
    """
    x = series.values
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


def rectangle_count(diagram: PersistenceDiagram, r: Rectangle) -> int:
    """Number of diagram points in (s1, s2] x (t1, t2].

    The infinite point lies in the rectangle iff t2 = +inf (and t1 < +inf).
    Agrees with the four-corner inclusion-exclusion of persistent Betti
    numbers in which the t = +inf corner terms vanish.
    """
    b, d = diagram.births, diagram.deaths
    cnt = int(
        np.count_nonzero((r.s1 < b) & (b <= r.s2) & (r.t1 < d) & (d <= r.t2))
    )
    if r.t2 == math.inf and r.t1 < math.inf:
        if r.s1 < diagram.infinite_birth <= r.s2:
            cnt += 1
    return cnt


def betti(diagram: PersistenceDiagram, s: float, t: float) -> int:
    """Persistent Betti number: components born by s still alive after t.

    For finite t this is the count of points with b <= s and d > t (the
    infinite point always qualifies when its birth is <= s).  For t = +inf
    only the never-dying component can qualify, so the value is the
    indicator that the global minimum is <= s.
    """
    if math.isnan(s) or math.isnan(t) or s > t:
        raise InvalidThresholdsError(f"need s <= t, got s={s}, t={t}")
    if t == math.inf:
        return int(diagram.infinite_birth <= s)
    b, d = diagram.births, diagram.deaths
    cnt = int(np.count_nonzero((b <= s) & (d > t)))
    if diagram.infinite_birth <= s:
        cnt += 1
    return cnt
