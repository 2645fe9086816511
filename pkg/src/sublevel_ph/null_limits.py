"""Closed-form limiting objects for i.i.d. sequences.

For an i.i.d. sequence with continuous marginal F, the normalized diagram
converges to a probability measure whose corner masses, density and
lifetime tail have explicit forms:

  corner mass   3 (1 - F(t)) F(s) / (1 - F(t) + F(s))      on (-inf,s]x(t,inf]
  density       6 f(x) f(y) (1 - F(y)) F(x) / (1 - F(y) + F(x))^3     on x < y
  lifetime tail 3 E[ ((1 - F(X+l)) / (1 - F(X+l) + F(X)))^2 ]

The factor 3 is 1 / P(X_2 < X_1 and X_3), the limiting points-per-sample
rate.  In copula coordinates (u, v) = (F(x), F(y)) the density becomes
6 u (1-v) / (u + 1 - v)^3 on u < v; substituting c = u + 1 - v and
m = u / c factorizes it as c ~ Uniform(0,1) independent of m ~ Beta(2,2),
which yields an exact sampler (and lifetime tail 1 - l for the uniform
marginal, since then the lifetime is 1 - c).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy import integrate, special

from .diagram import Rectangle
from .errors import (
    DomainError,
    InvalidThresholdsError,
    NegativeLifetimeError,
    OutsideDomainError,
    QuantileUnavailableError,
)

__all__ = [
    "MarginalModel",
    "uniform01",
    "std_normal",
    "gaussian",
    "exponential",
    "tabulated_marginal",
    "limiting_betti_ratio",
    "null_corner_mass",
    "null_rectangle_mass",
    "null_density",
    "null_lifetime_tail",
    "sample_null_diagram_point",
    "sample_null_diagram_points",
    "p_i_run_probability",
    "expected_betti_finite_n",
]

_SAMPLER_ENVELOPE = 1.5  # sup of the Beta(2,2) density 6 m (1 - m)


@dataclass(frozen=True)
class MarginalModel:
    """Marginal distribution F with density f and quantile F^{-1}.

    ``cdf`` and ``pdf`` must accept scalars and numpy arrays; ``quantile``
    may be None for models that cannot be inverted.  ``support`` bounds the
    set where the density is positive (used for quadrature limits).
    """

    name: str
    cdf: Callable
    pdf: Callable
    quantile: Callable | None
    support: tuple[float, float]


def uniform01() -> MarginalModel:
    return MarginalModel(
        name="uniform01",
        cdf=lambda x: np.clip(x, 0.0, 1.0),
        pdf=lambda x: np.where((np.asarray(x) >= 0.0) & (np.asarray(x) <= 1.0), 1.0, 0.0),
        quantile=lambda u: np.asarray(u, dtype=np.float64),
        support=(0.0, 1.0),
    )


def gaussian(sigma: float = 1.0, mu: float = 0.0) -> MarginalModel:
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    c = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    return MarginalModel(
        name=f"gaussian(mu={mu},sigma={sigma})" if (mu, sigma) != (0.0, 1.0) else "std_normal",
        cdf=lambda x: special.ndtr((np.asarray(x, dtype=np.float64) - mu) / sigma),
        pdf=lambda x: c * np.exp(-0.5 * ((np.asarray(x, dtype=np.float64) - mu) / sigma) ** 2),
        quantile=lambda u: mu + sigma * special.ndtri(np.asarray(u, dtype=np.float64)),
        support=(-math.inf, math.inf),
    )


def std_normal() -> MarginalModel:
    return gaussian(1.0, 0.0)


def exponential(rate: float = 1.0) -> MarginalModel:
    if rate <= 0:
        raise DomainError(f"rate must be positive, got {rate}")
    return MarginalModel(
        name=f"exponential({rate})",
        cdf=lambda x: np.where(np.asarray(x) < 0, 0.0, -np.expm1(-rate * np.maximum(np.asarray(x, dtype=np.float64), 0.0))),
        pdf=lambda x: np.where(np.asarray(x) < 0, 0.0, rate * np.exp(-rate * np.maximum(np.asarray(x, dtype=np.float64), 0.0))),
        quantile=lambda u: -np.log1p(-np.asarray(u, dtype=np.float64)) / rate,
        support=(0.0, math.inf),
    )


def tabulated_marginal(source: str | io.TextIOBase, name: str = "tabulated") -> MarginalModel:
    """Marginal from CSV rows ``x,F,f`` with strictly increasing x.

    F is linearly interpolated, f is piecewise constant (left value on each
    cell), and the quantile inverts the piecewise-linear F.
    """
    if isinstance(source, str):
        buf: io.TextIOBase = io.StringIO(source) if "\n" in source else open(source)
    else:
        buf = source
    try:
        rows = [r for r in csv.reader(buf) if r and not r[0].lstrip().startswith("#")]
    finally:
        if isinstance(source, str) and "\n" not in source:
            buf.close()
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    data = np.asarray([[float(v) for v in r[:3]] for r in rows], dtype=np.float64)
    if data.shape[0] < 2:
        raise DomainError("tabulated marginal needs at least two rows")
    x, F, f = data[:, 0], data[:, 1], data[:, 2]
    if np.any(np.diff(x) <= 0):
        raise DomainError("tabulated x values must be strictly increasing")
    if np.any(np.diff(F) < 0) or F[0] < 0 or F[-1] > 1:
        raise DomainError("tabulated F must be nondecreasing within [0, 1]")

    def cdf(q):
        return np.interp(np.asarray(q, dtype=np.float64), x, F, left=0.0, right=1.0)

    def pdf(q):
        qa = np.asarray(q, dtype=np.float64)
        idx = np.clip(np.searchsorted(x, qa, side="right") - 1, 0, x.size - 1)
        out = f[idx]
        return np.where((qa < x[0]) | (qa > x[-1]), 0.0, out)

    def quantile(u):
        return np.interp(np.asarray(u, dtype=np.float64), F, x)

    return MarginalModel(name=name, cdf=cdf, pdf=pdf, quantile=quantile,
                         support=(float(x[0]), float(x[-1])))


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _check_st(s: float, t: float) -> None:
    if math.isnan(s) or math.isnan(t) or s > t:
        raise InvalidThresholdsError(f"need s <= t, got s={s}, t={t}")


def limiting_betti_ratio(marginal: MarginalModel, s: float, t: float) -> float:
    """Limit of E[beta^{s,t}] / n for the i.i.d. model.

    Equals (1 - F(t)) F(s) / (1 - F(t) + F(s)) when 0 < F(s) < 1 and 0
    otherwise (for F(s) = 1 the Betti number is identically 1, so the rate
    still vanishes).
    """
    _check_st(s, t)
    Fs = float(marginal.cdf(s))
    if not 0.0 < Fs < 1.0:
        return 0.0
    Gt = 0.0 if t == math.inf else 1.0 - float(marginal.cdf(t))
    return Gt * Fs / (Gt + Fs)


def null_corner_mass(marginal: MarginalModel, s: float, t: float) -> float:
    """Limiting diagram mass of (-inf, s] x (t, inf], i.e. 3x the ratio."""
    _check_st(s, t)
    Fs = 0.0 if s == -math.inf else float(marginal.cdf(s))
    Gt = 0.0 if t == math.inf else 1.0 - float(marginal.cdf(t))
    num = 3.0 * Gt * Fs
    if num == 0.0:
        return 0.0
    return num / (Gt + Fs)


def null_rectangle_mass(marginal: MarginalModel, r: Rectangle) -> float:
    """Limiting mass of a rectangle by four-corner inclusion-exclusion."""
    m = (
        null_corner_mass(marginal, r.s2, r.t1)
        - null_corner_mass(marginal, r.s2, r.t2)
        - null_corner_mass(marginal, r.s1, r.t1)
        + null_corner_mass(marginal, r.s1, r.t2)
    )
    return min(max(m, 0.0), 1.0)


def null_density(marginal: MarginalModel, x: float, y: float) -> float:
    """Density 6 f(x) f(y) (1-F(y)) F(x) / (1-F(y)+F(x))^3 on x < y."""
    if not x < y:
        raise OutsideDomainError(f"density lives on x < y, got ({x}, {y})")
    Fx = float(marginal.cdf(x))
    Gy = 1.0 - float(marginal.cdf(y))
    den = Gy + Fx
    if den <= 0.0:
        return 0.0
    return 6.0 * float(marginal.pdf(x)) * float(marginal.pdf(y)) * Gy * Fx / den**3


def null_lifetime_tail(marginal: MarginalModel, ell: float) -> float:
    """Limiting probability of lifetime > ell.

    The expectation 3 E[((1-F(X+ell)) / (1-F(X+ell)+F(X)))^2] is integrated
    through the quantile transform, so the integrand lives on (0, 1) and is
    bounded by 1 regardless of the support of F.
    """
    if ell < 0 or math.isnan(ell):
        raise NegativeLifetimeError(f"lifetime threshold must be >= 0, got {ell}")
    if ell == math.inf:
        return 0.0
    if marginal.quantile is None:
        raise QuantileUnavailableError("lifetime tail integration needs a quantile")

    def integrand(u: float) -> float:
        x = float(marginal.quantile(u))
        g = 1.0 - float(marginal.cdf(x + ell))
        den = g + u
        if den <= 0.0:
            return 0.0
        return (g / den) ** 2

    val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-11, epsrel=1e-11, limit=200)
    return min(max(3.0 * val, 0.0), 1.0)


def _open_uniform(rng: np.random.Generator, size: int) -> NDArray[np.float64]:
    # strictly inside (0, 1): half-ulp offset keeps quantiles finite
    return (rng.integers(0, 1 << 53, size=size) + 0.5) / float(1 << 53)


def sample_null_diagram_points(
    marginal: MarginalModel, n: int, rng: np.random.Generator
) -> tuple[NDArray[np.float64], float]:
    """Draw n points from the limiting diagram distribution.

    Works in the factorized coordinates: c = F(x) + 1 - F(y) is uniform and
    m = F(x) / c is Beta(2,2), independent.  m is drawn by rejection from
    the uniform square with exact envelope 3/2 (acceptance 2/3), c directly;
    then (x, y) = (Q(c m), Q(1 - c (1 - m))).  Returns the points and the
    empirical acceptance rate of the rejection step.
    """
    if marginal.quantile is None:
        raise QuantileUnavailableError(f"marginal {marginal.name} has no quantile")
    if n < 1:
        raise DomainError("need n >= 1 draws")
    accepted = np.empty(0)
    proposals = 0
    while accepted.size < n:
        todo = n - accepted.size
        batch = max(int(1.8 * todo) + 16, 32)
        m = _open_uniform(rng, batch)
        u = rng.random(batch)
        keep = u * _SAMPLER_ENVELOPE < 6.0 * m * (1.0 - m)
        proposals += batch
        accepted = np.concatenate((accepted, m[keep]))
    rate = accepted.size / proposals if proposals else 1.0
    m = accepted[:n]
    c = _open_uniform(rng, n)
    x = np.asarray(marginal.quantile(c * m), dtype=np.float64)
    y = np.asarray(marginal.quantile(1.0 - c * (1.0 - m)), dtype=np.float64)
    return np.column_stack((x, y)), rate


def sample_null_diagram_point(
    marginal: MarginalModel, rng: np.random.Generator
) -> tuple[float, float]:
    """Single draw from the limiting diagram distribution."""
    pts, _ = sample_null_diagram_points(marginal, 1, rng)
    return float(pts[0, 0]), float(pts[0, 1])


def p_i_run_probability(marginal: MarginalModel, i: int, s: float, t: float) -> float:
    """P(some index of an i.i.d. i-run is <= s while the whole run is <= t):
    F(t)^i - (F(t) - F(s))^i."""
    _check_st(s, t)
    if i < 1:
        raise DomainError(f"run length must be >= 1, got {i}")
    Ft = 1.0 if t == math.inf else float(marginal.cdf(t))
    Fs = float(marginal.cdf(s))
    return Ft**i - (Ft - Fs) ** i


def expected_betti_finite_n(
    marginal: MarginalModel, n: int, s: float, t: float
) -> float:
    """Exact E[beta^{s,t}] for n i.i.d. draws from the marginal.

    A qualifying run of length i contributes p_i(s,t) times (1 - F(t)) per
    real flank; i = n has no flank, i = n-1 has one on each side, shorter
    runs have two boundary positions with one flank and n - i - 1 interior
    positions with two.
    """
    _check_st(s, t)
    if n < 1:
        raise DomainError(f"series length must be >= 1, got {n}")
    Ft = 1.0 if t == math.inf else float(marginal.cdf(t))
    Fs = float(marginal.cdf(s))
    i = np.arange(1, n + 1, dtype=np.float64)
    p = Ft**i - (Ft - Fs) ** i
    q = 1.0 - Ft
    interior = np.maximum(n - i - 1.0, 0.0)
    edge = np.where(i <= n - 1, 2.0, 0.0)
    full = np.where(i == n, 1.0, 0.0)
    return float(np.sum(p * (interior * q * q + edge * q + full)))
