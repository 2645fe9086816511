"""Stationary test-process generators with reproducible parallel streams.

Every generator is addressed by (seed, stream): the same pair always yields
the same series, and distinct streams are independent, so replications can
run concurrently.  Each built-in process satisfies the hypotheses of the
limit theorems with an analytically known mixing class:

  IID              independent draws through the quantile transform
  MDepGaussianMA   normalized moving average of i.i.d. Gaussians; m-dependent
  MinorizedMarkov  uniform-marginal chain: with probability eta a fresh
                   uniform, otherwise a Gaussian-copula AR move.  The kernel
                   has the Doeblin floor eta * Unif, hence the uniform
                   minorization sup_{x<=t} P(x, (-inf,t]) <= 1 - eta (1 - t)
  GaussianAR1      X_{k+1} = phi X_k + Z_k started from N(0, 1/(1-phi^2))
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import NDArray
from scipy import signal, special

from .diagram import TiePolicy, TimeSeries
from .errors import (
    ConfigError,
    DomainError,
    QuantileUnavailableError,
    UnknownKernelStationaryLawError,
)
from .null_limits import (
    MarginalModel,
    exponential,
    gaussian,
    std_normal,
    tabulated_marginal,
    uniform01,
)

__all__ = [
    "IID",
    "MDepGaussianMA",
    "MinorizedMarkov",
    "GaussianAR1",
    "ProcessSpec",
    "generate",
    "generate_values",
    "nominal_marginal",
    "mixing_class",
    "max_run_probability_estimate",
    "max_root_summability_diagnostic",
    "RunProbabilityEstimate",
    "MaxRootReport",
    "spec_to_dict",
    "spec_from_dict",
]


@dataclass(frozen=True)
class IID:
    marginal: MarginalModel


@dataclass(frozen=True)
class MDepGaussianMA:
    """Moving average over a window of m+1 i.i.d. standard Gaussians.

    Weights are L2-normalized so the marginal is exactly standard normal;
    blocks separated by more than m indices are independent.
    """

    m: int
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.m < 0 or len(self.weights) != self.m + 1:
            raise ConfigError(f"need m >= 0 and exactly m+1 weights, got m={self.m}")
        w = np.asarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(w)) or not np.any(w != 0):
            raise ConfigError("weights must be finite and not all zero")


@dataclass(frozen=True)
class MinorizedMarkov:
    """Uniform-marginal Markov chain with a Doeblin refresh floor.

    With probability ``refresh_prob`` the next state is a fresh uniform;
    otherwise it moves by the Gaussian copula with parameter ``copula_phi``
    (both moves preserve Uniform(0,1), so the stationary law is exact).
    ``kernel`` names the transition move; only the built-in is supported,
    since sampling must start from a known stationary law.
    """

    refresh_prob: float
    copula_phi: float = 0.5
    kernel: str = "copula_refresh"

    def __post_init__(self) -> None:
        if not 0.0 < self.refresh_prob <= 1.0:
            raise ConfigError(f"refresh_prob must be in (0, 1], got {self.refresh_prob}")
        if not abs(self.copula_phi) < 1.0:
            raise ConfigError(f"|copula_phi| must be < 1, got {self.copula_phi}")

    def eta_floor(self, t: float) -> float:
        """Uniform minorization gap: sup_{x<=t} P(x,(-inf,t]) <= 1 - eta_t."""
        if not 0.0 <= t < 1.0:
            raise DomainError(f"level t must lie in [0, 1), got {t}")
        return self.refresh_prob * (1.0 - t)


@dataclass(frozen=True)
class GaussianAR1:
    phi: float

    def __post_init__(self) -> None:
        if not abs(self.phi) < 1.0:
            raise ConfigError(f"|phi| must be < 1, got {self.phi}")


ProcessKind = Union[IID, MDepGaussianMA, MinorizedMarkov, GaussianAR1]


@dataclass(frozen=True)
class ProcessSpec:
    kind: ProcessKind
    seed: int = 0


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


def _open_uniform(rng: np.random.Generator, size: int) -> NDArray[np.float64]:
    return (rng.integers(0, 1 << 53, size=size) + 0.5) / float(1 << 53)


def generate_values(spec: ProcessSpec, n: int, stream: int = 0) -> NDArray[np.float64]:
    """Raw sample path as a float array; deterministic in (seed, stream)."""
    if n < 1:
        raise ConfigError(f"series length must be >= 1, got {n}")
    rng = _rng(spec.seed, stream)
    kind = spec.kind
    if isinstance(kind, IID):
        if kind.marginal.quantile is None:
            raise QuantileUnavailableError(
                f"marginal {kind.marginal.name} has no quantile to sample through"
            )
        return np.asarray(kind.marginal.quantile(_open_uniform(rng, n)), dtype=np.float64)
    if isinstance(kind, MDepGaussianMA):
        w = np.asarray(kind.weights, dtype=np.float64)
        w = w / math.sqrt(float(np.dot(w, w)))
        z = rng.standard_normal(n + kind.m)
        return np.correlate(z, w, mode="valid")
    if isinstance(kind, MinorizedMarkov):
        if kind.kernel != "copula_refresh":
            raise UnknownKernelStationaryLawError(
                f"kernel {kind.kernel!r} has no closed-form stationary law; "
                "only 'copula_refresh' is built in"
            )
        u = np.empty(n)
        u[0] = _open_uniform(rng, 1)[0]
        refresh = rng.random(n - 1) < kind.refresh_prob if n > 1 else np.empty(0, bool)
        fresh = _open_uniform(rng, max(n - 1, 0))
        eps = rng.standard_normal(max(n - 1, 0))
        phi = kind.copula_phi
        rho = math.sqrt(1.0 - phi * phi)
        for k in range(1, n):
            if refresh[k - 1]:
                u[k] = fresh[k - 1]
            else:
                z = special.ndtri(u[k - 1])
                u[k] = special.ndtr(phi * z + rho * eps[k - 1])
        return u
    if isinstance(kind, GaussianAR1):
        phi = kind.phi
        x0 = rng.standard_normal() / math.sqrt(1.0 - phi * phi)
        if n == 1:
            return np.asarray([x0])
        z = rng.standard_normal(n - 1)
        rest, _ = signal.lfilter([1.0], [1.0, -phi], z, zi=np.asarray([phi * x0]))
        return np.concatenate(([x0], rest))
    raise ConfigError(f"unknown process kind {type(kind).__name__}")


def generate(
    spec: ProcessSpec, n: int, stream: int = 0, tie_policy: TiePolicy = TiePolicy.ERROR
) -> TimeSeries:
    """Sample path wrapped as a TimeSeries."""
    return TimeSeries(generate_values(spec, n, stream), tie_policy)


def nominal_marginal(spec: ProcessSpec) -> MarginalModel:
    """The exact stationary marginal of the generator."""
    kind = spec.kind
    if isinstance(kind, IID):
        return kind.marginal
    if isinstance(kind, MDepGaussianMA):
        return std_normal()
    if isinstance(kind, MinorizedMarkov):
        return uniform01()
    if isinstance(kind, GaussianAR1):
        return gaussian(sigma=1.0 / math.sqrt(1.0 - kind.phi**2))
    raise ConfigError(f"unknown process kind {type(kind).__name__}")


def mixing_class(spec: ProcessSpec) -> str:
    """Analytically known dependence class, recorded as metadata.

    rho-mixing coefficients are suprema over L2 correlations and are not
    statistically estimable, so the class is asserted, not measured.
    """
    kind = spec.kind
    if isinstance(kind, IID):
        return "independent (rho(k) = 0 for all k >= 1)"
    if isinstance(kind, MDepGaussianMA):
        return f"{kind.m}-dependent (rho(k) = 0 for k > {kind.m})"
    if isinstance(kind, MinorizedMarkov):
        return "uniformly ergodic via Doeblin floor; geometric rho-mixing"
    if isinstance(kind, GaussianAR1):
        return f"Gaussian AR(1), phi={kind.phi}: geometric rho-mixing (rho(k) = |phi|^k)"
    raise ConfigError(f"unknown process kind {type(kind).__name__}")


@dataclass(frozen=True)
class RunProbabilityEstimate:
    prob: float
    std_error: float
    reps: int


def max_run_probability_estimate(
    spec: ProcessSpec, t: float, i: int, reps: int, stream_offset: int = 0
) -> RunProbabilityEstimate:
    """Monte Carlo estimate of P(X_1 <= t, ..., X_i <= t) with binomial SE."""
    if reps < 1:
        raise ConfigError(f"need reps >= 1, got {reps}")
    if i < 1:
        raise ConfigError(f"need run length >= 1, got {i}")
    hits = 0
    for r in range(reps):
        x = generate_values(spec, i, stream_offset + r)
        if x.max() <= t:
            hits += 1
    p = hits / reps
    return RunProbabilityEstimate(p, math.sqrt(p * (1.0 - p) / reps), reps)


@dataclass(frozen=True)
class MaxRootReport:
    """Diagnostic for the summability of i * sqrt(P(max of i-run <= t))."""

    t: float
    i_values: tuple[int, ...]
    estimates: tuple[float, ...]
    std_errors: tuple[float, ...]
    partial_sums: tuple[float, ...]
    analytic_class: str | None
    analytic_pass: bool
    loglog_slope: float | None
    loglog_slope_se: float | None
    geometric_rate: float | None
    geometric_rate_se: float | None
    fitted_tail_beyond_imax: float | None
    empirical_pass: bool
    passed: bool
    detail: str = ""


def max_root_summability_diagnostic(
    spec: ProcessSpec, t: float, i_max: int, reps: int, stream_offset: int = 0
) -> MaxRootReport:
    """Estimate run probabilities up to i_max and judge their decay.

    PASS is declared analytically whenever a geometric bound is available
    (independent draws, the m-dependent blocking bound, or the Doeblin
    bound F(t)(1-eta_t)^{i-1}).  Otherwise the estimated decay must be
    consistent with beating every i^(-4) envelope: either the log-log
    regression slope of probability against run length undercuts -4 by two
    standard errors, or the fitted geometric rate (log-probability against
    run length) certifies exponential decay outright.
    """
    if i_max < 2:
        raise ConfigError(f"need i_max >= 2, got {i_max}")
    if reps < 2:
        raise ConfigError(f"need reps >= 2, got {reps}")
    rows = np.empty((reps, i_max))
    for r in range(reps):
        rows[r] = generate_values(spec, i_max, stream_offset + r)
    below = np.maximum.accumulate(rows, axis=1) <= t
    p_hat = below.mean(axis=0)
    se = np.sqrt(p_hat * (1.0 - p_hat) / reps)
    i_vals = np.arange(1, i_max + 1)
    partial = np.cumsum(i_vals * np.sqrt(p_hat))

    kind = spec.kind
    marginal = nominal_marginal(spec)
    Ft = float(marginal.cdf(t))
    analytic: str | None = None
    analytic_pass = False
    if Ft < 1.0:
        if isinstance(kind, IID):
            analytic = f"geometric: P = F(t)^i with F(t) = {Ft:.6g}"
            analytic_pass = True
        elif isinstance(kind, MDepGaussianMA):
            analytic = (
                f"blocking bound F(t)^(floor((i-1)/{kind.m + 1})+1) with F(t) = {Ft:.6g}"
            )
            analytic_pass = True
        elif isinstance(kind, MinorizedMarkov):
            eta_t = kind.eta_floor(t)
            analytic = f"Doeblin bound F(t)(1-eta_t)^(i-1) with eta_t = {eta_t:.6g}"
            analytic_pass = True

    def _fit(lx: NDArray[np.float64], ly: NDArray[np.float64]) -> tuple[float, float]:
        A = np.vstack((lx, np.ones_like(lx))).T
        coef, residuals, *_ = np.linalg.lstsq(A, ly, rcond=None)
        dof = max(lx.size - 2, 1)
        resid_var = float(residuals[0]) / dof if residuals.size else 0.0
        sxx = float(np.sum((lx - lx.mean()) ** 2))
        se = math.sqrt(resid_var / sxx) if sxx > 0 else math.inf
        return float(coef[0]), se

    pos = p_hat > 0
    slope = slope_se = rate = rate_se = tail_est = None
    empirical_pass = False
    if int(pos.sum()) >= 3:
        ipos = i_vals[pos].astype(np.float64)
        ly = np.log(p_hat[pos])
        slope, slope_se = _fit(np.log(ipos), ly)
        geo_slope, geo_se = _fit(ipos, ly)
        rate = math.exp(geo_slope)
        rate_se = rate * geo_se  # delta method
        empirical_pass = (slope + 2.0 * slope_se < -4.0) or (
            geo_slope + 2.0 * geo_se < 0.0
        )
        # remainder of the summability series past i_max, from the fitted
        # geometric decay: sqrt(p_i) ~ exp(alpha/2) s^i with s = exp(beta/2)
        s_root = math.exp(geo_slope / 2.0)
        if s_root < 1.0:
            alpha = float(np.mean(ly - geo_slope * ipos))
            m = i_max
            tail_est = (
                math.exp(alpha / 2.0)
                * s_root ** (m + 1)
                * ((m + 1) - m * s_root)
                / (1.0 - s_root) ** 2
            )
        else:
            tail_est = math.inf
    elif p_hat[-1] == 0.0:
        # probabilities collapse below Monte Carlo resolution almost at once
        empirical_pass = True

    return MaxRootReport(
        t=t,
        i_values=tuple(int(v) for v in i_vals),
        estimates=tuple(float(v) for v in p_hat),
        std_errors=tuple(float(v) for v in se),
        partial_sums=tuple(float(v) for v in partial),
        analytic_class=analytic,
        analytic_pass=analytic_pass,
        loglog_slope=slope,
        loglog_slope_se=slope_se,
        geometric_rate=rate,
        geometric_rate_se=rate_se,
        fitted_tail_beyond_imax=tail_est,
        empirical_pass=empirical_pass,
        passed=analytic_pass or empirical_pass,
        detail=mixing_class(spec),
    )


def spec_to_dict(spec: ProcessSpec) -> dict:
    kind = spec.kind
    if isinstance(kind, IID):
        return {"kind": "iid", "marginal": kind.marginal.name, "seed": spec.seed}
    if isinstance(kind, MDepGaussianMA):
        return {
            "kind": "mdep_gaussian_ma",
            "m": kind.m,
            "weights": list(kind.weights),
            "seed": spec.seed,
        }
    if isinstance(kind, MinorizedMarkov):
        return {
            "kind": "minorized_markov",
            "refresh_prob": kind.refresh_prob,
            "copula_phi": kind.copula_phi,
            "kernel": kind.kernel,
            "seed": spec.seed,
        }
    if isinstance(kind, GaussianAR1):
        return {"kind": "gaussian_ar1", "phi": kind.phi, "seed": spec.seed}
    raise ConfigError(f"unknown process kind {type(kind).__name__}")


def _marginal_from_name(name: str) -> MarginalModel:
    if name == "uniform01":
        return uniform01()
    if name == "std_normal":
        return std_normal()
    if name.startswith("exponential"):
        rate = 1.0
        if "(" in name:
            rate = float(name[name.index("(") + 1 : name.rindex(")")])
        return exponential(rate)
    if name.startswith("table:"):
        return tabulated_marginal(name[len("table:") :])
    raise ConfigError(f"unknown marginal {name!r}")


def spec_from_dict(d: dict) -> ProcessSpec:
    try:
        kind_name = d["kind"]
        seed = int(d.get("seed") or 0)
        if kind_name == "iid":
            kind: ProcessKind = IID(_marginal_from_name(d["marginal"]))
        elif kind_name == "mdep_gaussian_ma":
            kind = MDepGaussianMA(int(d["m"]), tuple(float(w) for w in d["weights"]))
        elif kind_name == "minorized_markov":
            kind = MinorizedMarkov(
                float(d["refresh_prob"]),
                float(d.get("copula_phi", 0.5)),
                str(d.get("kernel", "copula_refresh")),
            )
        elif kind_name == "gaussian_ar1":
            kind = GaussianAR1(float(d["phi"]))
        else:
            raise ConfigError(f"unknown process kind {kind_name!r}")
    except KeyError as exc:
        raise ConfigError(f"process spec missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed process spec: {exc}") from exc
    return ProcessSpec(kind=kind, seed=seed)
