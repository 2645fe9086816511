"""Monte Carlo harness verifying the limit theorems at desk scale.

Each ``run_*`` function draws replicated sample paths (disjoint RNG streams,
so replications may execute concurrently), evaluates the diagram functionals
with the vectorized kernels, and returns an ``ExperimentReport`` whose
verdicts each reference an explicit tolerance.  When a limit has a closed
form (i.i.d. marginals) the report compares against it; otherwise
convergence is judged by a Cauchy criterion along the length grid plus an
independent mega-run reference, since existence of the limits is what the
theory provides, not their values.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import stats as sstats

from . import kernels
from .diagram import Rectangle, TiePolicy, TimeSeries, compute_diagram, rectangle_count
from .errors import ConfigError, CornerConditionError
from .null_limits import (
    MarginalModel,
    expected_betti_finite_n,
    null_lifetime_tail,
    null_rectangle_mass,
    uniform01,
)
from .oracle import betti_bruteforce
from .processes import IID, ProcessSpec, generate_values, nominal_marginal, spec_from_dict, spec_to_dict
from .stats import StepFunction, sup_distance_from_lifetimes

__all__ = [
    "SllnConfig",
    "GlivenkoConfig",
    "UnboundedConfig",
    "CltConfig",
    "CovarianceConfig",
    "Verdict",
    "ExperimentReport",
    "run_slln_rectangles",
    "run_glivenko",
    "run_unbounded_functional_slln",
    "run_clt",
    "estimate_covariance_series",
    "run_experiment",
    "config_from_dict",
    "theoretical_lifetime_tail",
]

_MEGA_STREAM = 1 << 24  # replication streams never reach this offset


def _worker_count() -> int:
    env = os.environ.get("SUBLEVEL_PH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"SUBLEVEL_PH_THREADS must be an integer, got {env!r}") from exc
    return min(4, os.cpu_count() or 1)


def _map_ordered(fn: Callable, args: Sequence) -> list:
    workers = _worker_count()
    if workers == 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args))


def _check_grid(n_grid: Sequence[int], reps: int) -> None:
    if reps < 2:
        raise ConfigError(f"need reps >= 2, got {reps}")
    if not n_grid or any(n < 1 for n in n_grid):
        raise ConfigError("n_grid must contain positive lengths")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigError(f"n_grid must be strictly increasing, got {list(n_grid)}")


def _jsonify(obj):
    """JSON-safe deep copy: non-finite floats become 'inf'/'-inf'/'nan'."""
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isfinite(f):
            return f
        return "nan" if math.isnan(f) else ("inf" if f > 0 else "-inf")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    return obj


def _parse_extended(v) -> float:
    if isinstance(v, str):
        return float(v)
    return float(v)


@dataclass
class Verdict:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> dict:
        return _jsonify(
            {
                "name": self.name,
                "passed": bool(self.passed),
                "value": self.value,
                "tolerance": self.tolerance,
                "detail": self.detail,
            }
        )


@dataclass
class ExperimentReport:
    """Per-experiment output: tables, verdicts, and the config that produced
    them.  ``to_json`` is canonical (sorted keys, runtime excluded) so that
    identical configs yield identical bytes."""

    experiment: str
    config: dict
    tables: dict
    verdicts: list[Verdict]
    runtime_seconds: float | None = None

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self, include_runtime: bool = False) -> dict:
        d = {
            "experiment": self.experiment,
            "config": _jsonify(self.config),
            "tables": _jsonify(self.tables),
            "verdicts": [v.to_dict() for v in self.verdicts],
            "passed": self.passed,
        }
        if include_runtime and self.runtime_seconds is not None:
            d["runtime_seconds"] = self.runtime_seconds
        return d

    def to_json(self, include_runtime: bool = False) -> str:
        return json.dumps(self.to_dict(include_runtime), sort_keys=True, indent=2)


# ----------------------------------------------------------------------------
# configs
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SllnConfig:
    process: ProcessSpec
    n_grid: tuple[int, ...]
    reps: int
    rectangles: tuple[Rectangle, ...]
    rectangle_tolerance: float = 0.02
    mass_rate_se_factor: float = 3.0
    cross_check_fraction: float = 0.01
    stream_offset: int = 0
    collect_raw: bool = False

    def __post_init__(self) -> None:
        _check_grid(self.n_grid, self.reps)
        if not self.rectangles:
            raise ConfigError("need at least one target rectangle")


@dataclass(frozen=True)
class GlivenkoConfig:
    process: ProcessSpec
    n_grid: tuple[int, ...]
    reps: int
    sup_tolerance: float = 0.02
    mega_factor: int = 10
    stream_offset: int = 0
    collect_raw: bool = False

    def __post_init__(self) -> None:
        _check_grid(self.n_grid, self.reps)


@dataclass(frozen=True)
class UnboundedConfig:
    process: ProcessSpec
    n_grid: tuple[int, ...]
    reps: int
    powers: tuple[float, ...] = (1.0,)
    include_xlogx: bool = True
    alps_L: float = 0.2
    cauchy_tolerance: float = 0.01
    mega_tolerance: float = 0.01
    mega_factor: int = 10
    stream_offset: int = 0
    collect_raw: bool = False

    def __post_init__(self) -> None:
        _check_grid(self.n_grid, self.reps)
        if self.alps_L <= 0:
            raise ConfigError("alps_L must be positive")


@dataclass(frozen=True)
class CltConfig:
    process: ProcessSpec
    n_grid: tuple[int, ...]
    reps: int
    step_function: StepFunction
    alpha: float = 0.01
    variance_cauchy_tolerance: float = 0.10
    stream_offset: int = 0
    collect_raw: bool = False

    def __post_init__(self) -> None:
        _check_grid(self.n_grid, self.reps)


@dataclass(frozen=True)
class CovarianceConfig:
    process: ProcessSpec
    n: int
    reps: int
    pair1: tuple[float, float]
    pair2: tuple[float, float]
    K: int = 10
    stability_K_min: int = 5
    stability_tolerance: float = 0.05
    agreement_se_factor: float = 3.0
    path_length: int = 1 << 21
    batches: int = 32
    stream_offset: int = 0
    collect_raw: bool = False

    def __post_init__(self) -> None:
        if self.reps < 2:
            raise ConfigError(f"need reps >= 2, got {self.reps}")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.K < 0 or self.stability_K_min < 0:
            raise ConfigError("K values must be >= 0")
        for s, t in (self.pair1, self.pair2):
            if s > t:
                raise ConfigError(f"threshold pair needs s <= t, got ({s}, {t})")


# ----------------------------------------------------------------------------
# shared helpers
# ----------------------------------------------------------------------------


def _se(values: NDArray[np.float64]) -> float:
    if values.size < 2:
        return math.inf
    return float(values.std(ddof=1) / math.sqrt(values.size))


def theoretical_lifetime_tail(marginal: MarginalModel, grid_size: int = 2048) -> Callable:
    """Vectorized limiting lifetime tail for an i.i.d. marginal.

    The uniform marginal has the exact form 1 - ell; other marginals are
    tabulated by quadrature on a grid reaching down to tail < 1e-9 and
    linearly interpolated (tails are smooth and monotone, so the
    interpolation error is negligible against Monte Carlo noise).
    """
    if marginal.name == "uniform01":

        def tail_u(ell):
            arr = np.asarray(ell, dtype=np.float64)
            out = np.clip(1.0 - arr, 0.0, 1.0)
            return out if out.shape else float(out)

        return tail_u

    hi = 1.0
    while null_lifetime_tail(marginal, hi) > 1e-9 and hi < 1e12:
        hi *= 2.0
    grid = np.linspace(0.0, hi, grid_size)
    vals = np.asarray([null_lifetime_tail(marginal, g) for g in grid])

    def tail_i(ell):
        arr = np.asarray(ell, dtype=np.float64)
        out = np.interp(arr, grid, vals, left=1.0, right=0.0)
        out = np.where(np.isinf(arr), 0.0, out)
        return out if out.shape else float(out)

    return tail_i


def _empirical_tail(lifetimes: NDArray[np.float64], n_infinite: int) -> Callable:
    """Right-continuous empirical tail of a reference run (for non-i.i.d.)."""
    srt = np.sort(lifetimes[lifetimes > 0])
    n_total = lifetimes.size + n_infinite

    def tail(ell):
        arr = np.asarray(ell, dtype=np.float64)
        above = srt.size - np.searchsorted(srt, arr, side="right")
        out = (n_infinite + above) / n_total
        out = np.where(np.isinf(arr), n_infinite / n_total, out)
        return out if out.shape else float(out)

    return tail


def _measure_betti_brute(ts: TimeSeries, s: float, t: float) -> int:
    if t == math.inf or s == -math.inf:
        return 0
    return betti_bruteforce(ts, s, t)


def _rect_count_brute(ts: TimeSeries, r: Rectangle) -> int:
    return (
        _measure_betti_brute(ts, r.s2, r.t1)
        - _measure_betti_brute(ts, r.s2, r.t2)
        - _measure_betti_brute(ts, r.s1, r.t1)
        + _measure_betti_brute(ts, r.s1, r.t2)
    )


def _exact_step_mean(marginal: MarginalModel, n: int, f: StepFunction) -> float:
    """Exact i.i.d. expectation of the step integral at finite n."""
    total = 0.0
    for a, r in f.terms:
        for s, t, sign in (
            (r.s2, r.t1, 1.0),
            (r.s2, r.t2, -1.0),
            (r.s1, r.t1, -1.0),
            (r.s1, r.t2, 1.0),
        ):
            if t == math.inf or s == -math.inf:
                continue
            total += a * sign * expected_betti_finite_n(marginal, n, s, t)
    return total


# ----------------------------------------------------------------------------
# experiments
# ----------------------------------------------------------------------------


def run_slln_rectangles(cfg: SllnConfig) -> ExperimentReport:
    """Normalized rectangle masses along the length grid.

    For each n and rectangle R the per-replication ratio xi(R)/xi(Delta) is
    averaged; i.i.d. processes are compared against the closed-form limit
    and the point-count rate xi(Delta)/n against 1/3, while other processes
    get Cauchy-convergence verdicts.  On series short enough (n <= 200) a
    subsample of replications is re-counted through the diagram and the
    brute-force Betti sums, which must agree exactly.
    """
    t0 = time.perf_counter()
    spec = cfg.process
    iid = isinstance(spec.kind, IID)
    marginal = nominal_marginal(spec)
    rects = cfg.rectangles

    per_n: list[dict] = []
    raw: list[dict] = []
    cross_mismatches = 0
    cross_checked = 0
    for k, n in enumerate(cfg.n_grid):

        def task(r: int, n: int = n, k: int = k):
            x = generate_values(spec, n, cfg.stream_offset + k * cfg.reps + r)
            nmin = kernels.local_minima_count(x)
            counts = [kernels.rect_count(x, rect) for rect in rects]
            return x, nmin, counts

        rows = _map_ordered(task, range(cfg.reps))
        if cfg.collect_raw:
            for r, row in enumerate(rows):
                entry = {"n": n, "rep": r, "n_minima": row[1]}
                entry.update({f"rect{j}": c for j, c in enumerate(row[2])})
                raw.append(entry)
        nmins = np.asarray([row[1] for row in rows], dtype=np.float64)
        ratio_mat = np.asarray(
            [[c / row[1] for c in row[2]] for row in rows], dtype=np.float64
        )
        if n <= 200 and cfg.cross_check_fraction > 0:
            n_check = max(1, int(cfg.cross_check_fraction * cfg.reps))
            for row in rows[:n_check]:
                ts = TimeSeries(row[0], TiePolicy.PERTURB_BY_INDEX)
                diag = compute_diagram(ts)
                for rect, kernel_count in zip(rects, row[2]):
                    cross_checked += 1
                    if (
                        rectangle_count(diag, rect) != kernel_count
                        or _rect_count_brute(ts, rect) != kernel_count
                    ):
                        cross_mismatches += 1
        per_n.append(
            {
                "n": n,
                "mass_rate_mean": float(np.mean(nmins / n)),
                "mass_rate_se": _se(nmins / n),
                "ratio_means": [float(v) for v in ratio_mat.mean(axis=0)],
                "ratio_ses": [_se(ratio_mat[:, j]) for j in range(len(rects))],
            }
        )

    verdicts: list[Verdict] = []
    last, prev = per_n[-1], per_n[-2] if len(per_n) > 1 else per_n[-1]
    for j, rect in enumerate(rects):
        mean_last = last["ratio_means"][j]
        if iid:
            theory = null_rectangle_mass(marginal, rect)
            dev = abs(mean_last - theory)
            verdicts.append(
                Verdict(
                    name=f"rectangle_{j}_limit",
                    passed=dev <= cfg.rectangle_tolerance,
                    value=dev,
                    tolerance=cfg.rectangle_tolerance,
                    detail=f"mean ratio {mean_last:.6f} vs closed form {theory:.6f} at n={last['n']}",
                )
            )
        else:
            dev = abs(mean_last - prev["ratio_means"][j])
            verdicts.append(
                Verdict(
                    name=f"rectangle_{j}_cauchy",
                    passed=dev <= cfg.rectangle_tolerance,
                    value=dev,
                    tolerance=cfg.rectangle_tolerance,
                    detail=f"successive ratio means differ by {dev:.6f}",
                )
            )
    if iid:
        dev = abs(last["mass_rate_mean"] - 1.0 / 3.0)
        tol = cfg.mass_rate_se_factor * last["mass_rate_se"]
        verdicts.append(
            Verdict(
                name="mass_rate_one_third",
                passed=dev <= tol,
                value=dev,
                tolerance=tol,
                detail=f"xi(Delta)/n = {last['mass_rate_mean']:.6f} at n={last['n']}",
            )
        )
    else:
        dev = abs(last["mass_rate_mean"] - prev["mass_rate_mean"])
        verdicts.append(
            Verdict(
                name="mass_rate_cauchy",
                passed=dev <= cfg.rectangle_tolerance,
                value=dev,
                tolerance=cfg.rectangle_tolerance,
                detail="successive xi(Delta)/n means",
            )
        )
    if cross_checked:
        verdicts.append(
            Verdict(
                name="cross_oracle_subsample",
                passed=cross_mismatches == 0,
                value=float(cross_mismatches),
                tolerance=0.0,
                detail=f"{cross_checked} diagram/kernel/bruteforce comparisons",
            )
        )

    tables: dict = {"per_n": per_n}
    if cfg.collect_raw:
        tables["raw"] = raw
    return ExperimentReport(
        experiment="slln_rectangles",
        config=_slln_config_dict(cfg),
        tables=tables,
        verdicts=verdicts,
        runtime_seconds=time.perf_counter() - t0,
    )


def run_glivenko(cfg: GlivenkoConfig) -> ExperimentReport:
    """Sup distance between empirical and limiting lifetime tails per n.

    i.i.d. processes use the closed-form/quadrature tail; other processes
    use the empirical tail of an independent mega-run as reference.  PASS
    requires the median sup distance to decrease along the grid and to end
    below the tolerance.
    """
    t0 = time.perf_counter()
    spec = cfg.process
    if isinstance(spec.kind, IID):
        tail = theoretical_lifetime_tail(spec.kind.marginal)
        reference = "closed-form / quadrature tail"
    else:
        x_ref = generate_values(spec, cfg.mega_factor * cfg.n_grid[-1], _MEGA_STREAM)
        tail = _empirical_tail(kernels.finite_lifetimes(x_ref), 1)
        reference = f"mega-run empirical tail (n = {cfg.mega_factor * cfg.n_grid[-1]})"

    per_n = []
    raw: list[dict] = []
    for k, n in enumerate(cfg.n_grid):

        def task(r: int, n: int = n, k: int = k):
            x = generate_values(spec, n, cfg.stream_offset + k * cfg.reps + r)
            return sup_distance_from_lifetimes(kernels.finite_lifetimes(x), 1, tail)

        dists = np.asarray(_map_ordered(task, range(cfg.reps)))
        if cfg.collect_raw:
            raw.extend(
                {"n": n, "rep": r, "sup_distance": float(v)} for r, v in enumerate(dists)
            )
        per_n.append(
            {
                "n": n,
                "median_sup_distance": float(np.median(dists)),
                "mean_sup_distance": float(dists.mean()),
                "max_sup_distance": float(dists.max()),
            }
        )

    verdicts = [
        Verdict(
            name="final_median_below_tolerance",
            passed=per_n[-1]["median_sup_distance"] < cfg.sup_tolerance,
            value=per_n[-1]["median_sup_distance"],
            tolerance=cfg.sup_tolerance,
            detail=f"n={cfg.n_grid[-1]}, reference: {reference}",
        )
    ]
    for a, b in zip(per_n, per_n[1:]):
        verdicts.append(
            Verdict(
                name=f"median_decreases_{a['n']}_to_{b['n']}",
                passed=b["median_sup_distance"] < a["median_sup_distance"],
                value=b["median_sup_distance"] - a["median_sup_distance"],
                tolerance=0.0,
                detail="median sup distance must shrink with n",
            )
        )
    tables: dict = {"per_n": per_n, "reference": reference}
    if cfg.collect_raw:
        tables["raw"] = raw
    return ExperimentReport(
        experiment="glivenko",
        config=_glivenko_config_dict(cfg),
        tables=tables,
        verdicts=verdicts,
        runtime_seconds=time.perf_counter() - t0,
    )


def _unbounded_targets(
    lifetimes: NDArray[np.float64], cfg: UnboundedConfig
) -> dict[str, float]:
    """Per-replication values of every unbounded-functional target."""
    n_fin = lifetimes.size
    n_tot = n_fin + 1
    out: dict[str, float] = {}
    for p in cfg.powers:
        out[f"norm_total_persistence_p{p:g}"] = (
            float(np.sum(lifetimes**p)) / n_fin if n_fin else math.nan
        )
    if cfg.include_xlogx:
        pos = lifetimes[lifetimes > 0]
        out["norm_xlogx"] = float(np.sum(pos * np.log(pos))) / n_fin if n_fin else math.nan
    # entropy offset E_n - log xi~(Delta)
    pos = lifetimes[lifetimes > 0]
    L = float(pos.sum())
    if n_fin and L > 0:
        entropy = math.log(L) - float(np.dot(pos, np.log(pos))) / L
        out["entropy_offset"] = entropy - math.log(n_fin)
    else:
        out["entropy_offset"] = math.nan
    # ALPS offset L log xi(Delta) - A_n^L, computed from the same lifetimes
    Ltrunc = cfg.alps_L
    srt = np.sort(pos)
    total = 0.0
    prev = 0.0
    k = srt.size
    for idx, v in enumerate(srt.tolist()):
        hi = min(v, Ltrunc)
        if hi > prev:
            total += (hi - prev) * math.log(1 + (k - idx))
            prev = hi
        if v >= Ltrunc:
            break
    out["alps_offset"] = Ltrunc * math.log(n_tot) - total
    return out


def run_unbounded_functional_slln(cfg: UnboundedConfig) -> ExperimentReport:
    """Convergence of normalized unbounded functionals, entropy and ALPS.

    These limits have no closed form for general processes, so PASS is a
    Cauchy criterion on the per-n Monte Carlo means plus agreement with a
    single independent mega-run at mega_factor times the largest n.
    """
    t0 = time.perf_counter()
    spec = cfg.process
    per_n = []
    raw: list[dict] = []
    names: list[str] = []
    for k, n in enumerate(cfg.n_grid):

        def task(r: int, n: int = n, k: int = k):
            x = generate_values(spec, n, cfg.stream_offset + k * cfg.reps + r)
            return _unbounded_targets(kernels.finite_lifetimes(x), cfg)

        rows = _map_ordered(task, range(cfg.reps))
        if cfg.collect_raw:
            raw.extend({"n": n, "rep": r, **row} for r, row in enumerate(rows))
        names = list(rows[0].keys())
        table = {"n": n}
        for name in names:
            vals = np.asarray([row[name] for row in rows])
            table[f"{name}_mean"] = float(np.nanmean(vals))
            table[f"{name}_se"] = _se(vals[~np.isnan(vals)])
        per_n.append(table)

    x_mega = generate_values(spec, cfg.mega_factor * cfg.n_grid[-1], _MEGA_STREAM)
    mega = _unbounded_targets(kernels.finite_lifetimes(x_mega), cfg)

    verdicts = []
    last, prev = per_n[-1], per_n[-2] if len(per_n) > 1 else per_n[-1]
    for name in names:
        dev = abs(last[f"{name}_mean"] - prev[f"{name}_mean"])
        verdicts.append(
            Verdict(
                name=f"{name}_cauchy",
                passed=dev < cfg.cauchy_tolerance,
                value=dev,
                tolerance=cfg.cauchy_tolerance,
                detail=f"|mean(n={last['n']}) - mean(n={prev['n']})|",
            )
        )
        dev_mega = abs(last[f"{name}_mean"] - mega[name])
        verdicts.append(
            Verdict(
                name=f"{name}_mega_run",
                passed=dev_mega < cfg.mega_tolerance,
                value=dev_mega,
                tolerance=cfg.mega_tolerance,
                detail=f"vs single run at n = {cfg.mega_factor * cfg.n_grid[-1]}",
            )
        )
    tables: dict = {"per_n": per_n, "mega_run": _jsonify(mega)}
    if cfg.collect_raw:
        tables["raw"] = raw
    return ExperimentReport(
        experiment="unbounded",
        config=_unbounded_config_dict(cfg),
        tables=tables,
        verdicts=verdicts,
        runtime_seconds=time.perf_counter() - t0,
    )


def _check_corners(marginal: MarginalModel, f: StepFunction) -> None:
    for _, r in f.terms:
        for s in (r.s1, r.s2):
            if s != -math.inf and not float(marginal.cdf(s)) > 0.0:
                raise CornerConditionError(f"corner s={s} has F(s) = 0")
        for t in (r.t1, r.t2):
            if t != math.inf and not float(marginal.cdf(t)) < 1.0:
                raise CornerConditionError(f"corner t={t} has F(t) = 1")


def run_clt(cfg: CltConfig) -> ExperimentReport:
    """Normality of the centered, scaled step integral.

    Per n the replication values of xi(f) are studentized (centering by the
    across-replication mean, as the true expectation has no closed form for
    general processes) and tested against the standard normal with a
    two-sided KS test; the variance trajectory var(xi(f))/n must satisfy a
    relative Cauchy criterion, giving the estimate of the limiting variance.
    For i.i.d. processes the exact finite-n expectation is reported next to
    the sample mean as a cross-check.
    """
    t0 = time.perf_counter()
    spec = cfg.process
    marginal = nominal_marginal(spec)
    f = cfg.step_function
    if f.terms:
        _check_corners(marginal, f)
    iid = isinstance(spec.kind, IID)

    per_n = []
    raw: list[dict] = []
    for k, n in enumerate(cfg.n_grid):

        def task(r: int, n: int = n, k: int = k):
            x = generate_values(spec, n, cfg.stream_offset + k * cfg.reps + r)
            return math.fsum(a * kernels.rect_count(x, rect) for a, rect in f.terms)

        vals = np.asarray(_map_ordered(task, range(cfg.reps)))
        if cfg.collect_raw:
            raw.extend(
                {"n": n, "rep": r, "step_integral": float(v)} for r, v in enumerate(vals)
            )
        var_hat = float(vals.var(ddof=1)) / n
        row = {
            "n": n,
            "mean": float(vals.mean()),
            "variance_over_n": var_hat,
            "skewness": float(sstats.skew(vals)) if vals.std() > 0 else 0.0,
            "excess_kurtosis": float(sstats.kurtosis(vals)) if vals.std() > 0 else 0.0,
        }
        if vals.std(ddof=1) > 0:
            z = (vals - vals.mean()) / vals.std(ddof=1)
            ks_stat, ks_p = sstats.kstest(z, "norm")
            row["ks_stat"], row["ks_p"] = float(ks_stat), float(ks_p)
            row["z_hist"] = np.histogram(z, bins=np.linspace(-4.0, 4.0, 41))[0].tolist()
        else:
            row["ks_stat"], row["ks_p"] = 0.0, 1.0
            row["degenerate"] = True
            row["z_hist"] = [0] * 40
        if iid:
            row["exact_mean"] = _exact_step_mean(marginal, n, f)
        per_n.append(row)

    last, prev = per_n[-1], per_n[-2] if len(per_n) > 1 else per_n[-1]
    verdicts = [
        Verdict(
            name="ks_normality",
            passed=last["ks_p"] > cfg.alpha,
            value=last["ks_p"],
            tolerance=cfg.alpha,
            detail=f"KS p-value of studentized values at n={last['n']}, reps={cfg.reps}",
        )
    ]
    if prev["variance_over_n"] > 0:
        rel = abs(last["variance_over_n"] - prev["variance_over_n"]) / prev["variance_over_n"]
    else:
        rel = 0.0 if last["variance_over_n"] == 0 else math.inf
    verdicts.append(
        Verdict(
            name="variance_trajectory_cauchy",
            passed=rel < cfg.variance_cauchy_tolerance,
            value=rel,
            tolerance=cfg.variance_cauchy_tolerance,
            detail=f"I_f estimate {last['variance_over_n']:.6f} at n={last['n']}",
        )
    )
    tables: dict = {"per_n": per_n}
    if cfg.collect_raw:
        tables["raw"] = raw
    return ExperimentReport(
        experiment="clt",
        config=_clt_config_dict(cfg),
        tables=tables,
        verdicts=verdicts,
        runtime_seconds=time.perf_counter() - t0,
    )


def _y_indicator_series(x: NDArray[np.float64], s: float, t: float) -> NDArray[np.float64]:
    """Y_j = 1 iff a maximal run of values <= t starts at j with min <= s.

    Position 0 is forced to 0 (no left flank exists on a finite window);
    the unterminated final run, if any, is handled by the caller's cut.
    """
    mask = x <= t
    starts = mask.copy()
    starts[1:] &= ~mask[:-1]
    idx = np.flatnonzero(starts)
    y = np.zeros(x.size)
    if idx.size:
        run_min = np.minimum.reduceat(np.where(mask, x, np.inf), idx)
        y[idx] = (run_min <= s).astype(np.float64)
    y[0] = 0.0
    return y


def estimate_covariance_series(cfg: CovarianceConfig) -> ExperimentReport:
    """Two routes to the limiting covariance of persistent Betti numbers.

    (a) across independent replications at length n: sample covariance of
    the two Betti counts divided by n, with a batch-means standard error;
    (b) the lag series: the variance term of the run-start indicators plus
    both one-sided lag covariances up to the truncation K, estimated by
    time-averaging along a single long path (windows grown by comparing the
    half-path estimate, which the report records).
    """
    t0 = time.perf_counter()
    spec = cfg.process
    marginal = nominal_marginal(spec)
    (s1, t1), (s2, t2) = cfg.pair1, cfg.pair2
    # degenerate pairs make one Betti count constant: both routes are 0
    degenerate = any(
        float(marginal.cdf(s)) == 0.0 or float(marginal.cdf(t)) == 1.0
        for s, t in (cfg.pair1, cfg.pair2)
    )
    if degenerate:
        verdicts = [
            Verdict(
                name="empirical_vs_series",
                passed=True,
                value=0.0,
                tolerance=0.0,
                detail="degenerate pair: a Betti count is a.s. constant, covariance 0",
            )
        ]
        return ExperimentReport(
            experiment="covariance",
            config=_covariance_config_dict(cfg),
            tables={
                "empirical": {"value": 0.0, "se": 0.0, "n": cfg.n, "reps": cfg.reps},
                "series_by_K": [0.0] * (cfg.K + 1),
                "series_se": 0.0,
                "degenerate": True,
            },
            verdicts=verdicts,
            runtime_seconds=time.perf_counter() - t0,
        )

    # (a) empirical across replications
    def task(r: int):
        x = generate_values(spec, cfg.n, cfg.stream_offset + r)
        return kernels.betti_count(x, s1, t1), kernels.betti_count(x, s2, t2)

    rows = np.asarray(_map_ordered(task, range(cfg.reps)), dtype=np.float64)
    raw = (
        [
            {"rep": r, "betti1": int(v1), "betti2": int(v2)}
            for r, (v1, v2) in enumerate(rows.tolist())
        ]
        if cfg.collect_raw
        else []
    )
    emp = float(np.cov(rows[:, 0], rows[:, 1], ddof=1)[0, 1]) / cfg.n
    n_batches = min(20, cfg.reps // 2)
    batch_vals = []
    for b in range(n_batches):
        chunk = rows[b::n_batches]
        if chunk.shape[0] >= 2:
            batch_vals.append(float(np.cov(chunk[:, 0], chunk[:, 1], ddof=1)[0, 1]) / cfg.n)
    emp_se = _se(np.asarray(batch_vals))

    # (b) truncated lag series along one long path
    x = generate_values(spec, cfg.path_length, _MEGA_STREAM + 1)
    y1 = _y_indicator_series(x, s1, t1)
    y2 = _y_indicator_series(x, s2, t2)
    # usable indices: before the last exceedance of either level (so every
    # counted run has terminated) and leaving room for the largest lag
    last1 = np.flatnonzero(x > t1)
    last2 = np.flatnonzero(x > t2)
    cut = int(min(last1[-1] if last1.size else 0, last2[-1] if last2.size else 0))
    J = cut - cfg.K - 1
    if J < cfg.batches * 10:
        raise ConfigError("path_length too short for the requested K and batches")

    def series_estimates(lo: int, hi: int) -> NDArray[np.float64]:
        """series(K') for K' = 0..K over the index window [lo, hi)."""
        a = y1[lo:hi]
        b = y2[lo:hi]
        ma, mb = a.mean(), b.mean()
        terms = np.empty(cfg.K + 1)
        terms[0] = float(np.mean(a * b)) - ma * mb
        for k in range(1, cfg.K + 1):
            fwd = float(np.mean(a[:-k] * b[k:])) - ma * mb
            bwd = float(np.mean(a[k:] * b[:-k])) - ma * mb
            terms[k] = fwd + bwd
        return np.cumsum(terms)

    full = series_estimates(1, J)
    half = series_estimates(1, J // 2)
    block_edges = np.linspace(1, J, cfg.batches + 1, dtype=int)
    block_last = np.asarray(
        [series_estimates(a, b)[-1] for a, b in zip(block_edges[:-1], block_edges[1:])]
    )
    series_se = _se(block_last)

    series_K = float(full[-1])
    combined = math.sqrt(emp_se**2 + series_se**2)
    agree = abs(emp - series_K)
    verdicts = [
        Verdict(
            name="empirical_vs_series",
            passed=agree <= cfg.agreement_se_factor * combined,
            value=agree,
            tolerance=cfg.agreement_se_factor * combined,
            detail=f"empirical {emp:.6f} (se {emp_se:.2g}) vs series {series_K:.6f} (se {series_se:.2g})",
        )
    ]
    scale = max(abs(series_K), 1e-12)
    worst = max(
        abs(float(full[kp]) - series_K) / scale for kp in range(cfg.stability_K_min, cfg.K + 1)
    )
    verdicts.append(
        Verdict(
            name="series_stable_in_K",
            passed=worst < cfg.stability_tolerance,
            value=worst,
            tolerance=cfg.stability_tolerance,
            detail=f"max relative change over K in [{cfg.stability_K_min}, {cfg.K}]",
        )
    )
    tables = {
        "empirical": {"value": emp, "se": emp_se, "n": cfg.n, "reps": cfg.reps},
        "series_by_K": [float(v) for v in full],
        "series_se": series_se,
        "path_length": cfg.path_length,
        "half_path_value": float(half[-1]),
        "half_path_rel_diff": abs(float(half[-1]) - series_K) / scale,
    }
    if cfg.collect_raw:
        tables["raw"] = raw
    return ExperimentReport(
        experiment="covariance",
        config=_covariance_config_dict(cfg),
        tables=tables,
        verdicts=verdicts,
        runtime_seconds=time.perf_counter() - t0,
    )


# ----------------------------------------------------------------------------
# config (de)serialization
# ----------------------------------------------------------------------------


def _rect_to_list(r: Rectangle) -> list:
    return _jsonify([r.s1, r.s2, r.t1, r.t2])


def _rect_from_list(lst) -> Rectangle:
    if len(lst) != 4:
        raise ConfigError(f"rectangle needs 4 coordinates, got {lst}")
    return Rectangle(*(_parse_extended(v) for v in lst))


def _slln_config_dict(cfg: SllnConfig) -> dict:
    return {
        "experiment": "slln_rectangles",
        "process": spec_to_dict(cfg.process),
        "n_grid": list(cfg.n_grid),
        "reps": cfg.reps,
        "rectangles": [_rect_to_list(r) for r in cfg.rectangles],
        "rectangle_tolerance": cfg.rectangle_tolerance,
        "mass_rate_se_factor": cfg.mass_rate_se_factor,
        "cross_check_fraction": cfg.cross_check_fraction,
        "stream_offset": cfg.stream_offset,
        "collect_raw": cfg.collect_raw,
    }


def _glivenko_config_dict(cfg: GlivenkoConfig) -> dict:
    return {
        "experiment": "glivenko",
        "process": spec_to_dict(cfg.process),
        "n_grid": list(cfg.n_grid),
        "reps": cfg.reps,
        "sup_tolerance": cfg.sup_tolerance,
        "mega_factor": cfg.mega_factor,
        "stream_offset": cfg.stream_offset,
        "collect_raw": cfg.collect_raw,
    }


def _unbounded_config_dict(cfg: UnboundedConfig) -> dict:
    return {
        "experiment": "unbounded",
        "process": spec_to_dict(cfg.process),
        "n_grid": list(cfg.n_grid),
        "reps": cfg.reps,
        "powers": list(cfg.powers),
        "include_xlogx": cfg.include_xlogx,
        "alps_L": cfg.alps_L,
        "cauchy_tolerance": cfg.cauchy_tolerance,
        "mega_tolerance": cfg.mega_tolerance,
        "mega_factor": cfg.mega_factor,
        "stream_offset": cfg.stream_offset,
        "collect_raw": cfg.collect_raw,
    }


def _clt_config_dict(cfg: CltConfig) -> dict:
    return {
        "experiment": "clt",
        "process": spec_to_dict(cfg.process),
        "n_grid": list(cfg.n_grid),
        "reps": cfg.reps,
        "step_function": [[a, _rect_to_list(r)] for a, r in cfg.step_function.terms],
        "alpha": cfg.alpha,
        "variance_cauchy_tolerance": cfg.variance_cauchy_tolerance,
        "stream_offset": cfg.stream_offset,
        "collect_raw": cfg.collect_raw,
    }


def _covariance_config_dict(cfg: CovarianceConfig) -> dict:
    return {
        "experiment": "covariance",
        "process": spec_to_dict(cfg.process),
        "n": cfg.n,
        "reps": cfg.reps,
        "pair1": list(cfg.pair1),
        "pair2": list(cfg.pair2),
        "K": cfg.K,
        "stability_K_min": cfg.stability_K_min,
        "stability_tolerance": cfg.stability_tolerance,
        "agreement_se_factor": cfg.agreement_se_factor,
        "path_length": cfg.path_length,
        "batches": cfg.batches,
        "stream_offset": cfg.stream_offset,
        "collect_raw": cfg.collect_raw,
    }


def config_from_dict(d: dict):
    """Build the appropriate experiment config from a parsed JSON object."""
    try:
        experiment = d["experiment"]
        process = spec_from_dict(d["process"])
    except KeyError as exc:
        raise ConfigError(f"config missing field {exc}") from exc
    try:
        if experiment == "slln_rectangles":
            return SllnConfig(
                process=process,
                n_grid=tuple(int(n) for n in d["n_grid"]),
                reps=int(d["reps"]),
                rectangles=tuple(_rect_from_list(r) for r in d["rectangles"]),
                rectangle_tolerance=float(d.get("rectangle_tolerance", 0.02)),
                mass_rate_se_factor=float(d.get("mass_rate_se_factor", 3.0)),
                cross_check_fraction=float(d.get("cross_check_fraction", 0.01)),
                stream_offset=int(d.get("stream_offset", 0)),
                collect_raw=bool(d.get("collect_raw", False)),
            )
        if experiment == "glivenko":
            return GlivenkoConfig(
                process=process,
                n_grid=tuple(int(n) for n in d["n_grid"]),
                reps=int(d["reps"]),
                sup_tolerance=float(d.get("sup_tolerance", 0.02)),
                mega_factor=int(d.get("mega_factor", 10)),
                stream_offset=int(d.get("stream_offset", 0)),
                collect_raw=bool(d.get("collect_raw", False)),
            )
        if experiment == "unbounded":
            return UnboundedConfig(
                process=process,
                n_grid=tuple(int(n) for n in d["n_grid"]),
                reps=int(d["reps"]),
                powers=tuple(float(p) for p in d.get("powers", [1.0])),
                include_xlogx=bool(d.get("include_xlogx", True)),
                alps_L=float(d.get("alps_L", 0.2)),
                cauchy_tolerance=float(d.get("cauchy_tolerance", 0.01)),
                mega_tolerance=float(d.get("mega_tolerance", 0.01)),
                mega_factor=int(d.get("mega_factor", 10)),
                stream_offset=int(d.get("stream_offset", 0)),
                collect_raw=bool(d.get("collect_raw", False)),
            )
        if experiment == "clt":
            terms = tuple(
                (float(a), _rect_from_list(r)) for a, r in d["step_function"]
            )
            return CltConfig(
                process=process,
                n_grid=tuple(int(n) for n in d["n_grid"]),
                reps=int(d["reps"]),
                step_function=StepFunction(terms),
                alpha=float(d.get("alpha", 0.01)),
                variance_cauchy_tolerance=float(d.get("variance_cauchy_tolerance", 0.10)),
                stream_offset=int(d.get("stream_offset", 0)),
                collect_raw=bool(d.get("collect_raw", False)),
            )
        if experiment == "covariance":
            return CovarianceConfig(
                process=process,
                n=int(d["n"]),
                reps=int(d["reps"]),
                pair1=(float(d["pair1"][0]), float(d["pair1"][1])),
                pair2=(float(d["pair2"][0]), float(d["pair2"][1])),
                K=int(d.get("K", 10)),
                stability_K_min=int(d.get("stability_K_min", 5)),
                stability_tolerance=float(d.get("stability_tolerance", 0.05)),
                agreement_se_factor=float(d.get("agreement_se_factor", 3.0)),
                path_length=int(d.get("path_length", 1 << 21)),
                batches=int(d.get("batches", 32)),
                stream_offset=int(d.get("stream_offset", 0)),
                collect_raw=bool(d.get("collect_raw", False)),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {experiment} config: {exc}") from exc
    raise ConfigError(f"unknown experiment {experiment!r}")


_RUNNERS = {
    SllnConfig: run_slln_rectangles,
    GlivenkoConfig: run_glivenko,
    UnboundedConfig: run_unbounded_functional_slln,
    CltConfig: run_clt,
    CovarianceConfig: estimate_covariance_series,
}


def run_experiment(cfg) -> ExperimentReport:
    """Dispatch a config object to its runner."""
    try:
        runner = _RUNNERS[type(cfg)]
    except KeyError as exc:
        raise ConfigError(f"no runner for config type {type(cfg).__name__}") from exc
    return runner(cfg)
