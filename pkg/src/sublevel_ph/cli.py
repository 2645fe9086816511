"""Command-line interface.

Subcommands: diagram, stats, null, simulate, verify-slln, verify-clt,
covariance.  Reports and data go to stdout or --out as CSV/JSON; figures are
rendered next to --out unless --no-figures; diagnostics go to stderr.

Exit codes: 0 success / all verdicts PASS, 1 a verdict FAILED, 2 input parse
error, 3 consecutive tie under the strict tie policy, 4 entropy requested on
a diagram without finite points, 5 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .diagram import PersistenceDiagram, Rectangle, TiePolicy, TimeSeries, compute_diagram
from .errors import (
    ConfigError,
    ConsecutiveTieError,
    EmptySeriesError,
    NonFiniteInputError,
    SublevelPHError,
)
from .experiments import config_from_dict, run_experiment
from .null_limits import (
    expected_betti_finite_n,
    limiting_betti_ratio,
    null_density,
    null_lifetime_tail,
    null_rectangle_mass,
    sample_null_diagram_points,
)
from .processes import ProcessSpec, generate_values, spec_from_dict, _marginal_from_name
from .stats import stats_report

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_PARSE = 2
EXIT_TIE = 3
EXIT_NO_FINITE = 4
EXIT_CONFIG = 5


def _read_series(path: str) -> np.ndarray:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    values = []
    for i, ln in enumerate(lines):
        tok = ln.split(",")[0].strip()
        try:
            values.append(float(tok))
        except ValueError:
            if i == 0 and len(lines) > 1:
                continue  # tolerate a single header row
            raise
    return np.asarray(values, dtype=np.float64)


def _tie_policy(name: str) -> TiePolicy:
    return TiePolicy.ERROR if name == "error" else TiePolicy.PERTURB_BY_INDEX


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _diagram_json(d: PersistenceDiagram) -> str:
    pts = [[b, "inf" if dd == math.inf else dd] for b, dd in d.points()]
    return json.dumps({"n": d.n, "points": pts}, sort_keys=True, indent=2) + "\n"


def cmd_diagram(args: argparse.Namespace) -> int:
    try:
        values = _read_series(args.input)
    except (ValueError, OSError) as exc:
        print(f"error: cannot parse series: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        ts = TimeSeries(values, _tie_policy(args.tie_policy))
    except ConsecutiveTieError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TIE
    except (EmptySeriesError, NonFiniteInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    diag = compute_diagram(ts)
    text = _diagram_json(diag) if args.format == "json" else diag.to_csv()
    _emit(text, args.out)
    if args.out and args.figures:
        from .figures import render_diagram

        for p in render_diagram(diag, Path(args.out).with_suffix(".png")):
            print(f"figure: {p}", file=sys.stderr)
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    try:
        values = _read_series(args.input)
    except (ValueError, OSError) as exc:
        print(f"error: cannot parse series: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        ts = TimeSeries(values, _tie_policy(args.tie_policy))
    except ConsecutiveTieError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TIE
    except (EmptySeriesError, NonFiniteInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    diag = compute_diagram(ts)
    alps_L = math.inf if args.alps_L in (None, "inf") else float(args.alps_L)
    report = stats_report(diag, alps_L=alps_L, total_p=args.total_p)
    if args.entropy and report["entropy"] is None:
        print("error: entropy undefined: no finite points with positive lifetime",
              file=sys.stderr)
        return EXIT_NO_FINITE
    _emit(json.dumps(report, sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_null(args: argparse.Namespace) -> int:
    try:
        marginal = _marginal_from_name(args.marginal)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.betti_ratio is not None:
            s, t = args.betti_ratio
            out = {"limiting_betti_ratio": limiting_betti_ratio(marginal, s, t)}
        elif args.tail is not None:
            out = {"lifetime_tail": null_lifetime_tail(marginal, args.tail)}
        elif args.density is not None:
            x, y = args.density
            out = {"density": null_density(marginal, x, y)}
        elif args.mass is not None:
            r = Rectangle(*args.mass)
            out = {"rectangle_mass": null_rectangle_mass(marginal, r)}
        elif args.expected_betti is not None:
            n, s, t = args.expected_betti
            out = {"expected_betti": expected_betti_finite_n(marginal, int(n), s, t)}
        elif args.sample is not None:
            rng = np.random.default_rng(np.random.SeedSequence(args.seed))
            pts, rate = sample_null_diagram_points(marginal, args.sample, rng)
            lines = ["x,y"] + [f"{x!r},{y!r}" for x, y in pts.tolist()]
            _emit("\n".join(lines) + "\n", args.out)
            print(f"acceptance rate: {rate:.4f}", file=sys.stderr)
            return EXIT_OK
        else:
            print("error: choose one of --betti-ratio/--tail/--density/--mass/"
                  "--expected-betti/--sample", file=sys.stderr)
            return EXIT_CONFIG
    except SublevelPHError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(json.dumps(out, sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        if args.spec:
            spec = spec_from_dict(json.loads(Path(args.spec).read_text()))
        else:
            d: dict = {"kind": args.kind, "seed": args.seed}
            if args.kind == "iid":
                d["marginal"] = args.marginal
            elif args.kind == "mdep_gaussian_ma":
                d["m"] = args.m
                d["weights"] = args.weights or [1.0] * (args.m + 1)
            elif args.kind == "minorized_markov":
                d["refresh_prob"] = args.refresh_prob
                d["copula_phi"] = args.phi
            elif args.kind == "gaussian_ar1":
                d["phi"] = args.phi
            spec = spec_from_dict(d)
        if args.seed is not None:
            spec = ProcessSpec(kind=spec.kind, seed=args.seed)
        x = generate_values(spec, args.n, args.stream)
    except (ConfigError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit("\n".join(repr(v) for v in x.tolist()) + "\n", args.out)
    return EXIT_OK


def _raw_rows_to_csv(rows: list[dict]) -> str:
    cols: list[str] = []
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(repr(row[c]) if c in row else "" for c in cols))
    return "\n".join(lines) + "\n"


def _cmd_verify(args: argparse.Namespace, allowed: tuple[str, ...]) -> int:
    try:
        raw = json.loads(Path(args.config).read_text())
        if args.seed is not None:
            raw.setdefault("process", {})["seed"] = args.seed
        if args.stream_offset is not None:
            raw["stream_offset"] = args.stream_offset
        if args.raw_dump:
            raw["collect_raw"] = True
        if raw.get("experiment") not in allowed:
            raise ConfigError(
                f"experiment {raw.get('experiment')!r} not valid here (expected one of {allowed})"
            )
        cfg = config_from_dict(raw)
    except (ConfigError, json.JSONDecodeError, OSError, KeyError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_experiment(cfg)
    if args.raw_dump:
        rows = report.tables.pop("raw", [])
        Path(args.raw_dump).write_text(_raw_rows_to_csv(rows))
        print(f"raw dump: {args.raw_dump} ({len(rows)} rows)", file=sys.stderr)
    _emit(report.to_json() + "\n", args.out)
    for v in report.verdicts:
        status = "PASS" if v.passed else "FAIL"
        print(f"{status} {v.name}: value={v.value:.6g} tolerance={v.tolerance:.6g}",
              file=sys.stderr)
    if report.runtime_seconds is not None:
        print(f"runtime: {report.runtime_seconds:.2f}s", file=sys.stderr)
    if args.out and args.figures:
        from .figures import render_report

        for p in render_report(report, Path(args.out)):
            print(f"figure: {p}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def _add_series_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="series file (newline floats / 1-column CSV), or - for stdin")
    p.add_argument("--tie-policy", choices=("error", "perturb"), default="error")
    p.add_argument("--out", default=None, help="output path (default stdout)")


def _add_verify_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", default=None, help="report path (default stdout)")
    p.add_argument("--seed", type=int, default=None, help="override process seed")
    p.add_argument("--stream-offset", type=int, default=None)
    p.add_argument("--figures", dest="figures", action="store_true", default=True)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.add_argument("--raw-dump", default=None, help="flag-gated raw CSV dump path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sublevel-ph",
        description="Sublevel-set persistence of time series: diagrams, statistics, "
        "null limits, and Monte Carlo verification of the limit theorems.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diagram", help="compute a persistence diagram")
    _add_series_args(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--figures", action="store_true", help="render a PNG next to --out")
    p.set_defaults(fn=cmd_diagram)

    p = sub.add_parser("stats", help="persistence statistics of a series")
    _add_series_args(p)
    p.add_argument("--alps-L", default=None, help="ALPS truncation (default inf)")
    p.add_argument("--entropy", action="store_true",
                   help="fail (exit 4) if entropy is undefined")
    p.add_argument("--total-p", type=float, default=1.0)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("null", help="closed-form i.i.d. limiting quantities")
    p.add_argument("--marginal", default="uniform01",
                   help="uniform01 | std_normal | exponential(RATE) | table:PATH")
    p.add_argument("--betti-ratio", nargs=2, type=float, metavar=("S", "T"))
    p.add_argument("--tail", type=float, metavar="ELL")
    p.add_argument("--density", nargs=2, type=float, metavar=("X", "Y"))
    p.add_argument("--mass", nargs=4, type=float, metavar=("S1", "S2", "T1", "T2"))
    p.add_argument("--expected-betti", nargs=3, type=float, metavar=("N", "S", "T"))
    p.add_argument("--sample", type=int, metavar="COUNT")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_null)

    p = sub.add_parser("simulate", help="generate a stationary test process")
    p.add_argument("--spec", default=None, help="process spec JSON file")
    p.add_argument("--kind", default="iid",
                   choices=("iid", "mdep_gaussian_ma", "minorized_markov", "gaussian_ar1"))
    p.add_argument("--marginal", default="uniform01")
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--weights", type=float, nargs="*", default=None)
    p.add_argument("--phi", type=float, default=0.5)
    p.add_argument("--refresh-prob", type=float, default=0.2)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_simulate)

    for name, kinds, desc in (
        ("verify-slln", ("slln_rectangles", "glivenko", "unbounded"),
         "run a law-of-large-numbers experiment"),
        ("verify-clt", ("clt",), "run the central-limit-theorem experiment"),
        ("covariance", ("covariance",), "estimate the limiting covariance two ways"),
    ):
        p = sub.add_parser(name, help=desc)
        _add_verify_args(p)
        p.set_defaults(fn=lambda a, kinds=kinds: _cmd_verify(a, kinds))

    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
