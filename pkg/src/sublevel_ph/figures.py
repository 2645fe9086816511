"""Figure rendering for diagrams and experiment reports.

Figures are written next to the delimited report output; every function
returns the list of paths it created.  The Agg backend is forced so the
CLI works headless.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy import stats as sstats

from .diagram import PersistenceDiagram
from .experiments import ExperimentReport

__all__ = ["render_diagram", "render_report"]


def render_diagram(diagram: PersistenceDiagram, path: str | Path) -> list[Path]:
    """Scatter the diagram; the infinite point sits on a dashed top line."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5, 5))
    b, d = diagram.births, diagram.deaths
    lo = min(float(b.min()) if b.size else diagram.infinite_birth, diagram.infinite_birth)
    hi = float(d.max()) if d.size else diagram.infinite_birth + 1.0
    span = max(hi - lo, 1e-9)
    top = hi + 0.12 * span
    ax.plot([lo - 0.05 * span, top], [lo - 0.05 * span, top], color="0.8", lw=1)
    if b.size:
        ax.scatter(b, d, s=14, color="tab:blue", zorder=3, label="finite")
    ax.axhline(top, color="0.6", ls="--", lw=1)
    ax.scatter([diagram.infinite_birth], [top], s=30, marker="^", color="tab:red",
               zorder=3, label="infinite")
    ax.set_xlabel("birth")
    ax.set_ylabel("death")
    ax.set_title(f"persistence diagram (n = {diagram.n})")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def _fig_path(base: Path, suffix: str) -> Path:
    return base.with_name(f"{base.stem}_{suffix}.png")


def render_report(report: ExperimentReport, out_base: str | Path) -> list[Path]:
    """Render the figures appropriate for the report's experiment kind."""
    base = Path(out_base)
    kind = report.experiment
    if kind == "slln_rectangles":
        return _render_slln(report, base)
    if kind == "glivenko":
        return _render_glivenko(report, base)
    if kind == "unbounded":
        return _render_unbounded(report, base)
    if kind == "clt":
        return _render_clt(report, base)
    if kind == "covariance":
        return _render_covariance(report, base)
    return []


def _render_slln(report: ExperimentReport, base: Path) -> list[Path]:
    per_n = report.tables["per_n"]
    ns = [row["n"] for row in per_n]
    n_rect = len(per_n[0]["ratio_means"])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    for j in range(n_rect):
        means = [row["ratio_means"][j] for row in per_n]
        ses = [row["ratio_ses"][j] for row in per_n]
        ax1.errorbar(ns, means, yerr=[3 * s for s in ses], marker="o", capsize=3,
                     label=f"rectangle {j}")
    ax1.set_xscale("log")
    ax1.set_xlabel("n")
    ax1.set_ylabel("normalized rectangle mass")
    ax1.legend(fontsize=8)
    rates = [row["mass_rate_mean"] for row in per_n]
    ax2.errorbar(ns, rates, yerr=[3 * row["mass_rate_se"] for row in per_n],
                 marker="o", capsize=3, color="tab:green")
    ax2.axhline(1.0 / 3.0, color="0.5", ls="--", lw=1, label="1/3")
    ax2.set_xscale("log")
    ax2.set_xlabel("n")
    ax2.set_ylabel("points per sample")
    ax2.legend(fontsize=8)
    fig.suptitle("law of large numbers: rectangle masses")
    fig.tight_layout()
    out = _fig_path(base, "slln")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def _render_glivenko(report: ExperimentReport, base: Path) -> list[Path]:
    per_n = report.tables["per_n"]
    ns = [row["n"] for row in per_n]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(ns, [row["median_sup_distance"] for row in per_n], "o-", label="median")
    ax.plot(ns, [row["max_sup_distance"] for row in per_n], "s--", color="0.6", label="max")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("sup distance of lifetime tail")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = _fig_path(base, "glivenko")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def _render_unbounded(report: ExperimentReport, base: Path) -> list[Path]:
    per_n = report.tables["per_n"]
    names = sorted(k[: -len("_mean")] for k in per_n[0] if k.endswith("_mean"))
    ns = [row["n"] for row in per_n]
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in names:
        ax.plot(ns, [row[f"{name}_mean"] for row in per_n], "o-", label=name)
        mega = report.tables.get("mega_run", {}).get(name)
        if isinstance(mega, (int, float)):
            ax.axhline(mega, ls=":", lw=1, color=ax.lines[-1].get_color())
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("Monte Carlo mean")
    ax.legend(fontsize=7)
    ax.set_title("unbounded functionals (dotted: mega-run reference)")
    fig.tight_layout()
    out = _fig_path(base, "unbounded")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def _render_clt(report: ExperimentReport, base: Path) -> list[Path]:
    per_n = report.tables["per_n"]
    ns = [row["n"] for row in per_n]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    last = per_n[-1]
    edges = np.linspace(-4.0, 4.0, 41)
    counts = np.asarray(last.get("z_hist", [0] * 40), dtype=np.float64)
    total = counts.sum()
    if total > 0:
        width = edges[1] - edges[0]
        ax1.bar(edges[:-1], counts / (total * width), width=width, align="edge",
                color="tab:blue", alpha=0.6, label="studentized values")
    grid = np.linspace(-4, 4, 200)
    ax1.plot(grid, sstats.norm.pdf(grid), color="0.3", lw=1.5, label="N(0,1)")
    ax1.set_title(
        f"studentized step integral at n={last['n']} (KS p = {last['ks_p']:.3f})"
    )
    ax1.set_xlabel("z")
    ax1.legend(fontsize=8)
    ax2.plot(ns, [row["variance_over_n"] for row in per_n], "o-")
    ax2.set_xscale("log")
    ax2.set_xlabel("n")
    ax2.set_ylabel("var / n (limiting variance estimate)")
    fig.tight_layout()
    out = _fig_path(base, "clt")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def _render_covariance(report: ExperimentReport, base: Path) -> list[Path]:
    series = report.tables["series_by_K"]
    emp = report.tables["empirical"]
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot(range(len(series)), series, "o-", label="truncated lag series")
    ax.axhline(emp["value"], color="tab:orange", label="empirical (replications)")
    se = emp["se"]
    if isinstance(se, (int, float)) and math.isfinite(se):
        ax.axhspan(emp["value"] - 3 * se, emp["value"] + 3 * se, color="tab:orange",
                   alpha=0.15, lw=0)
    ax.set_xlabel("truncation K")
    ax.set_ylabel("limiting covariance estimate")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = _fig_path(base, "covariance")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]
