import json
import math
from pathlib import Path

import numpy as np
import pytest

from sublevel_ph import (
    IID,
    GaussianAR1,
    MDepGaussianMA,
    ProcessSpec,
    Rectangle,
    StepFunction,
    uniform01,
)
from sublevel_ph.errors import ConfigError, CornerConditionError
from sublevel_ph.experiments import (
    CltConfig,
    CovarianceConfig,
    GlivenkoConfig,
    SllnConfig,
    UnboundedConfig,
    _unbounded_targets,
    config_from_dict,
    run_clt,
    run_experiment,
    run_glivenko,
    run_slln_rectangles,
    run_unbounded_functional_slln,
    estimate_covariance_series,
)

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "sublevel_ph" / "configs"


def test_config_validation():
    spec = ProcessSpec(IID(uniform01()), seed=0)
    with pytest.raises(ConfigError):
        SllnConfig(spec, (100, 200), 1, (Rectangle(0, 0.5, 0.8, math.inf),))
    with pytest.raises(ConfigError):
        SllnConfig(spec, (200, 100), 10, (Rectangle(0, 0.5, 0.8, math.inf),))
    with pytest.raises(ConfigError):
        SllnConfig(spec, (100, 200), 10, ())
    with pytest.raises(ConfigError):
        UnboundedConfig(spec, (100, 200), 10, alps_L=0.0)


def test_slln_small_iid():
    cfg = SllnConfig(
        process=ProcessSpec(IID(uniform01()), seed=5),
        n_grid=(100, 200),
        reps=60,
        rectangles=(
            Rectangle(-math.inf, 0.5, 0.8, math.inf),
            Rectangle(0.3, 0.3, 0.5, 0.9),  # degenerate: ratio identically 0
        ),
        rectangle_tolerance=0.05,
    )
    rep = run_slln_rectangles(cfg)
    per_n = rep.tables["per_n"]
    # degenerate rectangle never holds mass
    assert all(row["ratio_means"][1] == 0.0 for row in per_n)
    # the 3/7 target is approached loosely even at n = 200
    assert abs(per_n[-1]["ratio_means"][0] - 3.0 / 7.0) < 0.05
    # cross-oracle comparisons ran (n <= 200) and found no mismatch
    names = [v.name for v in rep.verdicts]
    assert "cross_oracle_subsample" in names
    assert rep.verdicts[names.index("cross_oracle_subsample")].passed


def test_slln_report_determinism():
    cfg = SllnConfig(
        process=ProcessSpec(IID(uniform01()), seed=9),
        n_grid=(50, 120),
        reps=20,
        rectangles=(Rectangle(-math.inf, 0.5, 0.8, math.inf),),
    )
    a = run_slln_rectangles(cfg).to_json()
    b = run_slln_rectangles(cfg).to_json()
    assert a == b
    assert "runtime" not in a


def test_glivenko_small():
    cfg = GlivenkoConfig(
        process=ProcessSpec(IID(uniform01()), seed=3),
        n_grid=(500, 4000),
        reps=20,
        sup_tolerance=0.06,
    )
    rep = run_glivenko(cfg)
    assert rep.passed, rep.to_json()
    med = [row["median_sup_distance"] for row in rep.tables["per_n"]]
    assert med[-1] < med[0]


def test_glivenko_non_iid_uses_mega_reference():
    cfg = GlivenkoConfig(
        process=ProcessSpec(GaussianAR1(0.5), seed=4),
        n_grid=(400, 1600),
        reps=15,
        sup_tolerance=0.08,
        mega_factor=20,
    )
    rep = run_glivenko(cfg)
    assert "mega-run" in rep.tables["reference"]
    assert rep.tables["per_n"][-1]["median_sup_distance"] < 0.1


def test_unbounded_targets_alps_identity():
    # truncation below the smallest lifetime: offset is exactly zero
    cfg = UnboundedConfig(
        process=ProcessSpec(IID(uniform01()), seed=0),
        n_grid=(10, 20),
        reps=2,
        alps_L=0.05,
    )
    lifetimes = np.asarray([0.3, 0.5, 0.9])
    out = _unbounded_targets(lifetimes, cfg)
    assert out["alps_offset"] == pytest.approx(0.0, abs=1e-15)
    # entropy offset for equal lifetimes: entropy = log k, offset 0
    out2 = _unbounded_targets(np.asarray([0.4, 0.4, 0.4, 0.4]), cfg)
    assert out2["entropy_offset"] == pytest.approx(0.0, abs=1e-12)
    # degree-1 normalized total persistence is the mean lifetime
    assert out["norm_total_persistence_p1"] == pytest.approx(np.mean(lifetimes))


def test_unbounded_small_run():
    cfg = UnboundedConfig(
        process=ProcessSpec(IID(uniform01()), seed=12),
        n_grid=(2000, 8000),
        reps=15,
        alps_L=0.2,
        cauchy_tolerance=0.03,
        mega_tolerance=0.03,
        mega_factor=5,
    )
    rep = run_unbounded_functional_slln(cfg)
    assert rep.passed, rep.to_json()
    assert "mega_run" in rep.tables


def test_clt_small_iid_with_exact_centering():
    cfg = CltConfig(
        process=ProcessSpec(IID(uniform01()), seed=21),
        n_grid=(400, 1200),
        reps=400,
        step_function=StepFunction.of((1.0, Rectangle(-math.inf, 0.5, 0.8, math.inf))),
        variance_cauchy_tolerance=0.25,
    )
    rep = run_clt(cfg)
    assert rep.passed, rep.to_json()
    last = rep.tables["per_n"][-1]
    n, reps = last["n"], cfg.reps
    se_mean = math.sqrt(last["variance_over_n"] * n / reps)
    assert abs(last["mean"] - last["exact_mean"]) < 4 * se_mean


def test_clt_zero_step_function_degenerate():
    cfg = CltConfig(
        process=ProcessSpec(IID(uniform01()), seed=2),
        n_grid=(50, 100),
        reps=30,
        step_function=StepFunction(),
    )
    rep = run_clt(cfg)
    assert rep.passed
    assert all(row["variance_over_n"] == 0.0 for row in rep.tables["per_n"])


def test_clt_corner_condition_enforced():
    base = dict(n_grid=(50, 100), reps=10)
    with pytest.raises(CornerConditionError):
        run_clt(
            CltConfig(
                process=ProcessSpec(IID(uniform01()), seed=0),
                step_function=StepFunction.of((1.0, Rectangle(-math.inf, 0.5, 1.0, math.inf))),
                **base,
            )
        )
    with pytest.raises(CornerConditionError):
        run_clt(
            CltConfig(
                process=ProcessSpec(IID(uniform01()), seed=0),
                step_function=StepFunction.of((1.0, Rectangle(-1.0, 0.5, 0.8, math.inf))),
                **base,
            )
        )


def test_covariance_small_mdep():
    cfg = CovarianceConfig(
        process=ProcessSpec(MDepGaussianMA(2, (1.0, 0.7, 0.4)), seed=8),
        n=2000,
        reps=300,
        pair1=(0.0, 0.8416212335729143),
        pair2=(0.0, 0.8416212335729143),
        K=8,
        path_length=1 << 18,
    )
    rep = estimate_covariance_series(cfg)
    assert rep.passed, rep.to_json()
    assert len(rep.tables["series_by_K"]) == cfg.K + 1
    # variance route applied to identical pairs: both estimates positive
    assert rep.tables["empirical"]["value"] > 0
    assert rep.tables["series_by_K"][-1] > 0


def test_covariance_degenerate_pair_is_zero():
    rep = estimate_covariance_series(
        CovarianceConfig(
            process=ProcessSpec(IID(uniform01()), seed=0),
            n=100,
            reps=10,
            pair1=(-0.5, 0.5),  # F(s) = 0 under uniform01: beta identically 0
            pair2=(0.2, 0.5),
            path_length=1 << 14,
        )
    )
    assert rep.passed
    assert rep.tables["empirical"]["value"] == 0.0
    assert all(v == 0.0 for v in rep.tables["series_by_K"])


def test_config_roundtrip_through_dict():
    for name in (
        "slln_uniform.json",
        "clt_mdep8.json",
        "glivenko_uniform.json",
        "entropy_alps_uniform.json",
        "covariance_mdep2.json",
    ):
        raw = json.loads((CONFIG_DIR / name).read_text())
        cfg = config_from_dict(raw)
        assert cfg is not None
    with pytest.raises(ConfigError):
        config_from_dict({"experiment": "nope", "process": {"kind": "iid", "marginal": "uniform01"}})
    bad = json.loads((CONFIG_DIR / "slln_uniform.json").read_text())
    bad["reps"] = 1
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_run_experiment_dispatch():
    cfg = GlivenkoConfig(
        process=ProcessSpec(IID(uniform01()), seed=3),
        n_grid=(200, 400),
        reps=5,
        sup_tolerance=0.5,
    )
    rep = run_experiment(cfg)
    assert rep.experiment == "glivenko"
    with pytest.raises(ConfigError):
        run_experiment(object())


def test_collect_raw_rows():
    cfg = CltConfig(
        process=ProcessSpec(IID(uniform01()), seed=6),
        n_grid=(50, 100),
        reps=11,
        step_function=StepFunction.of((1.0, Rectangle(-math.inf, 0.5, 0.8, math.inf))),
        variance_cauchy_tolerance=10.0,
        collect_raw=True,
    )
    rep = run_clt(cfg)
    raw = rep.tables["raw"]
    assert len(raw) == 2 * 11
    assert {"n", "rep", "step_integral"} <= set(raw[0])


def test_determinism_across_worker_counts(monkeypatch):
    cfg = SllnConfig(
        process=ProcessSpec(IID(uniform01()), seed=14),
        n_grid=(80, 160),
        reps=16,
        rectangles=(Rectangle(-math.inf, 0.5, 0.8, math.inf),),
    )
    monkeypatch.setenv("SUBLEVEL_PH_THREADS", "1")
    serial = run_slln_rectangles(cfg).to_json()
    monkeypatch.setenv("SUBLEVEL_PH_THREADS", "4")
    threaded = run_slln_rectangles(cfg).to_json()
    assert serial == threaded
