"""Sublevel-set persistence of time series.

Exact 0-dimensional persistence diagrams of finite real sequences, diagrams
as measures, persistence statistics (entropy, ALPS, total persistence),
closed-form i.i.d. limiting distributions, stationary test-process
generators, and a Monte Carlo harness verifying the law of large numbers
and the central limit theorem for these objects.
"""

from .diagram import (
    PersistenceDiagram,
    Rectangle,
    TiePolicy,
    TimeSeries,
    betti,
    compute_diagram,
    count_local_minima,
    rectangle_count,
)
from .errors import SublevelPHError
from .null_limits import (
    MarginalModel,
    expected_betti_finite_n,
    exponential,
    limiting_betti_ratio,
    null_density,
    null_lifetime_tail,
    null_rectangle_mass,
    p_i_run_probability,
    sample_null_diagram_point,
    sample_null_diagram_points,
    std_normal,
    tabulated_marginal,
    uniform01,
)
from .oracle import betti_bruteforce, c_term, geometric_weighted_sum, y_term
from .processes import (
    IID,
    GaussianAR1,
    MDepGaussianMA,
    MinorizedMarkov,
    ProcessSpec,
    generate,
    max_root_summability_diagnostic,
    max_run_probability_estimate,
)
from .stats import (
    Indicator,
    PowerP,
    StepFunction,
    XLogX,
    alps,
    integrate_step,
    lifetime_ecdf_sup_distance,
    lifetime_integral,
    persistent_entropy,
    stats_report,
)

__version__ = "0.1.0"

__all__ = [
    "TimeSeries",
    "TiePolicy",
    "PersistenceDiagram",
    "Rectangle",
    "compute_diagram",
    "count_local_minima",
    "rectangle_count",
    "betti",
    "betti_bruteforce",
    "y_term",
    "c_term",
    "geometric_weighted_sum",
    "StepFunction",
    "PowerP",
    "XLogX",
    "Indicator",
    "integrate_step",
    "lifetime_integral",
    "persistent_entropy",
    "alps",
    "lifetime_ecdf_sup_distance",
    "stats_report",
    "MarginalModel",
    "uniform01",
    "std_normal",
    "exponential",
    "tabulated_marginal",
    "limiting_betti_ratio",
    "null_rectangle_mass",
    "null_density",
    "null_lifetime_tail",
    "sample_null_diagram_point",
    "sample_null_diagram_points",
    "p_i_run_probability",
    "expected_betti_finite_n",
    "IID",
    "MDepGaussianMA",
    "MinorizedMarkov",
    "GaussianAR1",
    "ProcessSpec",
    "generate",
    "max_run_probability_estimate",
    "max_root_summability_diagnostic",
    "SublevelPHError",
    "__version__",
]
