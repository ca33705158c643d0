"""Large-scale testing of cross-covariance functions for functional data
panels: covariance networks, functional graphical models, FDR control, and
a simulation harness."""

from .covtest import (
    CurvePanel,
    PairTestRecord,
    all_pair_records,
    center_panel,
    cross_cov_surface,
    fill_pvalues,
)
from .errors import FuncnetError
from .fgm import FpcaBasis, default_tau_grid, fgm_battery, fpca, select_tau
from .harness import (
    ExperimentConfig,
    ResultRow,
    empirical_fdr,
    empirical_power,
    run_experiment,
)
from .mtproc import (
    DiscoverySet,
    TestBattery,
    battery_from_records,
    bh_procedure,
    bonferroni,
    select_threshold,
)
from .nulldist import fit_mixture_null, pvalue, pvalue_and_score
from .presmooth import DiscretePanel, SmootherConfig, smooth_panel
from .quadrature import FunctionGrid, make_uniform_grid, make_trapezoid_grid
from .threshbase import apply_threshold, cv_threshold

__version__ = "0.1.0"

__all__ = [
    "CurvePanel", "PairTestRecord", "all_pair_records", "center_panel",
    "cross_cov_surface", "fill_pvalues", "FuncnetError", "FpcaBasis",
    "default_tau_grid", "fgm_battery", "fpca", "select_tau",
    "ExperimentConfig", "ResultRow", "empirical_fdr", "empirical_power",
    "run_experiment", "DiscoverySet", "TestBattery", "battery_from_records",
    "bh_procedure", "bonferroni", "select_threshold", "fit_mixture_null",
    "pvalue", "pvalue_and_score", "DiscretePanel", "SmootherConfig",
    "smooth_panel", "FunctionGrid", "make_uniform_grid",
    "make_trapezoid_grid", "apply_threshold", "cv_threshold", "__version__",
]
