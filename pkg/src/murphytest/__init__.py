"""Forecast dominance testing with extremal scoring functions.

Tests whether a benchmark forecast of an expectile or quantile is
weakly better than its competitors uniformly over the family of
consistent scoring functions, using Murphy-curve differences and a
re-centred stationary bootstrap.
"""

from murphytest.errors import MurphyTestError
from murphytest.losses import (
    FunctionalLevel,
    LossSpec,
    MixtureSpec,
    consistent_loss,
    extremal_expectile_loss,
    extremal_quantile_loss,
    mixture_loss,
    murphy_curve,
)
from murphytest.panel import ForecastPanel, PanelSlice, read_panel_csv, write_report_json
from murphytest.engine import ThetaGrid, build_theta_grid, loss_diff_curve, sup_statistic
from murphytest.bootstrap import BootstrapConfig, recentered_bootstrap_test, stationary_resample_indices
from murphytest.dm import dm_test, newey_west_variance

__all__ = [
    "MurphyTestError",
    "FunctionalLevel",
    "LossSpec",
    "MixtureSpec",
    "consistent_loss",
    "extremal_expectile_loss",
    "extremal_quantile_loss",
    "mixture_loss",
    "murphy_curve",
    "ForecastPanel",
    "PanelSlice",
    "read_panel_csv",
    "write_report_json",
    "ThetaGrid",
    "build_theta_grid",
    "loss_diff_curve",
    "sup_statistic",
    "BootstrapConfig",
    "recentered_bootstrap_test",
    "stationary_resample_indices",
    "dm_test",
    "newey_west_variance",
]

__version__ = "0.1.0"
