"""Diebold-Mariano comparison with Newey-West standard errors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from murphytest.errors import (
    DegenerateVarianceError,
    EmptyInputError,
    InvalidArgumentError,
    NumericalDegeneracyError,
    PreconditionError,
)
from murphytest.losses import FunctionalLevel, LossSpec, consistent_loss
from murphytest.panel import PanelSlice

MIN_OBS = 8


def newey_west_lag(n: int) -> int:
    return int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def newey_west_variance(x, lag: int) -> float:
    """Bartlett-kernel long-run variance with 1/T autocovariances."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        raise EmptyInputError("empty series")
    lag = int(lag)
    if lag < 0:
        raise InvalidArgumentError("lag must be nonnegative")
    if n < lag + 1:
        raise PreconditionError(f"series of length {n} is too short for lag {lag}")
    e = x - x.mean()
    v = e @ e / n
    for j in range(1, lag + 1):
        v += 2.0 * (1.0 - j / (lag + 1.0)) * (e[j:] @ e[:-j]) / n
    if v < 0:
        raise NumericalDegeneracyError(f"negative long-run variance {v!r}")
    return float(v)


def dm_statistic(d, lag: int | None = None):
    """DM statistic of a loss-difference series and its one-sided p-value.

    Large positive values favour the competitor (the second forecast).
    """
    d = np.asarray(d, dtype=float)
    n = d.size
    if n < MIN_OBS:
        raise PreconditionError(f"DM test needs at least {MIN_OBS} observations, got {n}")
    lag = newey_west_lag(n) if lag is None else int(lag)
    var = newey_west_variance(d, lag)
    if var == 0.0:
        raise DegenerateVarianceError("loss differences have zero long-run variance")
    stat = float(d.mean() / math.sqrt(var / n))
    return stat, float(norm.sf(stat)), lag


@dataclass
class DmReport:
    statistic: float
    p_value: float
    nw_lag: int
    mean_diff: float
    drmse_x100: float | None
    loss: str
    pair: list

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "nw_lag": self.nw_lag,
            "mean_diff": self.mean_diff,
            "drmse_x100": self.drmse_x100,
            "loss": self.loss,
            "pair": list(self.pair),
        }


def dm_test(sl: PanelSlice, loss: str = "squared", alpha: float = 0.5, lag: int | None = None,
            pair=(0, 1)) -> DmReport:
    """Compare two forecasts with the DM test under squared or tick loss.

    ``loss`` is "squared" (squared-error expectile score) or "tick"
    (lin-lin quantile score).  The p-value is one-sided against the
    alternative that the competitor outperforms the benchmark.
    """
    if loss == "squared":
        spec, level = LossSpec.squared_error(), FunctionalLevel("expectile", alpha)
    elif loss == "tick":
        spec, level = LossSpec.linlin(), FunctionalLevel("quantile", alpha)
    else:
        raise InvalidArgumentError(f"unknown DM loss {loss!r}")
    k, l = pair
    X, y = sl.forecasts, sl.realized
    d = consistent_loss(spec, level, X[:, k], y) - consistent_loss(spec, level, X[:, l], y)
    stat, p, lag = dm_statistic(d, lag)
    drmse = None
    if loss == "squared":
        rmse = lambda f: math.sqrt(float(np.mean((f - y) ** 2)))
        drmse = 100.0 * (rmse(X[:, k]) - rmse(X[:, l]))
    names = sl.names
    return DmReport(stat, p, lag, float(d.mean()), drmse, loss, [names[k], names[l]])
