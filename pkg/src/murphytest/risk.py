"""Value-at-Risk models and supporting estimators.

CAViaR recursions fitted by tick-loss minimization, rolling VaR
backtests, OLS, GARCH quasi-maximum likelihood and sample
quantiles/expectiles.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.stats import norm

from murphytest.bootstrap import empirical_quantile
from murphytest.errors import (
    EmptyInputError,
    InvalidArgumentError,
    PathOverflowError,
    PreconditionError,
    SingularDesignError,
)
from murphytest.optim import NelderMeadConfig, nelder_mead

SYMMETRIC = "symmetric"
ASYMMETRIC = "asymmetric"


# ---------------------------------------------------------------- sample statistics


def sample_quantile(xs, alpha: float) -> float:
    """Inf-type sample quantile: smallest order statistic with ECDF >= alpha."""
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise EmptyInputError("empty sample")
    return empirical_quantile(xs, alpha)


def sample_expectile(xs, alpha: float) -> float:
    """Root ``t`` of ``alpha*mean((x-t)+) = (1-alpha)*mean((t-x)+)`` by bisection."""
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise EmptyInputError("empty sample")
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError("alpha must lie in (0, 1)")
    lo, hi = float(xs.min()), float(xs.max())
    g = lambda t: alpha * np.mean(np.maximum(xs - t, 0.0)) - (1 - alpha) * np.mean(np.maximum(t - xs, 0.0))
    for _ in range(400):
        if hi - lo <= 1e-12:
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------- OLS


def ols_fit(X, y) -> np.ndarray:
    """Least-squares coefficients with an intercept prepended (intercept first)."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    D = np.column_stack([np.ones(y.size), X])
    if D.shape[0] <= D.shape[1]:
        raise PreconditionError("need more observations than regressors")
    if np.linalg.matrix_rank(D) < D.shape[1]:
        raise SingularDesignError("design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(D, y, rcond=None)
    return coef


# ---------------------------------------------------------------- CAViaR


@dataclass(frozen=True)
class CaviarParams:
    """CAViaR coefficients: (a, b, c) symmetric or (a, b, c1, c2) asymmetric."""

    kind: str
    coef: tuple

    def __post_init__(self):
        want = {SYMMETRIC: 3, ASYMMETRIC: 4}.get(self.kind)
        if want is None:
            raise InvalidArgumentError(f"unknown CAViaR kind {self.kind!r}")
        if len(self.coef) != want:
            raise InvalidArgumentError(f"{self.kind} CAViaR needs {want} coefficients")
        object.__setattr__(self, "coef", tuple(float(c) for c in self.coef))
        if not all(math.isfinite(c) for c in self.coef):
            raise InvalidArgumentError("CAViaR coefficients must be finite")

    @classmethod
    def symmetric(cls, a, b, c):
        return cls(SYMMETRIC, (a, b, c))

    @classmethod
    def asymmetric(cls, a, b, c1, c2):
        return cls(ASYMMETRIC, (a, b, c1, c2))


@numba.njit(cache=True, nogil=True)
def _caviar_recursion(theta, r, v0, asym):
    n = r.size
    out = np.empty(n)
    a, b, c1 = theta[0], theta[1], theta[2]
    c2 = theta[3] if asym else c1
    v = v0
    for t in range(n):
        x = r[t]
        v = a + b * v + (c1 * x if x > 0 else -c2 * x)
        out[t] = v
    return out


@numba.njit(cache=True, nogil=True)
def _caviar_objective(theta, args):
    r, alpha, v0, asym = args
    n = r.size
    a, b, c1 = theta[0], theta[1], theta[2]
    c2 = theta[3] if asym else c1
    v = v0
    s = 0.0
    for t in range(n):
        x = r[t]
        s += ((1.0 if x < v else 0.0) - alpha) * (v - x)
        v = a + b * v + (c1 * x if x > 0 else -c2 * x)
        if not np.isfinite(v):
            return np.inf
    return s / n


@numba.njit(cache=True, nogil=True)
def _caviar_objective_batch(thetas, r, alpha, v0, asym):
    out = np.empty(thetas.shape[0])
    for i in range(thetas.shape[0]):
        out[i] = _caviar_objective(thetas[i], (r, alpha, v0, asym))
    return out


def caviar_path(params: CaviarParams, returns, var_init: float) -> np.ndarray:
    """One-step VaR forecasts; ``out[t]`` is made at ``t`` for period ``t+1``."""
    r = np.asarray(returns, dtype=float)
    if r.size == 0:
        raise EmptyInputError("empty return series")
    out = _caviar_recursion(np.asarray(params.coef), r, float(var_init), params.kind == ASYMMETRIC)
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        raise PathOverflowError(f"VaR recursion became non-finite at step {int(bad[0]) + 1}")
    return out


def tick_loss_objective(params: CaviarParams, returns, alpha: float, var_init: float) -> float:
    """Average tick loss of the path started at ``var_init``.

    The path is aligned with the returns: ``var_init`` is the VaR of the
    first return and each recursion step gives the VaR of the next one.
    """
    r = np.asarray(returns, dtype=float)
    if r.size == 0:
        raise EmptyInputError("empty return series")
    val = _caviar_objective(np.asarray(params.coef), (r, float(alpha), float(var_init), params.kind == ASYMMETRIC))
    if not np.isfinite(val):
        raise PathOverflowError("VaR recursion became non-finite")
    return float(val)


@dataclass(frozen=True)
class CaviarFitConfig:
    candidates: int = 1000
    refine: int = 5
    nelder_mead: NelderMeadConfig = field(default_factory=lambda: NelderMeadConfig(max_iterations=1000, restarts=1))


@dataclass
class CaviarFit:
    params: CaviarParams
    objective: float
    var_init: float


def fit_caviar(returns, alpha: float, kind: str = SYMMETRIC, config: CaviarFitConfig | None = None,
               seed: int | tuple = 0) -> CaviarFit:
    """Multi-start tick-loss fit of a CAViaR recursion.

    Random candidates are drawn uniformly in [-1, 1] per coefficient, with
    the intercept scaled by the return standard deviation; the constant
    path at the sample quantile is always included.  The best candidates
    are polished by Nelder-Mead and the best polished fit is returned.
    """
    cfg = config or CaviarFitConfig()
    r = np.asarray(returns, dtype=float)
    if r.size < 100:
        raise PreconditionError("CAViaR estimation needs at least 100 returns")
    if kind not in (SYMMETRIC, ASYMMETRIC):
        raise InvalidArgumentError(f"unknown CAViaR kind {kind!r}")
    asym = kind == ASYMMETRIC
    dim = 4 if asym else 3
    v0 = sample_quantile(r, alpha)
    scale = float(r.std()) or 1.0
    rng = np.random.default_rng(seed)
    cands = rng.uniform(-1.0, 1.0, size=(cfg.candidates, dim))
    cands[:, 0] *= scale
    cands[0] = 0.0
    cands[0, 0] = v0
    vals = _caviar_objective_batch(cands, r, float(alpha), v0, asym)
    order = np.argsort(vals, kind="stable")[: cfg.refine]
    best = None
    args = (r, float(alpha), v0, asym)
    for i in order:
        x, f, _ = nelder_mead(_caviar_objective, cands[i], cfg.nelder_mead, args=args)
        if best is None or f < best[1]:
            best = (x, f)
    return CaviarFit(CaviarParams(kind, tuple(best[0])), float(best[1]), v0)


def estimate_caviar(returns, alpha: float, kind: str = SYMMETRIC, config: CaviarFitConfig | None = None,
                    seed: int | tuple = 0) -> CaviarParams:
    return fit_caviar(returns, alpha, kind, config, seed).params


# ---------------------------------------------------------------- backtests

METHODS = ("sample_quantile", "normal", "caviar_sy", "caviar_asy")


@dataclass
class BacktestReport:
    method: str
    alpha: float
    window: int
    var_series: np.ndarray
    hit_proportion: float
    avg_tick_loss: float

    @property
    def summary(self) -> dict:
        v = self.var_series
        return {"mean": float(v.mean()), "std": float(v.std(ddof=1)) if v.size > 1 else 0.0,
                "min": float(v.min()), "max": float(v.max())}

    def table_row(self) -> dict:
        """Mean/Std/Min/Max of the VaR series and tick loss in percent, hit proportion as a fraction."""
        s = self.summary
        return {
            "mean_pct": 100.0 * s["mean"],
            "std_pct": 100.0 * s["std"],
            "min_pct": 100.0 * s["min"],
            "max_pct": 100.0 * s["max"],
            "hit_prop": self.hit_proportion,
            "tick_loss_pct": 100.0 * self.avg_tick_loss,
        }

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "alpha": self.alpha,
            "window": self.window,
            "n_forecasts": int(self.var_series.size),
            "hit_proportion": self.hit_proportion,
            "avg_tick_loss": self.avg_tick_loss,
            "summary": self.summary,
            "table": self.table_row(),
            "var_series": self.var_series,
        }


def _one_step_var(window, method, alpha, seed, t, fit_cfg):
    if method == "sample_quantile":
        return sample_quantile(window, alpha)
    if method == "normal":
        return float(window.mean() + window.std(ddof=1) * norm.ppf(alpha))
    kind = SYMMETRIC if method == "caviar_sy" else ASYMMETRIC
    fit = fit_caviar(window, alpha, kind, fit_cfg, seed=(seed, t))
    return float(caviar_path(fit.params, window, fit.var_init)[-1])


def rolling_var_backtest(returns, method: str, alpha: float, window: int = 500, seed: int = 0,
                         threads: int = 1, fit_config: CaviarFitConfig | None = None) -> BacktestReport:
    """Rolling-window one-step VaR forecasts and their backtest summary.

    For every ``t >= window`` the model is fitted on the preceding
    ``window`` returns and forecasts ``returns[t]``.  A hit is
    ``return <= VaR``.
    """
    r = np.asarray(returns, dtype=float)
    if method not in METHODS:
        raise InvalidArgumentError(f"unknown VaR method {method!r}")
    if window < 10:
        raise InvalidArgumentError("window must be at least 10")
    if r.size <= window:
        raise PreconditionError("need more returns than the window length")
    if not np.all(np.isfinite(r)):
        raise InvalidArgumentError("non-finite return")
    ts = range(window, r.size)
    job = lambda t: _one_step_var(r[t - window:t], method, alpha, seed, t, fit_config)
    if threads > 1 and method.startswith("caviar"):
        with ThreadPoolExecutor(max_workers=threads) as ex:
            var = np.fromiter(ex.map(job, ts), float, count=len(ts))
    else:
        var = np.fromiter(map(job, ts), float, count=len(ts))
    out = r[window:]
    hit = float(np.mean(out <= var))
    tick = float(np.mean(((out < var).astype(float) - alpha) * (var - out)))
    return BacktestReport(method, float(alpha), int(window), var, hit, tick)


# ---------------------------------------------------------------- GARCH


@numba.njit(cache=True, nogil=True)
def _garch_filter(omega, b, c, v2, s2init):
    p, q, n = b.size, c.size, v2.size
    sig = np.empty(n + 1)
    for t in range(n + 1):
        s = omega
        for i in range(p):
            s += b[i] * (sig[t - 1 - i] if t - 1 - i >= 0 else s2init)
        for j in range(q):
            s += c[j] * (v2[t - 1 - j] if t - 1 - j >= 0 else s2init)
        sig[t] = s
    return sig


@numba.njit(cache=True, nogil=True)
def _garch_unpack(u, p):
    omega = np.exp(u[0])
    e = np.exp(u[1:])
    coef = e / (1.0 + e.sum())
    return omega, coef[:p], coef[p:]


@numba.njit(cache=True, nogil=True)
def _garch_nll(u, args):
    v2, p, s2init = args
    omega, b, c = _garch_unpack(u, p)
    sig = _garch_filter(omega, b, c, v2, s2init)
    s = 0.0
    for t in range(v2.size):
        if not sig[t] > 0:
            return np.inf
        s += np.log(sig[t]) + v2[t] / sig[t]
    return s / v2.size


@dataclass
class GarchFit:
    omega: float
    arch: np.ndarray  # coefficients on lagged squared returns
    garch: np.ndarray  # coefficients on lagged variances
    next_variance: float
    raw: np.ndarray = field(repr=False)  # unconstrained parameters, for warm starts


def _garch_pack(omega, b, c):
    coef = np.concatenate([b, c])
    rest = 1.0 - coef.sum()
    return np.concatenate([[math.log(omega)], np.log(coef / rest)])


def garch_fit(returns, p: int = 1, q: int = 1, start=None, config: NelderMeadConfig | None = None) -> GarchFit:
    """Gaussian QML fit of ``s2 = w + sum b_i s2_{t-i} + sum c_j r2_{t-j}``.

    ``p`` counts lagged variances and ``q`` lagged squared returns, so
    ``(0, 1)`` is ARCH(1).  Parameters are searched in a log/logistic
    parametrization that keeps ``w > 0``, coefficients nonnegative and
    their sum below one.  ``start`` is a previous ``raw`` vector.
    """
    r = np.asarray(returns, dtype=float)
    if p < 0 or q < 1:
        raise InvalidArgumentError("need p >= 0 and q >= 1")
    if r.size < 10 * (1 + p + q):
        raise PreconditionError("too few observations for a GARCH fit")
    v2 = r * r
    s2 = float(v2.mean())
    if s2 <= 0:
        raise InvalidArgumentError("returns have zero variance")
    if start is None:
        b = np.full(p, 0.6 / p) if p else np.zeros(0)
        c = np.full(q, (0.2 if p else 0.4) / q)
        start = _garch_pack(s2 * (1.0 - b.sum() - c.sum()), b, c)
    cfg = config or NelderMeadConfig(max_iterations=1000, restarts=1, xatol=1e-7, fatol=1e-10)
    x, _, _ = nelder_mead(_garch_nll, start, cfg, args=(v2, p, s2))
    omega, b, c = _garch_unpack(x, p)
    nxt = _garch_filter(omega, b, c, v2, s2)[-1]
    return GarchFit(float(omega), c.copy(), b.copy(), float(nxt), x)


def garch11_fit(returns):
    """GARCH(1,1) QML fit; returns ``(omega, beta, gamma_arch, next_variance)``."""
    r = np.asarray(returns, dtype=float)
    if r.size < 200:
        raise PreconditionError("GARCH(1,1) fit needs at least 200 observations")
    fit = garch_fit(r, 1, 1)
    return fit.omega, float(fit.garch[0]), float(fit.arch[0]), fit.next_variance
