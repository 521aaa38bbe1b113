"""Monte Carlo designs: data generators, analytic oracles and rejection studies.

Designs
-------
mse  Linear DGP with two single-regressor forecasts (scenarios 1-3).
e1   Mean-expectile forecasts with scaled normal noise.
q1   Quantile analogue of e1.
e2   VAR(1) data with rolling-OLS mean forecasts.
e3   GARCH volatility forecasts of squared returns.
q2   Linear DGP with rolling-OLS quantile forecasts.

Random streams: a scenario seed ``s`` (int or tuple of ints) feeds
``SeedSequence(s, spawn_key=(i,))`` for series ``i``; study replication
``r`` under master seed ``m`` uses scenario seed ``(m, r)``.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.stats import norm

from murphytest.bootstrap import BootstrapConfig, recentered_bootstrap_test
from murphytest.dm import dm_test
from murphytest.errors import EmptyInputError, InvalidArgumentError
from murphytest.losses import FunctionalLevel, LossSpec
from murphytest.panel import ForecastPanel, PanelSlice
from murphytest.risk import garch_fit, ols_fit, sample_quantile

WINDOW = 100
BURN_IN = 200

# linear DGP of the mse design
GAMMA, BETA1, BETA2 = 0.4, 0.5, 0.2
MSE_SCENARIOS = {
    "1": (2 * GAMMA, 2 * GAMMA, 2 * BETA1, 2 * BETA2),  # c1, c2, b1, b2
    "2": (2 * GAMMA, GAMMA, 2 * BETA1, BETA2),
    "3": (GAMMA, 2 * GAMMA, BETA1, 2 * BETA2),
}

# competitor settings; aliases map table row numbers onto names
E1_SETTINGS = {  # name -> (uses mu, noise variance)
    "true": (True, 0.0),
    "z2": (True, 0.04),
    "lfc": (True, 0.25),
    "z4": (True, 1.0),
    "unc_z3": (False, 0.25),
    "unc_z4": (False, 1.0),
}
E2_SETTINGS = {  # name -> (beta2, sigma23, extra regressor)
    "lfc": (0.45, 0.0, None),
    "low": (0.1, 0.0, "w1"),
    "med": (0.45, 0.0, "w1"),
    "high": (0.75, 0.0, "w1"),
    "cr_low": (0.45, 0.3, "w2"),
    "cr_high": (0.45, 0.8, "w2"),
}
E3_SETTINGS = {"lfc": None, "arch1": (0, 1), "garch11": (1, 1), "garch22": (2, 2)}
Q2_SETTINGS = ("lfc", "no_noise", "correct", "partial", "oracle")

DESIGNS = {
    "mse": ("expectile", tuple(MSE_SCENARIOS)),
    "e1": ("expectile", tuple(E1_SETTINGS)),
    "q1": ("quantile", tuple(E1_SETTINGS)),
    "e2": ("expectile", tuple(E2_SETTINGS)),
    "e3": ("expectile", tuple(E3_SETTINGS)),
    "q2": ("quantile", Q2_SETTINGS),
}


def _resolve_setting(design: str, setting) -> str:
    names = DESIGNS[design][1]
    s = str(setting).strip().lower()
    if s in names:
        return s
    if design != "mse" and s.isdigit():
        # numbered rows: e1/q1 count from the true forecast, the others from the l.f.c.
        i = int(s)
        order = names if design not in ("e1", "q1") else ("true", "z2", "lfc", "z4", "unc_z3", "unc_z4")
        if 1 <= i <= len(order):
            return order[i - 1]
    raise InvalidArgumentError(f"unknown setting {setting!r} for design {design!r}; choose from {', '.join(names)}")


@dataclass(frozen=True)
class ScenarioSpec:
    design: str
    setting: str
    T_P: int
    alpha: float = 0.5
    seed: int | tuple = 0

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise InvalidArgumentError(f"unknown design {self.design!r}")
        object.__setattr__(self, "setting", _resolve_setting(self.design, self.setting))
        if int(self.T_P) < 1:
            raise InvalidArgumentError("T_P must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidArgumentError("alpha must lie in (0, 1)")

    @property
    def level(self) -> FunctionalLevel:
        return FunctionalLevel(DESIGNS[self.design][0], self.alpha)


def _stream(seed, i: int) -> np.random.Generator:
    entropy = list(seed) if isinstance(seed, tuple) else seed
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(i,)))


# ---------------------------------------------------------------- normal helpers


def _normal_partial(t):
    """E[(Z - t)+] for standard normal Z."""
    return norm.pdf(t) - t * norm.sf(t)


def normal_expectile(alpha: float) -> float:
    """Alpha-expectile of the standard normal distribution."""
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError("alpha must lie in (0, 1)")
    # alpha E(Z-t)+ = (1-alpha) E(t-Z)+ and E(t-Z)+ = E(Z-t)+ + t
    h = lambda t: alpha * _normal_partial(t) - (1 - alpha) * (_normal_partial(t) + t)
    lo, hi = -40.0, 40.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if h(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def normal_expectile_scale(alpha: float) -> float:
    """sqrt(E[(1{Z<e}-a)^2 (Z-e)^2]) / E|1{Z<e}-a| for the normal a-expectile e."""
    e = normal_expectile(alpha)
    sq = lambda z: (z - e) ** 2 * norm.pdf(z)
    below, _ = integrate.quad(sq, -np.inf, e)
    above, _ = integrate.quad(sq, e, np.inf)
    num = (1 - alpha) ** 2 * below + alpha**2 * above
    den = (1 - alpha) * norm.cdf(e) + alpha * norm.sf(e)
    return math.sqrt(num) / den


def normal_quantile_scale(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError("alpha must lie in (0, 1)")
    return math.sqrt(alpha * (1 - alpha)) / norm.pdf(norm.ppf(alpha))


# ---------------------------------------------------------------- generators


def _gen_mse(spec, n):
    c1, c2, b1, b2 = MSE_SCENARIOS[spec.setting]
    w1 = _stream(spec.seed, 0).standard_normal(n)
    w2 = _stream(spec.seed, 1).standard_normal(n)
    eps = _stream(spec.seed, 2).standard_normal(n)
    y = GAMMA + BETA1 * w1 + BETA2 * w2 + eps
    return y, c1 + b1 * w1, c2 + b2 * w2


def _gen_e1q1(spec, n):
    if spec.design == "e1":
        centre, scale = normal_expectile(spec.alpha), normal_expectile_scale(spec.alpha)
    else:
        centre, scale = norm.ppf(spec.alpha), normal_quantile_scale(spec.alpha)
    mu = _stream(spec.seed, 0).standard_normal(n)
    y = mu + _stream(spec.seed, 1).standard_normal(n)
    x1 = mu + centre + scale * 0.5 * _stream(spec.seed, 2).standard_normal(n)
    uses_mu, var = E1_SETTINGS[spec.setting]
    x2 = centre + scale * math.sqrt(var) * _stream(spec.seed, 3).standard_normal(n)
    if uses_mu:
        x2 = x2 + mu
    return y, x1, x2


def _rolling_ols_forecasts(target, regressors, T_P):
    """Forecasts of ``target[t+1]`` from regressions of ``target[s+1]`` on ``regressors[s]``.

    Each forecast uses the preceding WINDOW pairs.  Also returns the
    in-window residuals for each forecast.
    """
    X = np.column_stack(regressors)
    fc = np.empty(T_P)
    resid = []
    for i in range(T_P):
        t = WINDOW + i
        s = slice(t - WINDOW, t)
        coef = ols_fit(X[s], target[t - WINDOW + 1:t + 1])
        fc[i] = coef[0] + X[t] @ coef[1:]
        resid.append(target[t - WINDOW + 1:t + 1] - (coef[0] + X[s] @ coef[1:]))
    return fc, resid


def _gen_e2(spec, n):
    beta2, s23, extra = E2_SETTINGS[spec.setting]
    N = BURN_IN + WINDOW + n + 1
    cov = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, s23], [0.0, s23, 1.0]])
    eps = _stream(spec.seed, 0).standard_normal((N, 3)) @ np.linalg.cholesky(cov).T
    y, w1, w2 = np.zeros(N), np.zeros(N), np.zeros(N)
    y[0], w1[0], w2[0] = 0.1 / 0.7, 0.5, 0.5
    for t in range(N - 1):
        y[t + 1] = 0.1 + 0.3 * y[t] + beta2 * w1[t] + eps[t + 1, 0]
        w1[t + 1] = 0.2 + 0.6 * w1[t] + eps[t + 1, 1]
        w2[t + 1] = 0.3 + 0.4 * w2[t] + eps[t + 1, 2]
    y, w1, w2 = y[BURN_IN:], w1[BURN_IN:], w2[BURN_IN:]
    noise = _stream(spec.seed, 1).standard_normal((4, n)) * np.array([0.05, 0.15, 0.05, 0.15])[:, None]
    yt = y[WINDOW:WINDOW + n]
    realized = y[WINDOW + 1:WINDOW + n + 1]
    X = y[:, None]
    coefs = np.array([ols_fit(X[t - WINDOW:t], y[t - WINDOW + 1:t + 1]) for t in range(WINDOW, WINDOW + n)])
    x1 = (coefs[:, 0] + noise[0]) + (coefs[:, 1] + noise[1]) * yt
    if extra is None:
        x2 = (coefs[:, 0] + noise[2]) + (coefs[:, 1] + noise[3]) * yt
    else:
        w = w1 if extra == "w1" else w2
        x2, _ = _rolling_ols_forecasts(y, [y, w], n)
    return realized, x1, x2


def _gen_e3(spec, n):
    N = BURN_IN + WINDOW + n + 1
    z = _stream(spec.seed, 0).standard_normal(N)
    v = np.empty(N)
    s2, vprev = 1.0, 0.0
    for t in range(N):
        s2 = 0.05 + 0.75 * s2 + 0.2 * vprev * vprev
        v[t] = math.sqrt(s2) * z[t]
        vprev = v[t]
    v = v[BURN_IN:]
    y = v * v
    yt = y[WINDOW:WINDOW + n]
    realized = y[WINDOW + 1:WINDOW + n + 1]
    u = np.exp(0.3 * _stream(spec.seed, 1).standard_normal((2, n)))
    x1 = math.exp(-0.045) * u[0] * yt
    order = E3_SETTINGS[spec.setting]
    if order is None:
        return realized, x1, math.exp(-0.045) * u[1] * yt
    p, q = order
    x2 = np.empty(n)
    start = None
    for i in range(n):
        t = WINDOW + i
        fit = garch_fit(v[t - WINDOW + 1:t + 1], p, q, start=start)
        start = fit.raw
        x2[i] = fit.next_variance
    return realized, x1, x2


def _gen_q2(spec, n):
    N = WINDOW + n + 1
    w1 = _stream(spec.seed, 0).standard_normal(N)
    w2 = _stream(spec.seed, 1).standard_normal(N)
    eps = _stream(spec.seed, 2).standard_normal(N)
    y = np.empty(N)
    y[0] = 0.5 + eps[0]
    y[1:] = 0.5 + 1.2 * w1[:-1] + 1.5 * w2[:-1] + eps[1:]
    z = _stream(spec.seed, 3).standard_normal((2, n))
    a = spec.alpha
    realized = y[WINDOW + 1:WINDOW + n + 1]
    base, resid = _rolling_ols_forecasts(y, [w1], n)
    q_base = np.array([sample_quantile(r, a) for r in resid])
    x1 = base + q_base + z[0]
    st = spec.setting
    if st == "lfc":
        x2 = base + q_base + z[1]
    elif st == "no_noise":
        x2 = base + q_base
    elif st == "correct":
        full, res_full = _rolling_ols_forecasts(y, [w1, w2], n)
        x2 = full + np.array([sample_quantile(r, a) for r in res_full])
    elif st == "partial":
        # quantile of the residuals of the partial model (regression mean plus the known W2 term)
        qs = np.empty(n)
        for i in range(n):
            t = WINDOW + i
            s = slice(t - WINDOW, t)
            coef = ols_fit(w1[s], y[t - WINDOW + 1:t + 1])
            r = y[t - WINDOW + 1:t + 1] - (coef[0] + coef[1] * w1[s] + 1.5 * w2[s])
            qs[i] = sample_quantile(r, a)
        x2 = base + 1.5 * w2[WINDOW:WINDOW + n] + qs
    else:  # oracle mean
        mean = 0.5 + 1.2 * w1 + 1.5 * w2
        qs = np.array([sample_quantile(y[t - WINDOW + 1:t + 1] - mean[t - WINDOW:t], a)
                       for t in range(WINDOW, WINDOW + n)])
        x2 = mean[WINDOW:WINDOW + n] + qs
    return realized, x1, x2


_GENERATORS = {"mse": _gen_mse, "e1": _gen_e1q1, "q1": _gen_e1q1, "e2": _gen_e2, "e3": _gen_e3, "q2": _gen_q2}


def generate_scenario(spec: ScenarioSpec) -> ForecastPanel:
    """Panel with realized values ``y``, benchmark ``x1`` and competitor ``x2``."""
    y, x1, x2 = _GENERATORS[spec.design](spec, int(spec.T_P))
    return ForecastPanel.from_columns(y, {"x1": x1, "x2": x2})


# ---------------------------------------------------------------- analytic oracle


def _trunc_term(theta, c, b, beta):
    """E[1{theta < c + b W}(Y - theta)] with Y = GAMMA + beta W + independent noise."""
    z = (theta - c) / b
    return (GAMMA - theta) * norm.sf(z) + beta * norm.pdf(z)


def analytic_loss_diff(scenario, loss: LossSpec) -> float:
    """Exact E[L(X1, Y)] - E[L(X2, Y)] for the mse design at alpha = 0.5.

    Supports the squared-error, exponential Bregman and extremal
    expectile scores (all carrying the alpha-weight of one half).
    """
    key = str(scenario)
    if key not in MSE_SCENARIOS:
        raise InvalidArgumentError(f"unknown scenario {scenario!r}")
    c1, c2, b1, b2 = MSE_SCENARIOS[key]
    if loss.family == "squared_error":
        e1 = (GAMMA - c1) ** 2 + (BETA1 - b1) ** 2 + BETA2**2 + 1.0
        e2 = (GAMMA - c2) ** 2 + BETA1**2 + (BETA2 - b2) ** 2 + 1.0
        return 0.5 * (e1 - e2)
    if loss.family == "exponential_bregman":
        a = loss.param
        m1 = math.exp(a * c1 + 0.5 * a * a * b1 * b1)
        m2 = math.exp(a * c2 + 0.5 * a * a * b2 * b2)
        # E[e^{aX}(Y - X)] = m (GAMMA - c + a b (beta - b)) by exponential tilting of W
        k1 = GAMMA - c1 + a * b1 * (BETA1 - b1)
        k2 = GAMMA - c2 + a * b2 * (BETA2 - b2)
        return 0.5 * ((m2 - m1) / a**2 - (m1 * k1 - m2 * k2) / a)
    if loss.family == "extremal_expectile":
        th = loss.param
        return 0.5 * (_trunc_term(th, c2, b2, BETA2) - _trunc_term(th, c1, b1, BETA1))
    raise InvalidArgumentError(f"no analytic expression for {loss.family}")


# ---------------------------------------------------------------- studies


def _bootstrap_seed(master, r) -> int:
    return int(np.random.SeedSequence([master, r], spawn_key=(1,)).generate_state(1, dtype=np.uint64)[0] >> 1)


@dataclass
class StudyResult:
    design: str
    setting: str
    alpha: float
    T_P: int
    replications: int
    bootstrap_M: int
    reversed: bool
    rejections: dict  # test -> {level: count}
    p_values: dict  # test -> array of per-replication p-values
    elapsed: float = field(default=0.0, compare=False)

    def frequency(self, test: str, level: float) -> float:
        return self.rejections[test][level] / self.replications

    def to_csv(self) -> str:
        lines = ["design,setting,reversed,alpha,T_P,replications,bootstrap_M,test,level,rejection_freq"]
        for test in sorted(self.rejections):
            for g in sorted(self.rejections[test]):
                lines.append(
                    f"{self.design},{self.setting},{int(self.reversed)},{self.alpha!r},{self.T_P},"
                    f"{self.replications},{self.bootstrap_M},{test},{g!r},{self.frequency(test, g)!r}"
                )
        return "\n".join(lines) + "\n"

    def p_values_csv(self) -> str:
        tests = sorted(self.p_values)
        lines = ["replication," + ",".join(f"p_{t}" for t in tests)]
        for r in range(self.replications):
            lines.append(f"{r}," + ",".join(repr(float(self.p_values[t][r])) for t in tests))
        return "\n".join(lines) + "\n"


def _one_replication(design, setting, alpha, T_P, seed, r, M, levels, reverse, with_dm):
    spec = ScenarioSpec(design, setting, T_P, alpha, seed=(seed, r))
    panel = generate_scenario(spec)
    sl = PanelSlice(panel, "x1", ("x2",))
    if reverse:
        sl = sl.reversed()
    cfg = BootstrapConfig(M=M, seed=_bootstrap_seed(seed, r), levels=levels)
    rep = recentered_bootstrap_test(sl, spec.level, config=cfg)
    out = {"proposed": (rep.p_value, {g: rep.reject[g] for g in levels})}
    if with_dm:
        dm = dm_test(sl, loss=with_dm, alpha=alpha)
        out["dm"] = (dm.p_value, {g: dm.p_value <= g for g in levels})
    return out


def run_rejection_study(design: str, setting, T_P: int, replications: int = 200, M: int = 200,
                        levels=(0.01, 0.05, 0.1), alpha: float = 0.5, seed: int = 0,
                        reverse: bool = False, with_dm: str | None = None, threads: int = 1) -> StudyResult:
    """Rejection frequencies of the bootstrap test (and optionally DM) over replications."""
    if replications < 1:
        raise InvalidArgumentError("replications must be positive")
    spec = ScenarioSpec(design, setting, T_P, alpha)  # validates
    levels = tuple(float(g) for g in levels)
    t0 = time.perf_counter()
    job = lambda r: _one_replication(design, spec.setting, alpha, T_P, seed, r, M, levels, reverse, with_dm)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(job, range(replications)))
    else:
        results = [job(r) for r in range(replications)]
    tests = list(results[0])
    rejections = {t: {g: sum(int(res[t][1][g]) for res in results) for g in levels} for t in tests}
    pvals = {t: np.array([res[t][0] for res in results]) for t in tests}
    return StudyResult(design, spec.setting, float(alpha), int(T_P), int(replications), int(M), bool(reverse),
                       rejections, pvals, time.perf_counter() - t0)


# ---------------------------------------------------------------- size-power


@dataclass
class SizePowerCurve:
    gamma: np.ndarray
    power: np.ndarray

    def to_csv(self) -> str:
        rows = [f"{g!r},{p!r}" for g, p in zip(self.gamma.tolist(), self.power.tolist())]
        return "gamma,power\n" + "\n".join(rows) + "\n"


def size_power_curve(p_null, p_alt, gamma=None) -> SizePowerCurve:
    """Size-adjusted power: reject when an alternative p-value is at most the
    inf-type gamma-quantile of the null p-values."""
    p0 = np.sort(np.asarray(p_null, dtype=float))
    p1 = np.asarray(p_alt, dtype=float)
    if p0.size == 0 or p1.size == 0:
        raise EmptyInputError("p-value vectors must be non-empty")
    if np.any((p0 < 0) | (p0 > 1)) or np.any((p1 < 0) | (p1 > 1)):
        raise InvalidArgumentError("p-values must lie in [0, 1]")
    gamma = np.linspace(0.01, 1.0, 100) if gamma is None else np.asarray(gamma, dtype=float)
    N = p0.size
    j = np.clip(np.ceil(gamma * N - 1e-9).astype(int), 1, N)
    thresh = p0[j - 1]
    power = np.array([np.mean(p1 <= q) for q in thresh])
    return SizePowerCurve(gamma, power)
