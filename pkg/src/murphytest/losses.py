"""Extremal and consistent scoring functions for expectiles and quantiles.

Every consistent scoring function for an alpha-expectile (alpha-quantile)
is a mixture of elementary "extremal" scores indexed by a threshold
``theta``.  This module provides the extremal scores, the usual
parametric families, numerical mixture integration and Murphy curves
(average extremal score as a function of ``theta``).

All scoring functions accept scalars or broadcastable arrays and return
a float for scalar input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from murphytest.errors import DomainError, EmptyInputError, InvalidArgumentError, RangeError, SpecError

EXPECTILE = "expectile"
QUANTILE = "quantile"


def _check_alpha(alpha) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0) or not np.isfinite(alpha):
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha!r}")
    return alpha


@dataclass(frozen=True)
class FunctionalLevel:
    """Target functional: ``kind`` is "expectile" or "quantile"."""

    kind: str
    alpha: float

    def __post_init__(self):
        if self.kind not in (EXPECTILE, QUANTILE):
            raise InvalidArgumentError(f"kind must be 'expectile' or 'quantile', got {self.kind!r}")
        object.__setattr__(self, "alpha", _check_alpha(self.alpha))


# ---------------------------------------------------------------- extremal


def _as_arrays(*vals):
    arrs = [np.asarray(v, dtype=float) for v in vals]
    scalar = all(a.ndim == 0 for a in arrs)
    for a in arrs:
        if not np.all(np.isfinite(a)):
            raise InvalidArgumentError("non-finite input to scoring function")
    return np.broadcast_arrays(*arrs), scalar


def _out(val, scalar):
    return float(val) if scalar else val


def extremal_expectile_loss(theta, x, y, alpha):
    """Elementary expectile score at threshold ``theta``.

    Equals ``|1{y<x} - alpha| * |theta - y|`` for ``theta`` in
    ``[min(x, y), max(x, y))`` and zero elsewhere, which is the
    piecewise form of ``|1{y<x}-a| [(y-t)+ - (x-t)+ - 1{t<x}(y-x)]``.
    """
    alpha = _check_alpha(alpha)
    (theta, x, y), scalar = _as_arrays(theta, x, y)
    w = np.where(y < x, 1.0 - alpha, alpha)
    inside = (theta >= np.minimum(x, y)) & (theta < np.maximum(x, y))
    return _out(np.where(inside, w * np.abs(theta - y), 0.0), scalar)


def extremal_quantile_loss(theta, x, y, alpha):
    """Elementary quantile score ``(1{y<x} - alpha)(1{theta<x} - 1{theta<y})``."""
    alpha = _check_alpha(alpha)
    (theta, x, y), scalar = _as_arrays(theta, x, y)
    val = ((y < x).astype(float) - alpha) * ((theta < x).astype(float) - (theta < y).astype(float))
    return _out(val, scalar)


# ---------------------------------------------------------------- families


@dataclass(frozen=True)
class _Family:
    name: str
    kind: str
    needs_param: bool
    positive: bool  # forecasts and observations must be > 0
    base: Callable  # L^E(x, y, p) for expectiles, zeta(t, p) for quantiles
    check: Callable = lambda p: None
    # mixing measure: antiderivative H of dH, antiderivative of theta dH, density
    H: Callable | None = None
    M: Callable | None = None
    density: Callable | None = None


def _need(cond, msg):
    if not cond:
        raise InvalidArgumentError(msg)


def _sq_base(x, y, p):
    return (x - y) ** 2


def _expb_base(x, y, a):
    return (np.exp(a * y) - np.exp(a * x)) / a**2 - np.exp(a * x) * (y - x) / a


def _homb_base(x, y, b):
    return np.abs(y) ** b - np.abs(x) ** b - b * np.sign(x) * np.abs(x) ** (b - 1) * (y - x)


def _qlike_base(x, y, p):
    r = y / x
    return r - np.log(r) - 1.0


def _patton_base(x, y, c):
    return (y**c - x**c) / (c * c - c) - x ** (c - 1) * (y - x) / (c - 1)


def _logistic_base(x, y, p):
    with np.errstate(divide="ignore"):
        return np.where(y == 1.0, -np.log(x), -np.log1p(-x))


_FAMILIES = {
    "squared_error": _Family(
        "squared_error", EXPECTILE, False, False, _sq_base,
        H=lambda t, p: 2.0 * t, M=lambda t, p: t * t, density=lambda t, p: np.full_like(t, 2.0),
    ),
    "exponential_bregman": _Family(
        "exponential_bregman", EXPECTILE, True, False, _expb_base,
        check=lambda a: _need(a != 0, "exponential Bregman parameter a must be non-zero"),
        H=lambda t, a: np.exp(a * t) / a,
        M=lambda t, a: t * np.exp(a * t) / a - np.exp(a * t) / a**2,
        density=lambda t, a: np.exp(a * t),
    ),
    "homogeneous_bregman": _Family(
        "homogeneous_bregman", EXPECTILE, True, False, _homb_base,
        check=lambda b: _need(b > 1, "homogeneous Bregman parameter b must exceed 1"),
        H=lambda t, b: b * np.sign(t) * np.abs(t) ** (b - 1),
        M=lambda t, b: (b - 1) * np.abs(t) ** b,
        density=lambda t, b: b * (b - 1) * np.abs(t) ** (b - 2),
    ),
    "qlike": _Family(
        "qlike", EXPECTILE, False, True, _qlike_base,
        H=lambda t, p: -1.0 / t, M=lambda t, p: np.log(t) - 1.0, density=lambda t, p: 1.0 / t**2,
    ),
    "homogeneous_patton": _Family(
        "homogeneous_patton", EXPECTILE, True, True, _patton_base,
        check=lambda c: _need(c not in (0.0, 1.0), "homogeneous Patton parameter c must not be 0 or 1"),
        H=lambda t, c: t ** (c - 1) / (c - 1), M=lambda t, c: t**c / c, density=lambda t, c: t ** (c - 2),
    ),
    "logistic_bregman": _Family("logistic_bregman", EXPECTILE, False, False, _logistic_base),
    "linlin": _Family(
        "linlin", QUANTILE, False, False, lambda t, p: t,
        H=lambda t, p: t, density=lambda t, p: np.ones_like(t),
    ),
    "scaled_linlin": _Family(
        # parameter is alpha itself; filled in from the level
        "scaled_linlin", QUANTILE, False, False, lambda t, a: t / a,
        H=lambda t, a: t / a, density=lambda t, a: np.full_like(t, 1.0 / a),
    ),
    "homogeneous_power": _Family(
        "homogeneous_power", QUANTILE, True, True, lambda t, c: t**c / c,
        check=lambda c: _need(c != 0, "homogeneous power parameter c must be non-zero"),
        H=lambda t, c: t**c / c, density=lambda t, c: t ** (c - 1),
    ),
    "log_power": _Family(
        "log_power", QUANTILE, False, True, lambda t, p: np.log(t),
        H=lambda t, p: np.log(t), density=lambda t, p: 1.0 / t,
    ),
    "extremal_expectile": _Family("extremal_expectile", EXPECTILE, True, False, None),
    "extremal_quantile": _Family("extremal_quantile", QUANTILE, True, False, None),
}


@dataclass(frozen=True)
class LossSpec:
    """A named scoring-function family with its shape parameter.

    ``param`` is ``a`` for the exponential Bregman family, ``b`` for the
    homogeneous Bregman family, ``c`` for the homogeneous Patton and
    power families and ``theta`` for the extremal scores.
    """

    family: str
    param: float | None = None

    def __post_init__(self):
        fam = _FAMILIES.get(self.family)
        if fam is None:
            raise InvalidArgumentError(f"unknown loss family {self.family!r}")
        if fam.needs_param:
            if self.param is None or not np.isfinite(self.param):
                raise InvalidArgumentError(f"family {self.family!r} needs a finite parameter")
            object.__setattr__(self, "param", float(self.param))
            fam.check(self.param)
        elif self.param is not None:
            raise InvalidArgumentError(f"family {self.family!r} takes no parameter")

    @property
    def kind(self) -> str:
        return _FAMILIES[self.family].kind

    @property
    def name(self) -> str:
        return self.family if self.param is None else f"{self.family}({self.param:g})"

    # convenience constructors
    @classmethod
    def squared_error(cls):
        return cls("squared_error")

    @classmethod
    def exponential_bregman(cls, a):
        return cls("exponential_bregman", a)

    @classmethod
    def homogeneous_bregman(cls, b):
        return cls("homogeneous_bregman", b)

    @classmethod
    def qlike(cls):
        return cls("qlike")

    @classmethod
    def homogeneous_patton(cls, c):
        return cls("homogeneous_patton", c)

    @classmethod
    def logistic_bregman(cls):
        return cls("logistic_bregman")

    @classmethod
    def linlin(cls):
        return cls("linlin")

    @classmethod
    def scaled_linlin(cls):
        return cls("scaled_linlin")

    @classmethod
    def homogeneous_power(cls, c):
        return cls("homogeneous_power", c)

    @classmethod
    def log_power(cls):
        return cls("log_power")

    @classmethod
    def extremal_expectile(cls, theta):
        return cls("extremal_expectile", theta)

    @classmethod
    def extremal_quantile(cls, theta):
        return cls("extremal_quantile", theta)


def _check_domain(fam: _Family, x, y):
    if fam.positive and (np.any(x <= 0) or np.any(y <= 0)):
        raise DomainError(f"{fam.name} needs strictly positive forecasts and observations")
    if fam.name == "logistic_bregman":
        if np.any((x < 0) | (x > 1)):
            raise DomainError("logistic Bregman forecasts must lie in [0, 1]")
        if np.any((y != 0) & (y != 1)):
            raise DomainError("logistic Bregman observations must be 0 or 1")
        if np.any(((x == 0) & (y == 1)) | ((x == 1) & (y == 0))):
            raise DomainError("logistic Bregman score is infinite at this forecast")


def consistent_loss(spec: LossSpec, level: FunctionalLevel, x, y):
    """Consistent scoring function of a family for the given level.

    Expectile families use ``|1{y<x} - alpha| * L(x, y)`` with ``L`` a
    Bregman divergence; quantile families use
    ``(1{y<x} - alpha)(zeta(x) - zeta(y))`` with ``zeta`` nondecreasing.
    """
    if spec.kind != level.kind:
        raise InvalidArgumentError(f"{spec.family} is a {spec.kind} score, level is {level.kind}")
    alpha = level.alpha
    if spec.family == "extremal_expectile":
        return extremal_expectile_loss(spec.param, x, y, alpha)
    if spec.family == "extremal_quantile":
        return extremal_quantile_loss(spec.param, x, y, alpha)
    fam = _FAMILIES[spec.family]
    (x, y), scalar = _as_arrays(x, y)
    _check_domain(fam, x, y)
    below = (y < x).astype(float)
    p = alpha if spec.family == "scaled_linlin" else spec.param
    with np.errstate(over="ignore", invalid="ignore"):
        if fam.kind == EXPECTILE:
            val = np.abs(below - alpha) * fam.base(x, y, p)
        else:
            val = (below - alpha) * (fam.base(x, p) - fam.base(y, p))
    if not np.all(np.isfinite(val)):
        raise DomainError(f"{spec.name} score overflowed")
    # Bregman divergences and monotone-zeta scores are nonnegative; drop rounding noise
    return _out(np.maximum(val, 0.0), scalar)


# ---------------------------------------------------------------- mixtures


@dataclass(frozen=True)
class MixtureSpec:
    """Numerical mixture representation of a consistent score.

    The score is approximated by integrating extremal scores over
    ``[lo, hi]`` against the family's mixing measure.  ``lo``/``hi`` of
    ``None`` default to the observation range widened by one unit
    (clipped to the family support).  ``point_masses`` holds extra atoms
    as ``(theta0, weight_fn)`` pairs where ``weight_fn(x, y)`` gives the
    atom weight.
    """

    target: LossSpec
    lo: float | None = None
    hi: float | None = None
    node_count: int = 2001
    point_masses: tuple = field(default_factory=tuple)

    def __post_init__(self):
        fam = _FAMILIES[self.target.family]
        if fam.H is None:
            raise SpecError(f"no finite mixing measure available for {self.target.family}")
        if int(self.node_count) < 3:
            raise SpecError("node_count must be at least 3")
        if self.lo is not None and self.hi is not None and not self.lo < self.hi:
            raise SpecError("integration range needs lo < hi")


def homogeneous_bregman_origin_atom(b: float):
    """Atom ``b |x|^(b-1)`` at the origin for the homogeneous Bregman family.

    The mixing measure of this family is absolutely continuous, so this
    atom is *not* part of the default mixture.  It is provided to
    reproduce representations that include it, for comparison.
    """
    return (0.0, lambda x, y: b * abs(x) ** (b - 1))


def _mixing_param(spec: LossSpec, alpha: float):
    return alpha if spec.family == "scaled_linlin" else spec.param


def mixture_loss(mix: MixtureSpec, level: FunctionalLevel, x: float, y: float) -> float:
    """Integrate extremal scores of ``(x, y)`` against the mixing measure.

    The integrand is piecewise linear (expectiles) or piecewise constant
    (quantiles) in ``theta`` with breakpoints at ``x`` and ``y``.  These
    are inserted into the node set and each cell uses the trapezoid
    interpolant of the integrand, integrated exactly against ``dH`` via
    its antiderivatives.  This keeps the rule accurate across the jump at
    ``theta = x`` and through integrable density singularities.
    """
    spec = mix.target
    if spec.kind != level.kind:
        raise InvalidArgumentError(f"{spec.family} is a {spec.kind} score, level is {level.kind}")
    fam = _FAMILIES[spec.family]
    (xa, ya), _ = _as_arrays(x, y)
    x, y = float(xa), float(ya)
    _check_domain(fam, np.asarray(x), np.asarray(y))
    alpha = level.alpha
    p = _mixing_param(spec, alpha)
    a, b = min(x, y), max(x, y)
    lo = mix.lo if mix.lo is not None else (max(a - 1.0, a / 2.0) if fam.positive else a - 1.0)
    hi = mix.hi if mix.hi is not None else b + 1.0
    if not lo < hi:
        raise SpecError("integration range needs lo < hi")

    nodes = np.linspace(lo, hi, int(mix.node_count))
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = fam.density(nodes, p)
    if np.any(dens < 0):
        raise SpecError(f"mixing density of {spec.name} is negative on [{lo}, {hi}]")
    if fam.positive and lo <= 0:
        raise SpecError(f"mixing measure of {spec.name} is undefined for theta <= 0")
    if np.any(np.isnan(dens)):
        raise SpecError(f"mixing density of {spec.name} is undefined on [{lo}, {hi}]")
    if lo > a or hi < b:
        raise RangeError(f"integration range [{lo}, {hi}] does not cover [{a}, {b}]")

    nodes = np.unique(np.concatenate([nodes, [x, y]]))
    u, v = nodes[:-1], nodes[1:]
    width = v - u
    extremal = extremal_expectile_loss if level.kind == EXPECTILE else extremal_quantile_loss
    # one-sided limits of the (cellwise linear) integrand from two interior points
    f1 = extremal(u + 0.25 * width, x, y, alpha)
    f2 = extremal(u + 0.75 * width, x, y, alpha)
    f_left = 1.5 * f1 - 0.5 * f2
    f_right = 1.5 * f2 - 0.5 * f1
    dH = fam.H(v, p) - fam.H(u, p)
    if fam.M is not None:
        w_right = (fam.M(v, p) - fam.M(u, p) - u * dH) / width
        total = np.sum(f_left * (dH - w_right) + f_right * w_right)
    else:
        total = np.sum(0.5 * (f_left + f_right) * dH)
    for theta0, weight_fn in mix.point_masses:
        total += weight_fn(x, y) * extremal(theta0, x, y, alpha)
    return float(total)


# ---------------------------------------------------------------- interval sums


def expectile_boxes(x, y, alpha):
    """Box representation of extremal expectile scores over ``theta``.

    Row ``t`` contributes ``c0 + c1 * theta`` on ``[lo, hi)``.
    """
    below = y < x
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    c1 = np.where(below, 1.0 - alpha, -alpha)
    c0 = -c1 * y
    return lo, hi, c0, c1


def quantile_boxes(x, y, alpha):
    below = y < x
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    c0 = np.where(below, 1.0 - alpha, alpha)
    return lo, hi, c0, np.zeros_like(c0)


def boxes_for(kind, x, y, alpha):
    return expectile_boxes(x, y, alpha) if kind == EXPECTILE else quantile_boxes(x, y, alpha)


def interval_sums(grid, lo, hi, c0, c1, weights=None):
    """Evaluate ``sum_t w_t (c0_t + c1_t theta) 1{lo_t <= theta < hi_t}`` on a grid.

    Parameters
    ----------
    grid : ndarray, shape (G,)
        Strictly increasing evaluation points.
    lo, hi, c0, c1 : ndarray, shape (T,)
        Box bounds and linear coefficients per row.
    weights : ndarray, shape (T,) or (R, T), optional
        Row weights; a 2-D array evaluates ``R`` weightings at once.

    Returns
    -------
    ndarray, shape (G,) or (R, G)
    """
    grid = np.asarray(grid, dtype=float)
    G = grid.size
    start = np.searchsorted(grid, lo, side="left")
    stop = np.searchsorted(grid, hi, side="left")
    keep = start < stop
    start, stop, c0, c1 = start[keep], stop[keep], c0[keep], c1[keep]
    single = weights is None or np.ndim(weights) == 1
    if weights is None:
        W = np.ones((1, start.size))
    else:
        W = np.atleast_2d(np.asarray(weights, dtype=float))[:, keep]
    R = W.shape[0]
    offs = (np.arange(R) * (G + 1))[:, None]
    i0 = (offs + start).ravel()
    i1 = (offs + stop).ravel()
    n = R * (G + 1)
    out = np.empty((R, G))
    acc = None
    for coef in (c0, c1):
        wc = (W * coef).ravel()
        d = np.bincount(i0, wc, minlength=n) - np.bincount(i1, wc, minlength=n)
        cum = np.cumsum(d.reshape(R, G + 1)[:, :G], axis=1)
        acc = cum if acc is None else acc + cum * grid
    out[:] = acc
    return out[0] if single else out


# ---------------------------------------------------------------- Murphy curves


@dataclass
class MurphyCurve:
    """Average extremal score per forecast series over a threshold grid."""

    theta: np.ndarray
    losses: np.ndarray  # (G, K)
    names: list

    def column(self, name) -> np.ndarray:
        return self.losses[:, self.names.index(name)]


def murphy_curve(level: FunctionalLevel, forecasts, y, theta, names: Sequence[str] | None = None) -> MurphyCurve:
    """Mean extremal score of each forecast series at every ``theta``.

    ``forecasts`` is a (T, K) array or a mapping name -> series.
    """
    if isinstance(forecasts, dict):
        names = list(forecasts)
        X = np.column_stack([np.asarray(forecasts[k], dtype=float) for k in names])
    else:
        X = np.asarray(forecasts, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        names = list(names) if names is not None else [f"f{i}" for i in range(X.shape[1])]
    y = np.asarray(y, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if y.size == 0:
        raise EmptyInputError("empty panel")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y)) and np.all(np.isfinite(theta))):
        raise InvalidArgumentError("non-finite value in Murphy curve input")
    order = np.argsort(theta, kind="stable")
    th_sorted = theta[order]
    if np.any(np.diff(th_sorted) == 0):
        raise InvalidArgumentError("theta grid has duplicate points")
    out = np.empty((theta.size, X.shape[1]))
    for k in range(X.shape[1]):
        vals = interval_sums(th_sorted, *boxes_for(level.kind, X[:, k], y, level.alpha)) / y.size
        out[order, k] = vals
    return MurphyCurve(theta=theta, losses=out, names=names)
