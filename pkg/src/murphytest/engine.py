"""Loss-difference curves over a threshold grid and the sup statistic."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from murphytest.errors import InvalidArgumentError
from murphytest.losses import FunctionalLevel, boxes_for, interval_sums
from murphytest.panel import PanelSlice

LEFT_LIMIT_REL = 2.0**-40
MAX_GRID = 10_000


@dataclass(frozen=True)
class GridMode:
    """How threshold points are chosen: "all", "subsample" or "linspace"."""

    kind: str = "all"
    n: int | None = None
    lo: float | None = None
    hi: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("all", "subsample", "linspace"):
            raise InvalidArgumentError(f"unknown grid mode {self.kind!r}")
        if self.kind != "all" and (self.n is None or self.n < 2):
            raise InvalidArgumentError("grid size must be at least 2")
        if self.kind == "linspace" and not (self.lo is not None and self.hi is not None and self.lo < self.hi):
            raise InvalidArgumentError("linspace grid needs lo < hi")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "GridMode":
        """Parse ``all``, ``subsample:N`` or ``linspace:lo:hi:N``."""
        parts = text.strip().split(":")
        try:
            if parts == ["all"]:
                return cls("all", seed=seed)
            if parts[0] == "subsample" and len(parts) == 2:
                return cls("subsample", n=int(parts[1]), seed=seed)
            if parts[0] == "linspace" and len(parts) == 4:
                return cls("linspace", n=int(parts[3]), lo=float(parts[1]), hi=float(parts[2]))
        except ValueError:
            pass
        raise InvalidArgumentError(f"cannot parse grid mode {text!r}")

    def label(self) -> str:
        if self.kind == "all":
            return "all"
        if self.kind == "subsample":
            return f"subsample:{self.n}"
        return f"linspace:{self.lo!r}:{self.hi!r}:{self.n}"


@dataclass
class ThetaGrid:
    points: np.ndarray
    mode: GridMode
    left_limit_augmented: bool

    def __len__(self):
        return self.points.size


def augment_left_limits(points: np.ndarray) -> np.ndarray:
    """Add ``p - max(|p|, 1) * 2**-40`` next to every point ``p``."""
    shifted = points - np.maximum(np.abs(points), 1.0) * LEFT_LIMIT_REL
    return np.unique(np.concatenate([points, shifted]))


def build_theta_grid(values, mode: GridMode | str = "all", augment: bool = True, seed: int = 0) -> ThetaGrid:
    """Threshold grid from the sample values involved in a comparison.

    ``values`` is a PanelSlice or any array of sample values.  Panels whose
    distinct values exceed 10^4 fall back to a seeded subsample of 10^4.
    Linspace grids are never augmented.
    """
    if isinstance(mode, str):
        mode = GridMode.parse(mode, seed=seed)
    if mode.kind == "linspace":
        return ThetaGrid(np.linspace(mode.lo, mode.hi, mode.n), mode, False)
    if isinstance(values, PanelSlice):
        involved = sorted({i for pr in values.pairs for i in pr})
        values = np.concatenate([values.realized, values.forecasts[:, involved].ravel()])
    pts = np.unique(np.asarray(values, dtype=float).ravel())
    if pts.size == 0:
        raise InvalidArgumentError("no sample values to build a grid from")
    if not np.all(np.isfinite(pts)):
        raise InvalidArgumentError("non-finite sample value")
    if mode.kind == "all" and pts.size > MAX_GRID:
        mode = GridMode("subsample", n=MAX_GRID, seed=mode.seed)
    if mode.kind == "subsample":
        if mode.n > pts.size:
            raise InvalidArgumentError(f"subsample of {mode.n} exceeds {pts.size} distinct points")
        rng = np.random.default_rng(mode.seed)
        pts = np.sort(rng.choice(pts, size=mode.n, replace=False))
    if augment:
        pts = augment_left_limits(pts)
    return ThetaGrid(pts, mode, augment)


def pair_boxes(kind, xk, xl, y, alpha):
    """Boxes of the per-row score differences ``L(x_k) - L(x_l)``.

    Rows with ``x_k == x_l`` contribute exactly nothing and are dropped.
    Returns ``(lo, hi, c0, c1, rows)`` where ``rows`` maps boxes to rows.
    """
    differ = xk != xl
    rows = np.flatnonzero(differ)
    bk = boxes_for(kind, xk[rows], y[rows], alpha)
    bl = boxes_for(kind, xl[rows], y[rows], alpha)
    lo = np.concatenate([bk[0], bl[0]])
    hi = np.concatenate([bk[1], bl[1]])
    c0 = np.concatenate([bk[2], -bl[2]])
    c1 = np.concatenate([bk[3], -bl[3]])
    return lo, hi, c0, c1, np.concatenate([rows, rows])


@dataclass
class DiffCurve:
    theta: np.ndarray
    values: np.ndarray
    pair: tuple  # (benchmark name, competitor name)
    kind: str
    alpha: float

    def to_csv(self) -> str:
        lines = ["theta,value"]
        lines += [f"{t!r},{v!r}" for t, v in zip(self.theta.tolist(), self.values.tolist())]
        return "\n".join(lines) + "\n"


def _check_slice(sl: PanelSlice):
    if not (np.all(np.isfinite(sl.forecasts)) and np.all(np.isfinite(sl.realized))):
        raise InvalidArgumentError("non-finite value in panel")


def loss_diff_curve(sl: PanelSlice, level: FunctionalLevel, grid: ThetaGrid, pair=(0, 1)) -> DiffCurve:
    """Mean extremal-score difference of forecasts ``k`` and ``l`` on the grid."""
    _check_slice(sl)
    k, l = pair
    X, y = sl.forecasts, sl.realized
    lo, hi, c0, c1, _ = pair_boxes(level.kind, X[:, k], X[:, l], y, level.alpha)
    vals = interval_sums(grid.points, lo, hi, c0, c1) / y.size
    names = sl.names
    return DiffCurve(grid.points, vals, (names[k], names[l]), level.kind, level.alpha)


def sup_statistic(sl: PanelSlice, level: FunctionalLevel, grid: ThetaGrid, pairs=None):
    """Return ``(S, pair, theta)`` with ``S = max_pairs max_theta sqrt(T) D(theta)``.

    Ties go to the first pair in order, then to the smallest theta.
    """
    pairs = sl.pairs if pairs is None else list(pairs)
    if not pairs:
        raise InvalidArgumentError("no pairs to compare")
    rt = math.sqrt(len(sl))
    best = None
    for pr in pairs:
        curve = loss_diff_curve(sl, level, grid, pr)
        j = int(np.argmax(curve.values))
        val = rt * curve.values[j]
        if best is None or val > best[0]:
            best = (float(val), pr, float(grid.points[j]))
    return best


@dataclass
class TestReport:
    """Outcome of the re-centred bootstrap dominance test."""

    statistic: float
    argmax_theta: float
    argmax_pair: list
    pairs: list
    p_value: float
    critical_values: dict  # level -> critical value
    reject: dict  # level -> bool
    bootstrap_M: int
    config: dict
    bootstrap_summary: dict = field(default_factory=dict)
    distribution: np.ndarray | None = field(default=None, repr=False)

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "argmax_theta": self.argmax_theta,
            "argmax_pair": list(self.argmax_pair),
            "pairs": [list(p) for p in self.pairs],
            "p_value": self.p_value,
            "critical_values": {repr(float(g)): v for g, v in self.critical_values.items()},
            "reject": {repr(float(g)): bool(v) for g, v in self.reject.items()},
            "bootstrap_M": self.bootstrap_M,
            "config": dict(self.config),
            "bootstrap_summary": dict(self.bootstrap_summary),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TestReport":
        return cls(
            statistic=d["statistic"],
            argmax_theta=d["argmax_theta"],
            argmax_pair=list(d["argmax_pair"]),
            pairs=[list(p) for p in d["pairs"]],
            p_value=d["p_value"],
            critical_values={float(g): v for g, v in d["critical_values"].items()},
            reject={float(g): v for g, v in d["reject"].items()},
            bootstrap_M=d["bootstrap_M"],
            config=dict(d["config"]),
            bootstrap_summary=dict(d.get("bootstrap_summary", {})),
        )
