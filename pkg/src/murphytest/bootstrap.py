"""Stationary bootstrap and the re-centred bootstrap dominance test."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from murphytest.engine import TestReport, ThetaGrid, build_theta_grid, pair_boxes, sup_statistic
from murphytest.errors import InvalidArgumentError
from murphytest.losses import FunctionalLevel, interval_sums
from murphytest.panel import PanelSlice

DEFAULT_LEVELS = (0.01, 0.05, 0.1)
_CHUNK = 50


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap settings.

    Parameters
    ----------
    M : int
        Number of bootstrap replicates.
    p : float or None
        Reciprocal mean block length; ``None`` means ``T**(-1/3)``.
    seed : int
        Master seed; replicate ``r`` uses the stream ``(seed, r)``.
    levels : tuple of float
        Significance levels for critical values.
    """

    M: int = 400
    p: float | None = None
    seed: int = 0
    levels: tuple = DEFAULT_LEVELS

    def __post_init__(self):
        if int(self.M) < 1:
            raise InvalidArgumentError("bootstrap M must be at least 1")
        if self.p is not None and not (0.0 < self.p <= 1.0):
            raise InvalidArgumentError(f"block probability p must lie in (0, 1], got {self.p}")
        levels = tuple(float(g) for g in self.levels)
        if not levels or any(not 0.0 < g < 1.0 for g in levels):
            raise InvalidArgumentError("significance levels must lie in (0, 1)")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def with_mean_block_length(cls, length: float, **kw) -> "BootstrapConfig":
        if not length >= 1.0:
            raise InvalidArgumentError("mean block length must be at least 1")
        return cls(p=1.0 / length, **kw)

    def resolve_p(self, n: int) -> float:
        return min(1.0, n ** (-1.0 / 3.0)) if self.p is None else float(self.p)


def replicate_rng(seed: int, r: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))


def stationary_blocks(n: int, p: float, rng: np.random.Generator):
    """Block starts and (untruncated) geometric lengths covering ``n`` entries."""
    if not 0.0 < p <= 1.0:
        raise InvalidArgumentError(f"block probability p must lie in (0, 1], got {p}")
    if n < 1:
        raise InvalidArgumentError("series length must be at least 1")
    starts, lengths = [], []
    total = 0
    batch = int(n * p) + 8
    while total < n:
        s = rng.integers(0, n, size=batch)
        L = rng.geometric(p, size=batch)
        starts.append(s)
        lengths.append(L)
        total += int(L.sum())
    starts = np.concatenate(starts)
    lengths = np.concatenate(lengths)
    nb = int(np.searchsorted(np.cumsum(lengths), n)) + 1
    return starts[:nb], lengths[:nb]


def stationary_resample_indices(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Stationary-bootstrap index vector of length ``n``.

    Blocks start uniformly on ``0..n-1``, have geometric(p) lengths, wrap
    around circularly and are truncated to exactly ``n`` entries.
    """
    starts, lengths = stationary_blocks(n, p, rng)
    offsets = np.cumsum(lengths) - lengths
    lengths = lengths.copy()
    lengths[-1] = n - offsets[-1]
    return (np.repeat(starts - offsets, lengths) + np.arange(n)) % n


def empirical_quantile(dist, q: float) -> float:
    """Smallest order statistic whose empirical CDF is at least ``q``."""
    if not 0.0 < q < 1.0:
        raise InvalidArgumentError(f"quantile level must lie in (0, 1), got {q}")
    s = np.sort(np.asarray(dist, dtype=float))
    if s.size == 0:
        raise InvalidArgumentError("empty distribution")
    # tolerance absorbs binary representation of levels such as 0.95
    j = max(1, math.ceil(q * s.size - 1e-9))
    return float(s[j - 1])


def _replicate_stats(boxes, grid, n, p, seed, reps, rt):
    """Re-centred sup statistics for replicate indices ``reps``."""
    counts = np.empty((len(reps), n))
    for i, r in enumerate(reps):
        idx = stationary_resample_indices(n, p, replicate_rng(seed, r))
        counts[i] = np.bincount(idx, minlength=n)
    w = counts - 1.0  # D*(theta) - D(theta) = mean_t (n_t - 1) d_t(theta)
    out = np.full(len(reps), -np.inf)
    for lo, hi, c0, c1, rows in boxes:
        vals = interval_sums(grid, lo, hi, c0, c1, w[:, rows])
        out = np.maximum(out, vals.max(axis=1))
    return out * (rt / n)


def bootstrap_distribution(sl: PanelSlice, level: FunctionalLevel, grid: ThetaGrid,
                           config: BootstrapConfig, threads: int = 1) -> np.ndarray:
    """Re-centred bootstrap statistics in replicate order (unsorted)."""
    n = len(sl)
    p = config.resolve_p(n)
    X, y = sl.forecasts, sl.realized
    boxes = [pair_boxes(level.kind, X[:, k], X[:, l], y, level.alpha) for k, l in sl.pairs]
    rt = math.sqrt(n)
    chunks = [range(a, min(a + _CHUNK, config.M)) for a in range(0, config.M, _CHUNK)]
    job = lambda reps: _replicate_stats(boxes, grid.points, n, p, config.seed, reps, rt)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(job, chunks))
    else:
        parts = [job(c) for c in chunks]
    return np.concatenate(parts)


def recentered_bootstrap_test(sl: PanelSlice, level: FunctionalLevel, grid: ThetaGrid | None = None,
                              config: BootstrapConfig | None = None, threads: int = 1) -> TestReport:
    """Test whether the benchmark weakly dominates every competitor.

    The null is rejected at level ``g`` when the sup statistic reaches the
    bootstrap critical value for ``1 - g`` (ties reject) and is positive.
    """
    config = config or BootstrapConfig()
    if grid is None:
        grid = build_theta_grid(sl, "all", seed=config.seed)
    stat, pair, theta = sup_statistic(sl, level, grid)
    dist = bootstrap_distribution(sl, level, grid, config, threads)
    p_value = float(np.count_nonzero(dist >= stat)) / config.M
    crit = {g: empirical_quantile(dist, 1.0 - g) for g in config.levels}
    names = sl.names
    sdist = np.sort(dist)
    return TestReport(
        statistic=stat,
        argmax_theta=theta,
        argmax_pair=[names[pair[0]], names[pair[1]]],
        pairs=[[names[k], names[l]] for k, l in sl.pairs],
        p_value=p_value,
        critical_values=crit,
        # a zero statistic means no threshold favours a competitor: never reject
        reject={g: bool(stat >= c and stat > 0.0) for g, c in crit.items()},
        bootstrap_M=int(config.M),
        config={
            "kind": level.kind,
            "alpha": level.alpha,
            "block_p": config.resolve_p(len(sl)),
            "seed": int(config.seed),
            "grid": grid.mode.label(),
            "grid_size": len(grid),
            "left_limit_augmented": grid.left_limit_augmented,
            "n_obs": len(sl),
        },
        bootstrap_summary={
            "mean": float(sdist.mean()),
            "std": float(sdist.std()),
            "min": float(sdist[0]),
            "median": empirical_quantile(sdist, 0.5),
            "max": float(sdist[-1]),
        },
        distribution=sdist,
    )
