"""Nelder-Mead simplex minimization with restarts.

The simplex loop is written once.  Plain Python callables run through it
directly, while numba-compiled objectives run through a compiled copy of
the same loop (used by the rolling CAViaR and GARCH refits).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from numba.core.registry import CPUDispatcher

from murphytest.errors import InvalidArgumentError, OptimizationError


@dataclass(frozen=True)
class NelderMeadConfig:
    max_iterations: int = 2000
    xatol: float = 1e-8
    fatol: float = 1e-10
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    restarts: int = 2
    initial_step: float = 0.05  # relative step; zero coordinates use 0.00025

    def __post_init__(self):
        ok = (
            self.reflection > 0
            and self.expansion > max(1.0, self.reflection)
            and 0 < self.contraction < 1
            and 0 < self.shrink < 1
            and self.max_iterations >= 1
            and self.restarts >= 0
        )
        if not ok:
            raise InvalidArgumentError("inadmissible Nelder-Mead coefficients")


def _nm_loop(f, x0, args, max_iter, xatol, fatol, rel_step, ca, ce, cc, cs):
    # written with explicit scalar loops so the compiled copy builds quickly
    n = x0.size
    sim = np.empty((n + 1, n))
    fs = np.empty(n + 1)
    for i in range(n + 1):
        for k in range(n):
            sim[i, k] = x0[k]
    for i in range(n):
        sim[i + 1, i] = x0[i] * (1.0 + rel_step) if x0[i] != 0.0 else 0.00025
    finite = 0
    for i in range(n + 1):
        v = f(sim[i], args)
        if np.isfinite(v):
            finite += 1
        else:
            v = np.inf
        fs[i] = v
    xbar = np.empty(n)
    xr = np.empty(n)
    xe = np.empty(n)
    xc = np.empty(n)
    row = np.empty(n)
    it = 0
    while True:
        # insertion sort of the vertices by objective value
        for i in range(1, n + 1):
            fv = fs[i]
            for k in range(n):
                row[k] = sim[i, k]
            j = i - 1
            while j >= 0 and fs[j] > fv:
                fs[j + 1] = fs[j]
                for k in range(n):
                    sim[j + 1, k] = sim[j, k]
                j -= 1
            fs[j + 1] = fv
            for k in range(n):
                sim[j + 1, k] = row[k]
        if it >= max_iter:
            break
        if np.isfinite(fs[n]) and fs[n] - fs[0] <= fatol:
            spread = 0.0
            for i in range(1, n + 1):
                for k in range(n):
                    spread = max(spread, abs(sim[i, k] - sim[0, k]))
            if spread <= xatol:
                break
        it += 1
        for k in range(n):
            acc = 0.0
            for i in range(n):
                acc += sim[i, k]
            xbar[k] = acc / n
        for k in range(n):
            xr[k] = xbar[k] + ca * (xbar[k] - sim[n, k])
        fr = f(xr, args)
        if np.isfinite(fr):
            finite += 1
        else:
            fr = np.inf
        if fr < fs[0]:
            for k in range(n):
                xe[k] = xbar[k] + ce * (xr[k] - xbar[k])
            fe = f(xe, args)
            if np.isfinite(fe):
                finite += 1
            else:
                fe = np.inf
            if fe < fr:
                for k in range(n):
                    sim[n, k] = xe[k]
                fs[n] = fe
            else:
                for k in range(n):
                    sim[n, k] = xr[k]
                fs[n] = fr
            continue
        if fr < fs[n - 1]:
            for k in range(n):
                sim[n, k] = xr[k]
            fs[n] = fr
            continue
        outside = fr < fs[n]
        for k in range(n):
            if outside:
                xc[k] = xbar[k] + cc * (xr[k] - xbar[k])
            else:
                xc[k] = xbar[k] + cc * (sim[n, k] - xbar[k])
        fc = f(xc, args)
        if np.isfinite(fc):
            finite += 1
        else:
            fc = np.inf
        if (outside and fc <= fr) or (not outside and fc < fs[n]):
            for k in range(n):
                sim[n, k] = xc[k]
            fs[n] = fc
            continue
        for i in range(1, n + 1):
            for k in range(n):
                sim[i, k] = sim[0, k] + cs * (sim[i, k] - sim[0, k])
            v = f(sim[i], args)
            if np.isfinite(v):
                finite += 1
            else:
                v = np.inf
            fs[i] = v
    return sim[0].copy(), fs[0], it, finite


_nm_loop_jit = numba.njit(cache=True, nogil=True)(_nm_loop)


def nelder_mead(objective, x0, config: NelderMeadConfig | None = None, args=()):
    """Minimize ``objective`` from ``x0``.

    Parameters
    ----------
    objective : callable
        ``objective(x, *args)`` for plain callables.  A numba-compiled
        objective is called as ``objective(x, args)`` with ``args`` a tuple.
    x0 : array_like
    config : NelderMeadConfig, optional
    args : tuple

    Returns
    -------
    (argmin, value, iterations)
    """
    cfg = config or NelderMeadConfig()
    x = np.array(x0, dtype=float).ravel()
    if isinstance(objective, CPUDispatcher):
        loop, f, a = _nm_loop_jit, objective, tuple(args)
    else:
        loop, a = _nm_loop, tuple(args)
        f = lambda z, extra: float(objective(z, *extra))
    params = (cfg.max_iterations, cfg.xatol, cfg.fatol, cfg.initial_step,
              cfg.reflection, cfg.expansion, cfg.contraction, cfg.shrink)
    best_x, best_f, iters, finite = loop(f, x, a, *params)
    for _ in range(cfg.restarts):
        if not np.isfinite(best_f):
            break
        nx, nf, k, fin = loop(f, best_x, a, *params)
        iters += k
        finite += fin
        improved = nf < best_f - cfg.fatol
        if nf < best_f:
            best_x, best_f = nx, nf
        if not improved:
            break
    if finite == 0 or not np.isfinite(best_f):
        raise OptimizationError("objective was non-finite at every trial point")
    return best_x, float(best_f), int(iters)
