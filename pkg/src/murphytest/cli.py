"""Command line interface.

Subcommands: ``test``, ``murphy``, ``dm``, ``var``, ``simulate`` and
``size-power``.  Exit status is 0 on success, 2 for invalid arguments and
3 for data problems; errors print one line starting with ``error:``.
The ``MT_SEED`` environment variable supplies the seed when ``--seed`` is
not given.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys

import numpy as np

from murphytest.bootstrap import BootstrapConfig, recentered_bootstrap_test
from murphytest.dm import dm_test
from murphytest.engine import GridMode, build_theta_grid
from murphytest.errors import DataError, InvalidArgumentError, MurphyTestError, ValidationError
from murphytest.losses import FunctionalLevel, murphy_curve
from murphytest.panel import PanelSlice, read_panel_csv, read_series_csv, write_report_json
from murphytest.risk import rolling_var_backtest
from murphytest.simulate import DESIGNS, run_rejection_study, size_power_curve

EXIT_OK, EXIT_VALIDATION, EXIT_DATA = 0, 2, 3
_DEFAULT_THREADS = os.cpu_count() or 1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _levels(text: str):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise InvalidArgumentError(f"cannot parse levels {text!r}") from None
    if not vals:
        raise InvalidArgumentError("no significance levels given")
    return vals


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MT_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise InvalidArgumentError(f"MT_SEED must be an integer, got {env!r}") from None


def _read(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _emit(args, data):
    if isinstance(data, str):
        data = data.encode("utf-8")
    if getattr(args, "output", None):
        with open(args.output, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _panel_slice(args):
    panel = read_panel_csv(_read(args.input), args.realized, [args.benchmark, *args.competitor])
    return PanelSlice(panel, args.benchmark, tuple(args.competitor), all_pairs=getattr(args, "all_pairs", False))


def _config(args, seed):
    if args.mean_block_len is not None:
        return BootstrapConfig.with_mean_block_length(args.mean_block_len, M=args.bootstrap_m, seed=seed,
                                                      levels=_levels(args.levels))
    return BootstrapConfig(M=args.bootstrap_m, p=args.block_p, seed=seed, levels=_levels(args.levels))


def cmd_test(args):
    seed = _seed(args)
    level = FunctionalLevel(args.kind, args.alpha)
    cfg = _config(args, seed)
    sl = _panel_slice(args)
    grid = build_theta_grid(sl, GridMode.parse(args.grid, seed=seed))
    report = recentered_bootstrap_test(sl, level, grid, cfg, threads=args.threads)
    doc = {"test": report.to_dict()}
    if args.with_dm:
        doc["dm"] = [dm_test(sl, args.with_dm, args.alpha, pair=pr).to_dict() for pr in sl.pairs]
    _emit(args, write_report_json(doc))


def cmd_murphy(args):
    seed = _seed(args)
    level = FunctionalLevel(args.kind, args.alpha)
    sl = _panel_slice(args)
    grid = build_theta_grid(sl, GridMode.parse(args.grid, seed=seed), augment=False)
    names = sl.names
    curve = murphy_curve(level, sl.forecasts, sl.realized, grid.points, names=names)
    cols = [curve.losses[:, i] for i in range(len(names))]
    header = ["theta"] + [f"loss_{n}" for n in names]
    for k, l in sl.pairs:
        header.append(f"diff_{names[k]}_{names[l]}")
        cols.append(curve.losses[:, k] - curve.losses[:, l])
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for j, t in enumerate(grid.points.tolist()):
        buf.write(",".join([repr(t)] + [repr(float(c[j])) for c in cols]) + "\n")
    _emit(args, buf.getvalue())


def cmd_dm(args):
    panel = read_panel_csv(_read(args.input), args.realized, [args.benchmark, args.competitor])
    sl = PanelSlice(panel, args.benchmark, (args.competitor,))
    rep = dm_test(sl, args.loss, args.alpha, lag=args.lag)
    _emit(args, write_report_json({"dm": rep.to_dict()}))


_VAR_METHODS = {"sample-quantile": "sample_quantile", "normal": "normal",
                "caviar-sy": "caviar_sy", "caviar-asy": "caviar_asy"}


def cmd_var(args):
    seed = _seed(args)
    returns = read_series_csv(_read(args.input), args.returns)
    rep = rolling_var_backtest(returns, _VAR_METHODS[args.method], args.alpha, args.window,
                               seed=seed, threads=args.threads)
    _emit(args, write_report_json({"backtest": rep.to_dict()}))


def cmd_simulate(args):
    seed = _seed(args)
    reps, M = (1000, 400) if args.full else (args.reps, args.bootstrap_m)
    res = run_rejection_study(args.design, args.setting, args.tp, reps, M, _levels(args.levels),
                              alpha=args.alpha, seed=seed, reverse=args.reverse, with_dm=args.with_dm,
                              threads=args.threads)
    if args.pvalues_out:
        with open(args.pvalues_out, "w", encoding="utf-8") as fh:
            fh.write(res.p_values_csv())
    _emit(args, res.to_csv())


def _pcolumn(path, column):
    rows = list(csv.DictReader(io.StringIO(_read(path).decode("utf-8"))))
    if not rows:
        raise DataError(f"{path} has no data rows")
    if column not in rows[0]:
        raise DataError(f"{path} has no column {column!r}")
    try:
        return np.array([float(r[column]) for r in rows])
    except ValueError:
        raise DataError(f"{path}: non-numeric p-value") from None


def cmd_size_power(args):
    p0 = _pcolumn(args.null, args.column)
    p1 = _pcolumn(args.alt, args.column)
    grid = np.arange(1, args.points + 1) / args.points
    _emit(args, size_power_curve(p0, p1, grid).to_csv())


def _add_panel_args(p, multi=True, alpha_required=True):
    p.add_argument("--input", required=True)
    p.add_argument("--realized", required=True)
    p.add_argument("--benchmark", required=True)
    if multi:
        p.add_argument("--competitor", required=True, nargs="+")
    else:
        p.add_argument("--competitor", required=True)
    if alpha_required:
        p.add_argument("--alpha", type=float, required=True)
    else:
        p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="murphytest", description="Forecast dominance tests over all consistent scores.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("test", help="bootstrap dominance test")
    _add_panel_args(t)
    t.add_argument("--kind", choices=["expectile", "quantile"], required=True)
    t.add_argument("--bootstrap-m", type=int, default=400)
    blk = t.add_mutually_exclusive_group()
    blk.add_argument("--mean-block-len", type=float)
    blk.add_argument("--block-p", type=float)
    t.add_argument("--grid", default="all")
    t.add_argument("--seed", type=int)
    t.add_argument("--levels", default="0.01,0.05,0.1")
    t.add_argument("--with-dm", choices=["squared", "tick"])
    t.add_argument("--all-pairs", action="store_true")
    t.add_argument("--threads", type=int, default=_DEFAULT_THREADS)
    t.set_defaults(func=cmd_test)

    m = sub.add_parser("murphy", help="Murphy-diagram data as CSV")
    _add_panel_args(m)
    m.add_argument("--kind", choices=["expectile", "quantile"], required=True)
    m.add_argument("--grid", default="all")
    m.add_argument("--seed", type=int)
    m.add_argument("--all-pairs", action="store_true")
    m.add_argument("--threads", type=int, default=_DEFAULT_THREADS)
    m.set_defaults(func=cmd_murphy)

    d = sub.add_parser("dm", help="Diebold-Mariano test")
    _add_panel_args(d, multi=False, alpha_required=False)
    d.add_argument("--loss", choices=["squared", "tick"], default="squared")
    d.add_argument("--lag", type=int)
    d.add_argument("--threads", type=int, default=_DEFAULT_THREADS)
    d.set_defaults(func=cmd_dm)

    v = sub.add_parser("var", help="rolling VaR backtest")
    v.add_argument("--input", required=True)
    v.add_argument("--returns", required=True)
    v.add_argument("--method", choices=sorted(_VAR_METHODS), required=True)
    v.add_argument("--alpha", type=float, default=0.05)
    v.add_argument("--window", type=int, default=500)
    v.add_argument("--seed", type=int)
    v.add_argument("--threads", type=int, default=_DEFAULT_THREADS)
    v.add_argument("--output")
    v.set_defaults(func=cmd_var)

    s = sub.add_parser("simulate", help="Monte Carlo rejection study")
    s.add_argument("--design", choices=sorted(DESIGNS), required=True)
    s.add_argument("--setting", required=True)
    s.add_argument("--alpha", type=float, default=0.5)
    s.add_argument("--tp", type=int, default=1000)
    s.add_argument("--reps", type=int, default=200)
    s.add_argument("--bootstrap-m", type=int, default=200)
    s.add_argument("--full", action="store_true", help="1000 replications with M=400")
    s.add_argument("--levels", default="0.01,0.05,0.1")
    s.add_argument("--reverse", action="store_true")
    s.add_argument("--with-dm", choices=["squared", "tick"])
    s.add_argument("--seed", type=int)
    s.add_argument("--threads", type=int, default=_DEFAULT_THREADS)
    s.add_argument("--pvalues-out")
    s.add_argument("--output")
    s.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("size-power", help="size-adjusted power curve from two p-value files")
    sp.add_argument("--null", required=True)
    sp.add_argument("--alt", required=True)
    sp.add_argument("--column", default="p_proposed")
    sp.add_argument("--points", type=int, default=100)
    sp.add_argument("--output")
    sp.set_defaults(func=cmd_size_power)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise InvalidArgumentError("--threads must be at least 1")
        args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DataError, MurphyTestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
