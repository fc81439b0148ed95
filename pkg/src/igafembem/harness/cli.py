"""Command line: ``solve``, ``convergence``, ``eval`` and ``selftest``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from ..bem import dump_matrix
from ..postprocess import evaluate_representation
from ..solver import stabilization_s
from .config import PROBLEMS, ConfigError, build_config, parse_levels, read_config_file
from .runner import NUMERICAL_ERRORS, quad_config, run_convergence, solve_machine, solve_square
from .state import cauchy_of, load_state, save_state

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2

log = logging.getLogger("igafembem")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError("%s: error: %s" % (self.prog, message))


def _experiment_flags(p, levels: bool):
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--degree", type=int)
    if levels:
        p.add_argument("--levels", type=parse_levels, help="a..b, a..b:step or a,b,c")
    else:
        p.add_argument("--level", type=int, default=4)
    p.add_argument("--n-gauss", dest="n_gauss", type=int)
    p.add_argument("--near-depth", dest="near_depth", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="igafembem", description="Isogeometric FEM-BEM coupling experiments.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("solve", help="single solve with diagnostics")
    _experiment_flags(s, levels=False)
    s.add_argument("--state", help="write the Cauchy data to this JSON file")
    s.add_argument("--dump-matrices", dest="dump", help="directory for dense BEM matrices")

    c = sub.add_parser("convergence", help="refinement sweep writing CSV files")
    _experiment_flags(c, levels=True)
    c.add_argument("--output", help="output directory")
    c.add_argument("--n-points", dest="n_points", type=int)
    c.add_argument("--no-aitken", dest="aitken", action="store_false", default=None,
                   help="machine problem: skip the extra refinements")
    c.add_argument("--plot", action="store_true", default=None,
                   help="also render PNG figures next to the CSV files")

    e = sub.add_parser("eval", help="representation formula at user points")
    e.add_argument("--state", required=True)
    e.add_argument("--points", help="'x,y;x,y;...'")
    e.add_argument("--points-file", dest="points_file", help="text file with two columns")

    t = sub.add_parser("selftest", help="identity and oracle checks")
    t.add_argument("--degree", type=int, default=2)
    t.add_argument("--level", type=int, default=3)
    return parser


def _config(args):
    file_values = read_config_file(args.config) if args.config else {}
    return build_config(file_values, vars(args))


def _cmd_solve(args) -> int:
    config = _config(args)
    level = args.level
    if level < 0:
        raise UsageError("level must be non-negative")
    cfg = quad_config(config)
    if config.problem == "interface-square":
        res, sol = solve_square(config, level)
        mats = res.matrices
        tr = res.u[mats["trace"].global_dofs]
        print("compatibility (f,1)+<phi0,1> = %.3e, radiation constant C = %.6g"
              % (res.compatibility, res.radiation_constant))
        print("stabilization s(u_h, phi_h) = %.12g" % stabilization_s(tr, res.phi, mats["V"],
                                                                   mats["K"], mats["M"]))
    else:
        res, sol = solve_machine(config, level), None
        mats = res.matrices
        print("flux mean <phi_h, 1> = %.3e" % res.flux_mean)
    print("picard iterations: %d" % res.picard.iterations)
    for i, r in enumerate(res.picard.history, 1):
        print("  %3d  %.3e" % (i, r))
    if args.state:
        save_state(args.state, config.problem, config.degree, level, cfg,
                   cauchy_of(config.problem, res, sol))
        print("state written to %s" % args.state)
    if args.dump:
        os.makedirs(args.dump, exist_ok=True)
        for name in ("V", "K", "M"):
            dump_matrix(os.path.join(args.dump, name + ".txt"), mats[name])
        print("matrices written to %s" % args.dump)
    return EXIT_OK


def _cmd_convergence(args) -> int:
    config = _config(args)
    record = run_convergence(config)
    for metric in record.metrics:
        h_inv, err = record.series(metric)
        rate = record.rate(metric) if h_inv.size >= 2 else float("nan")
        print("%s: %d rows, slope %.3f" % (metric, h_inv.size, rate))
        print("  -> %s" % record.csv_path(config.output, metric))
    if config.plot:
        from .plotting import expected_slopes, plot_record
        for path in plot_record(record, config.output, expected_slopes(config.problem, config.degree)):
            print("  -> %s" % path)
    if record.failure:
        print("sweep failed: %s" % record.failure, file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _read_points(args) -> np.ndarray:
    if args.points_file:
        return np.atleast_2d(np.loadtxt(args.points_file, dtype=float))
    if args.points:
        try:
            pts = [[float(v) for v in item.split(",")] for item in args.points.split(";") if item.strip()]
        except ValueError as exc:
            raise UsageError("bad --points value: %s" % exc) from exc
        if not pts or any(len(q) != 2 for q in pts):
            raise UsageError("--points needs pairs 'x,y'")
        return np.array(pts)
    raise UsageError("eval needs --points or --points-file")


def _cmd_eval(args) -> int:
    pts = _read_points(args)
    try:
        cauchy, kappa, cfg = load_state(args.state)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError("cannot read state file: %s" % exc) from exc
    rep = evaluate_representation(pts, cauchy, kappa, cfg)
    for x, v, near in zip(pts, rep.values, rep.near_boundary):
        print("%.10g %.10g %.16e%s" % (x[0], x[1], v, "  near-boundary" if near else ""))
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest
    ok = True
    for name, passed, detail in run_selftest(args.degree, args.level):
        ok &= passed
        print("%-28s %s  %s" % (name, "PASS" if passed else "FAIL", detail))
    return EXIT_OK if ok else EXIT_NUMERICAL


COMMANDS = {"solve": _cmd_solve, "convergence": _cmd_convergence, "eval": _cmd_eval,
            "selftest": _cmd_selftest}


def cli_main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        logging.captureWarnings(True)
        return COMMANDS[args.command](args)
    except SystemExit as exc:      # --help
        return int(exc.code or 0)
    except (UsageError, ConfigError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except NUMERICAL_ERRORS as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERICAL


def main():
    sys.exit(cli_main())
