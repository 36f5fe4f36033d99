"""Command-line front end.

Subcommands::

    scvx-nlmesh run --config FILE [overrides]      single case
    scvx-nlmesh sweep --config FILE [--workers N]  node-count / strategy sweep
    scvx-nlmesh plotdata RUN_DIR                   plot tables for a finished run

Exit codes: 0 converged, 2 not converged, 3 configuration error, 4 internal error.
"""

import argparse
import csv
import json
import logging
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .config import STRATEGIES, load_config, SweepConfig
from .errors import ConfigError
from .outputs import CONFIG_FILE, emit_plotdata, write_run
from .scvx import ADAPTIVE, UNIFORM, run

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_CONFIG = 3
EXIT_INTERNAL = 4

log = logging.getLogger("scvx_nlmesh.cli")

SWEEP_HEADER = ["nodes [-]", "strategy [-]", "mesh [-]", "nl_index [bool]", "repetition [-]",
                "converged [bool]", "iterations [-]", "accepted_iterations [-]",
                "final_mass [kg]", "propellant [kg]", "max_defect [nd]", "message [-]"]


def _node_count(text):
    k = int(text)
    if k < 2:
        raise argparse.ArgumentTypeError("need at least 2 nodes")
    return k


def _positive_int(text):
    k = int(text)
    if k < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return k


def _add_overrides(p):
    p.add_argument("--config", required=True, help="case config (YAML)")
    p.add_argument("--nodes", type=_node_count, help="number of nodes K")
    p.add_argument("--mesh", choices=[UNIFORM, ADAPTIVE])
    p.add_argument("--nl-index", choices=["on", "off"])
    p.add_argument("--max-iters", type=_positive_int)
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="scvx-nlmesh",
        description="Minimum-fuel low-thrust trajectories by adaptive-mesh successive "
                    "convexification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="solve one case")
    _add_overrides(p_run)
    p_run.add_argument("--no-plotdata", action="store_true",
                       help="skip writing the plot-data tables")

    p_sweep = sub.add_parser("sweep", help="sweep node counts and strategies")
    _add_overrides(p_sweep)
    p_sweep.add_argument("--workers", type=_positive_int, default=1)

    p_plot = sub.add_parser("plotdata", help="write plot tables for a finished run")
    p_plot.add_argument("run_dir")
    p_plot.add_argument("--out-dir")
    return parser


def _apply(cfg, args):
    nl = None if args.nl_index is None else args.nl_index == "on"
    return cfg.with_overrides(nodes=args.nodes, mesh=args.mesh, nl_index=nl,
                              max_iters=args.max_iters, out_dir=args.out_dir, seed=args.seed)


def run_case(cfg, plotdata=True):
    """Solve one configured case and write its artifacts; returns the summary dict."""
    problem = cfg.problem()
    result = run(problem, cfg.options(), cfg.nodes)
    summary = write_run(cfg.out_dir, problem, result, cfg)
    if plotdata:
        emit_plotdata(cfg.out_dir, problem)
    return summary


def _cell_dir(root, nodes, strategy, rep):
    mesh, nl = strategy.split("/")
    return os.path.join(root, "cells", f"K{nodes:04d}_{mesh}_{nl}_r{rep}")


def _run_cell(args):
    cfg, nodes, strategy, rep, root = args
    cell = cfg.cell(nodes, strategy)
    cell = cell.with_overrides(out_dir=_cell_dir(root, nodes, strategy, rep))
    try:
        s = run_case(cell, plotdata=False)
        return (nodes, strategy, rep, s["converged"], s["iterations"], s["accepted_iterations"],
                s["final_mass_kg"], s["propellant_kg"], s["max_defect"], s["message"])
    except Exception as exc:  # noqa: BLE001 - a failed cell must not stop the sweep
        log.error("cell K=%d %s failed: %s", nodes, strategy, exc)
        return (nodes, strategy, rep, False, 0, 0, float("nan"), float("nan"), float("nan"),
                f"error: {exc}")


def run_sweep(cfg, workers=1):
    """Run every (K, strategy, repetition) cell and write ``sweep.csv``; returns the rows."""
    root = cfg.out_dir
    os.makedirs(root, exist_ok=True)
    jobs = [(cfg, k, strat, rep, root) for k in cfg.node_list for strat in cfg.strategies
            for rep in range(cfg.repetitions)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(j) for j in jobs]
    with open(os.path.join(root, "sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for nodes, strat, rep, conv, its, acc, mf, prop, dmax, msg in rows:
            mesh, nl = strat.split("/")
            w.writerow([nodes, strat, mesh, int(nl == "nl-on"), rep, int(conv), its, acc,
                        repr(float(mf)), repr(float(prop)), repr(float(dmax)), msg])
    return rows


def _configure_logging(verbosity):
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        if args.command == "plotdata":
            cfg = load_config(os.path.join(args.run_dir, CONFIG_FILE))
            paths = emit_plotdata(args.run_dir, cfg.problem(), args.out_dir)
            print("\n".join(paths))
            return EXIT_OK
        cfg = _apply(load_config(args.config), args)
        if args.command == "run":
            if isinstance(cfg, SweepConfig):
                raise ConfigError(f"{args.config}: sweep config given to 'run'; use 'sweep'")
            summary = run_case(cfg, plotdata=not args.no_plotdata)
            print(json.dumps(summary, indent=2))
            return EXIT_OK if summary["converged"] else EXIT_NOT_CONVERGED
        if not isinstance(cfg, SweepConfig):
            raise ConfigError(f"{args.config}: no 'sweep' section (expected strategies from "
                              f"{STRATEGIES})")
        rows = run_sweep(cfg, args.workers)
        print(os.path.join(cfg.out_dir, "sweep.csv"))
        return EXIT_OK if all(r[3] for r in rows) else EXIT_NOT_CONVERGED
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if args.command == "plotdata" else EXIT_INTERNAL
    except Exception:  # noqa: BLE001 - map any crash to the internal-error exit code
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
