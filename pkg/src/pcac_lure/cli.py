"""Command-line entry point: ``pcac-lure {run,roa,certify,plot}``."""

import argparse
import json
import logging
import sys

import numpy as np

from .certify import circle_certificate, tsypkin_certificate
from .errors import ConfigError, PcacLureError
from .plotting import emit_plots
from .scenario import frozen_closed_loop, load_config, roa_sweep, run_scenario, write_roa
from .sslin import FrequencyGrid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("pcac_lure")


def _overrides(args):
    over = {}
    if getattr(args, "seed", None) is not None:
        over["dither.seed"] = args.seed
    if getattr(args, "steps", None) is not None:
        over["steps"] = args.steps
    if getattr(args, "kc", None) is not None:
        over["control_start"] = args.kc
    if getattr(args, "grid_points", None) is not None:
        over["certify.grid_points"] = args.grid_points
    if getattr(args, "out", None) is not None:
        over["output.dir"] = args.out
    if getattr(args, "cert_every", None) is not None:
        over["certify.every"] = args.cert_every
    if getattr(args, "emit_plots", False):
        over["output.emit_plots"] = True
    return over


def _add_common(p):
    p.add_argument("config", help="scenario YAML file")
    p.add_argument("--seed", type=int, help="gaussian dither seed")
    p.add_argument("--steps", type=int, help="simulation length")
    p.add_argument("--kc", type=int, help="control start step")
    p.add_argument("--grid-points", type=int, help="frequency grid size")
    p.add_argument("--out", help="output directory")
    p.add_argument("--emit-plots", action="store_true", help="render SVG charts")
    p.add_argument("--cert-every", type=int, help="certify every k-th step (0 disables)")


def build_parser():
    ap = argparse.ArgumentParser(prog="pcac-lure", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("run", help="simulate a scenario and write the per-step table"))
    p = sub.add_parser("roa", help="region-of-attraction sweep")
    _add_common(p)
    p.add_argument("--source", choices=("open", "frozen"), help="linear dynamics used for the sweep")
    p.add_argument("--k-star", type=int, help="step at which the closed loop is frozen")
    p = sub.add_parser("certify", help="certificates for one step of a run")
    _add_common(p)
    p.add_argument("--snapshot", type=int, required=True, help="step k to certify")
    p = sub.add_parser("plot", help="render charts from an artifacts directory")
    p.add_argument("artifacts", help="directory containing timeseries.csv")
    p.add_argument("--out", help="directory for the SVG files (default: artifacts dir)")
    return ap


def _cmd_run(args):
    cfg = load_config(args.config, **_overrides(args))
    art = run_scenario(cfg)
    print(json.dumps(art.summary, indent=2, sort_keys=True))
    if cfg.emit_plots:
        for f in emit_plots(cfg.out_dir):
            print(f"wrote {f}")
    return EXIT_OK


def _cmd_roa(args):
    cfg = load_config(args.config, **_overrides(args))
    res = roa_sweep(cfg, source=args.source, k_star=args.k_star)
    path = write_roa(res, cfg.out_dir)
    print(f"{res.source}: {int(res.converged.sum())}/{res.converged.size} converged ({100 * res.fraction:.1f}%)")
    print(f"wrote {path}")
    if cfg.emit_plots:
        for f in emit_plots(cfg.out_dir):
            print(f"wrote {f}")
    return EXIT_OK


def _cmd_certify(args):
    over = _overrides(args)
    over["certify.every"] = 0
    cfg = load_config(args.config, **over)
    k = args.snapshot
    if k < 0:
        raise ConfigError("--snapshot", "must be nonnegative")
    cfg = cfg.with_overrides(steps=max(k, 0), **{"certify.every": 0})
    art = run_scenario(cfg, write=False, keep_snapshots=True)
    sys_cl = frozen_closed_loop(cfg, art.snapshots[k])
    grid = FrequencyGrid(cfg.grid.count)
    cr = circle_certificate(sys_cl, cfg.sector, grid, margin=cfg.margin, refine=cfg.refine)
    tr = tsypkin_certificate(sys_cl, cfg.M, cfg.N, grid, margin=cfg.margin, refine=cfg.refine)
    out = {
        "k": k,
        "circle": {"alpha": cr.alpha, "beta": cr.beta, "cc1": cr.cc1_pass, "cc2": cr.cc2_pass,
                   "argmin_psi": cr.argmin_psi},
        "tsypkin": {"zeta1": tr.zeta1, "zeta2": tr.zeta2, "zeta2_full": tr.zeta2_full,
                    "zeta3_min_eig": tr.zeta3_min_eig, "alpha": tr.alpha, "beta": tr.beta,
                    "tc1": tr.tc1_pass, "tc2": tr.tc2_pass, "tc3": tr.tc3_pass, "N": list(tr.N),
                    "reason": tr.reason},
    }
    if not all(np.isfinite([cr.alpha, tr.alpha])):
        raise PcacLureError(f"non-finite closed loop at step {k}")
    print(json.dumps(out, indent=2, default=float))
    return EXIT_OK


def _cmd_plot(args):
    files = emit_plots(args.artifacts, args.out)
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"run": _cmd_run, "roa": _cmd_roa, "certify": _cmd_certify, "plot": _cmd_plot}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PcacLureError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
