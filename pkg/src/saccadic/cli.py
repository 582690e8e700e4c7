"""``saccade`` command line: synth | fig4 | fig5 | fig6 | scan | grow | plot.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 experiment failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import experiments as ex
from .errors import SaccadeError, ValidationError

log = logging.getLogger("saccadic")


def _csv_floats(s):
    if s.strip() == "":
        return ()
    try:
        return tuple(float(x) for x in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def _csv_ints(s):
    try:
        return tuple(int(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file; flags override it")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--seed", type=int)
    common.add_argument("--width", type=int)
    common.add_argument("--sigmas", type=_csv_floats, metavar="CSV")
    common.add_argument("--u-min", type=int)
    common.add_argument("--u-max", type=int)
    common.add_argument("--u-step", type=int)
    common.add_argument("--theta", type=float)
    common.add_argument("--radius", type=int)
    common.add_argument("--data", metavar="DIR", help="directory of *.signal.json / *.annotations.json pairs")
    common.add_argument("--u", type=int, help="control to grow along (default: maximal characteristic)")
    common.add_argument("--plot-us", type=_csv_ints, metavar="CSV")
    common.add_argument("--depth", type=int, help="growth levels for `grow`")
    common.add_argument("--beats", type=int, help="synthetic beats")
    common.add_argument("--no-plots", action="store_true")

    p = argparse.ArgumentParser(prog="saccade", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write a synthetic ECG and its annotations")
    sub.add_parser("fig4", parents=[common], help="R-peak separability under center jitter")
    sub.add_parser("fig5", parents=[common], help="control scan and characteristic controls")
    sub.add_parser("fig6", parents=[common], help="grow B and one-shot refine it")
    sub.add_parser("scan", parents=[common], help="control scan only")
    sub.add_parser("grow", parents=[common], help="grow the indicator graph")
    pp = sub.add_parser("plot", parents=[common], help="t-SNE scatter of two fragment clouds")
    pp.add_argument("control", metavar="CONTROL.json")
    pp.add_argument("background", metavar="BACKGROUND.json")
    return p


def make_config(args) -> ex.ExperimentConfig:
    cfg = ex.ExperimentConfig.load(args.config) if args.config else ex.ExperimentConfig()
    cfg = cfg.updated(out=args.out, seed=args.seed, width=args.width, sigmas=args.sigmas,
                      u_min=args.u_min, u_max=args.u_max, u_step=args.u_step, theta=args.theta,
                      radius=args.radius, data_dir=args.data, u=args.u, plot_us=args.plot_us,
                      depth=args.depth)
    if args.beats is not None:
        cfg = cfg.updated(synth={**cfg.synth, "beats": args.beats})
    if args.no_plots:
        cfg = cfg.updated(plots=False)
    return cfg


def _setup_logging():
    level = os.environ.get("SACCADE_LOG", "error").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
        if args.command == "synth":
            ex.run_synth(cfg)
        elif args.command == "fig4":
            for r in ex.run_fig4(cfg):
                print(f"sigma={r['sigma']:g} purity={r['nn_purity']:.3f} entropy_drop={r['entropy_drop']:.2f}")
        elif args.command == "fig5":
            _, char = ex.run_fig5(cfg)
            print(f"characteristic={list(char.all)} maximal_right={char.maximal_right} "
                  f"maximal_left={char.maximal_left}")
        elif args.command == "scan":
            char = ex.run_scan(cfg)[3]
            print(f"maximal_right={char.maximal_right} maximal_left={char.maximal_left}")
        elif args.command == "grow":
            g = ex.run_grow(cfg)
            print(f"nodes={len(g.nodes) + len(g.composites)} edges={len(g.edges)}")
        elif args.command == "fig6":
            _, res, u = ex.run_fig6(cfg)
            print(f"u={u} collected={len(res.cloud)} refined_threshold={res.refined.threshold:.4g}")
        elif args.command == "plot":
            ex.run_plot(args.control, args.background, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SaccadeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0
