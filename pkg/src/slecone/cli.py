"""Command-line front end.

Exit codes: 0 success, 2 invalid parameters, 3 numerical failure, 4
malformed input file (the message carries a JSON pointer).  Each command
that writes a file also writes ``<out>.manifest.json``; ``slecone rerun
MANIFEST`` repeats the run and reproduces the output byte for byte.
Ensemble members run on ``SLECONE_THREADS`` threads (default 1).
"""

import argparse
import datetime
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import io
from .analysis import box_dimension, densify, as_xy, bbox_size, range_equivalence_stat
from .lightcone import (build_ln, detect_pockets, exploration_path, lightcone_via_sle, matched_lightcone,
                        order_pockets)
from .loewner import LoewnerError
from .rng import make_rng
from .sle import classify_phase, params, sample_sle_trace

EXIT_PARAMS, EXIT_NUMERIC, EXIT_INPUT = 2, 3, 4


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _threads():
    try:
        return max(1, int(os.environ.get("SLECONE_THREADS", "1")))
    except ValueError:
        raise CliError(EXIT_PARAMS, "SLECONE_THREADS must be an integer") from None


def _emit(out, text):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        io.atomic_write(out, text)


def _manifest(args, command, params_, seed):
    if args.out in (None, "-"):
        return
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    m = io.RunManifest(command, params_, int(seed), timestamp=stamp)
    io.atomic_write(io.manifest_path(args.out), io.dumps(m.to_doc()))


def _seed(v):
    s = int(v)
    if not 0 <= s < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return s


# ---------------------------------------------------------------- commands


def cmd_classify(args):
    p = params(args.kappa, args.rho)
    info = classify_phase(args.kappa, args.rho)
    doc = {"kappa": args.kappa, "rho": args.rho, "phase": info.phase.value, "delta": p.delta, "chi": p.chi,
           "lambda": p.lambda_, "lambda_prime": p.lambda_prime, "theta_rho": p.theta_rho, "theta_c": p.theta_c,
           "dimension": info.dimension, "simple": info.simple, "reversible": info.reversible}
    _emit(args.out, io.dumps(io._clean(doc)))
    _manifest(args, "classify", {"kappa": args.kappa, "rho": args.rho}, 0)


def _simulate_one(kappa, rho, T, dt, seed, index, side, grid):
    rng = make_rng(seed, index)
    return sample_sle_trace(kappa, rho, T, dt, rng, side=side, grid=grid)


def cmd_simulate(args):
    if args.steps <= 0 or not args.dt > 0:
        raise CliError(EXIT_PARAMS, "steps and dt must be positive")
    T = args.steps * args.dt
    n = args.ensemble
    if n < 1:
        raise CliError(EXIT_PARAMS, "ensemble size must be at least 1")
    jobs = [(args.kappa, args.rho, T, args.dt, args.seed, i, args.side, args.grid) for i in range(n)]
    with ThreadPoolExecutor(_threads()) as ex:
        traces = list(ex.map(lambda j: _simulate_one(*j), jobs))
    common = {"kappa": args.kappa, "rho": args.rho, "dt": args.dt, "seed": args.seed, "side": args.side,
              "grid": args.grid}
    if n == 1 and not args.force_ensemble:
        doc = io.trace_doc(traces[0], **common)
    else:
        doc = io._clean(dict(common, schema=io.ENSEMBLE_SCHEMA,
                             traces=[io.trace_doc(t, index=i) for i, t in enumerate(traces)]))
    _emit(args.out, io.dumps(doc))
    _manifest(args, "simulate", {k: getattr(args, k) for k in
                                 ("kappa", "rho", "steps", "dt", "side", "grid", "ensemble", "force_ensemble")},
              args.seed)


def cmd_lightcone(args):
    if args.steps <= 0 or not args.dt > 0:
        raise CliError(EXIT_PARAMS, "steps and dt must be positive")
    T = args.steps * args.dt
    if args.route == "direct":
        if args.rho is None:
            raise CliError(EXIT_PARAMS, "the direct route needs --rho")
        obj = lightcone_via_sle(args.kappa, args.rho, T, args.dt, make_rng(args.seed, 0))
    elif args.rho is not None:
        obj = matched_lightcone(args.kappa, args.rho, args.n_switches, T, args.dt, args.seed,
                                switch_grid=args.switch_grid, branching=args.branching,
                                segment_budget=args.segment_budget)
    else:
        if args.theta1 is None or args.theta2 is None:
            raise CliError(EXIT_PARAMS, "the constructive route needs --theta1 and --theta2 (or --rho)")
        obj = build_ln(args.kappa, args.theta1, args.theta2, args.n_switches, T, args.dt, args.seed,
                       switch_grid=args.switch_grid, branching=args.branching, segment_budget=args.segment_budget)
    pockets = order_pockets(detect_pockets(obj, args.grid_eps)) if not args.no_pockets else []
    extra = {"kappa": args.kappa, "seed": args.seed, "dt": args.dt}
    if pockets:
        path = exploration_path(pockets)
        extra["exploration_gaps"] = [list(g) for g in path.meta["gaps"]]
    _emit(args.out, io.dumps(io.lightcone_doc(obj, pockets, **extra)))
    _manifest(args, "lightcone", {k: getattr(args, k) for k in
                                  ("kappa", "rho", "theta1", "theta2", "n_switches", "steps", "dt", "route",
                                   "grid_eps", "switch_grid", "branching", "segment_budget", "no_pockets")},
              args.seed)


def cmd_dim(args):
    traces = io.load_traces(args.input)
    pts = np.concatenate([t.points for t in traces]) if traces else np.empty(0, complex)
    if pts.size < 2:
        raise CliError(EXIT_PARAMS, "input has fewer than two points")
    size = bbox_size(as_xy(pts))
    lo = args.scale_min if args.scale_min is not None else size / 512
    hi = args.scale_max if args.scale_max is not None else size / 16
    dense = np.vstack([densify(t.points, lo / 4) for t in traces if len(t) > 0])
    est = box_dimension(dense, lo, hi, args.n_scales)
    doc = {"value": est.value, "stderr": est.stderr, "r_squared": est.r_squared,
           "scales_used": est.scales_used, "counts": est.counts, "input": os.path.basename(args.input)}
    _emit(args.out, io.dumps(io._clean(doc)))
    if args.csv:
        io.atomic_write(args.csv, io.dimension_csv(est))
    _manifest(args, "dim", {"input": args.input, "scale_min": args.scale_min, "scale_max": args.scale_max,
                            "n_scales": args.n_scales, "csv": args.csv}, 0)


def cmd_compare(args):
    a = io.load_traces(args.a)
    b = io.load_traces(args.b)
    rep = range_equivalence_stat(a, b, alpha=args.alpha, eps=args.eps)
    _emit(args.out, io.dumps(io._clean(rep.to_dict())))
    _manifest(args, "compare", {"a": args.a, "b": args.b, "alpha": args.alpha, "eps": args.eps}, 0)


def cmd_render(args):
    doc = io.read_json(args.input)
    traces = io.load_traces(args.input)
    pockets = io.load_pockets(doc) if isinstance(doc, dict) and doc.get("schema") == io.LIGHTCONE_SCHEMA else []
    _emit(args.out, io.render_svg(traces, pockets, width=args.width))
    _manifest(args, "render", {"input": args.input, "width": args.width}, 0)


def cmd_rerun(args):
    m = io.RunManifest.from_doc(io.read_json(args.manifest))
    if m.command not in COMMANDS or m.command == "rerun":
        raise io.MalformedInput("/command", f"unknown command {m.command!r}")
    argv = [m.command]
    for k, v in m.parameters.items():
        if v is None or v is False:
            continue
        flag = "--" + k.replace("_", "-")
        if k in POSITIONAL.get(m.command, ()):
            argv.append(str(v))
        elif v is True:
            argv.append(flag)
        else:
            argv += [flag, repr(v) if isinstance(v, float) else str(v)]
    if m.command in ("simulate", "lightcone"):
        argv += ["--seed", str(m.seed)]
    argv += ["--out", args.out]
    return run(argv)


COMMANDS = {"classify": cmd_classify, "simulate": cmd_simulate, "lightcone": cmd_lightcone, "dim": cmd_dim,
            "compare": cmd_compare, "render": cmd_render, "rerun": cmd_rerun}
POSITIONAL = {"compare": ("a", "b")}


def build_parser():
    ap = argparse.ArgumentParser(prog="slecone", description="SLE_kappa(rho) light cones: simulation and analysis")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="phase and derived constants of (kappa, rho)")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="sample SLE_kappa(rho) traces")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--steps", type=int, default=10000)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--side", choices=("right", "left"), default="right")
    p.add_argument("--grid", choices=("uniform", "adaptive"), default="uniform")
    p.add_argument("--ensemble", type=int, default=1, help="number of traces (sub-streams 0..n-1)")
    p.add_argument("--force-ensemble", action="store_true", help="write an ensemble document even for n=1")
    p.add_argument("--out")

    p = sub.add_parser("lightcone", help="constructive or direct light cone with pockets")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--rho", type=float, help="match the SLE_kappa(rho) light cone")
    p.add_argument("--theta1", type=float)
    p.add_argument("--theta2", type=float)
    p.add_argument("--n-switches", type=int, default=1)
    p.add_argument("--steps", type=int, default=10000)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--route", choices=("constructive", "direct"), default="constructive")
    p.add_argument("--grid-eps", type=float)
    p.add_argument("--switch-grid", type=int, default=8)
    p.add_argument("--branching", type=int, default=2)
    p.add_argument("--segment-budget", type=int, default=256)
    p.add_argument("--no-pockets", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser("dim", help="box-counting dimension of a trace, ensemble or light cone file")
    p.add_argument("--input", required=True)
    p.add_argument("--scale-min", type=float)
    p.add_argument("--scale-max", type=float)
    p.add_argument("--n-scales", type=int, default=12)
    p.add_argument("--csv", help="also write the (scale, count) table as CSV")
    p.add_argument("--out")

    p = sub.add_parser("compare", help="range-equivalence KS report for two ensembles")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--out")

    p = sub.add_parser("render", help="SVG drawing of a trace, ensemble or light cone file")
    p.add_argument("--input", required=True)
    p.add_argument("--width", type=int, default=800)
    p.add_argument("--out")

    p = sub.add_parser("rerun", help="repeat the run recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    return ap


def run(argv):
    ap = build_parser()
    args = ap.parse_args(argv)
    return COMMANDS[args.command](args) or 0


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return run(argv)
    except SystemExit as exc:
        # argparse usage errors already exit with 2
        return exc.code if isinstance(exc.code, int) else EXIT_PARAMS
    except CliError as exc:
        print(f"slecone: {exc}", file=sys.stderr)
        return exc.code
    except io.MalformedInput as exc:
        print(f"slecone: malformed input at {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"slecone: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (LoewnerError, FloatingPointError) as exc:
        print(f"slecone: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"slecone: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_PARAMS


if __name__ == "__main__":
    sys.exit(main())
