"""Command line entry point: ``elasticsurf register ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .driver import RunConfig, emit_outputs, run_registration
from .grid import SurfaceFileError, load_surface
from .zoo import GammaSpec, SurfaceSpec, generate, perturb


def _surface_arg(parser, n: int):
    grp = parser.add_mutually_exclusive_group(required=True)
    grp.add_argument(f"--in{n}", metavar="PATH", help=f"surface file for surface {n}")
    grp.add_argument(f"--gen{n}", metavar="KIND:K", help=f"generated surface {n}, e.g. sine1:2, cossin2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elasticsurf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    reg = sub.add_parser("register", help="register surface 2 onto surface 1")
    _surface_arg(reg, 1)
    _surface_arg(reg, 2)
    reg.add_argument("--gamma", metavar="A,B", help="perturb surface 2 by (r^A, t^B)")
    reg.add_argument("--grid", type=int, nargs=2, default=(101, 101), metavar=("M", "N"),
                     help="grid size for generated surfaces (default 101 101)")
    reg.add_argument("--init", choices=["dp", "identity"], default="dp")
    reg.add_argument("--identity-rotation", choices=["identity", "optimal"], default="identity",
                     help="starting rotation for --init identity")
    reg.add_argument("--kl", type=int, default=5)
    reg.add_argument("--grad-tol", type=float, default=1e-4)
    reg.add_argument("--eps-zero", type=float, default=1e-4)
    reg.add_argument("--eps-progress", type=float, default=1e-4)
    reg.add_argument("--max-inner", type=int, default=200)
    reg.add_argument("--max-outer", type=int, default=10)
    reg.add_argument("--step-safety", type=float, default=0.9)
    reg.add_argument("--out", metavar="JSON", help="write the result as JSON")
    reg.add_argument("--boundary-csv", metavar="PATH", help="write boundary polylines as CSV")
    reg.add_argument("--dump-h", metavar="PATH", help="write the reparametrization grid")
    return parser


def _load(args, n: int, M: int, N: int):
    path = getattr(args, f"in{n}")
    if path is not None:
        return load_surface(path)
    return generate(SurfaceSpec.parse(getattr(args, f"gen{n}")), M, N)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        M, N = args.grid
        s1 = _load(args, 1, M, N)
        s2 = _load(args, 2, M, N)
        if args.gamma:
            s2 = perturb(s2, GammaSpec.parse(args.gamma))
        cfg = RunConfig(
            init_mode=args.init,
            identity_rotation=args.identity_rotation,
            KL=args.kl,
            eps_zero=args.eps_zero,
            eps_progress=args.eps_progress,
            grad_tol=args.grad_tol,
            max_inner_iters=args.max_inner,
            max_outer_rounds=args.max_outer,
            step_safety=args.step_safety,
        )
        res = run_registration(s1, s2, cfg)
        emit_outputs(res, args.out, args.boundary_csv, args.dump_h)
    except (OSError, SurfaceFileError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"elasticsurf: error: {exc}", file=sys.stderr)
        return 1
    if args.out is None:
        json.dump(res.to_json_dict(), sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        print(f"squared distance {res.squared_distance:.6g} "
              f"({res.inner_iterations} steps, {res.outer_rounds} rounds, {res.wall_time:.1f} s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
