"""Command-line front end for mesh sampling, training, and analysis.

Structured data travels as JSON, grids and series as CSV; every pipeline is
reproducible from the command sequence and the seeds alone. Exit code is 0
on success, nonzero with a message on stderr otherwise.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import analysis, decompose, train
from .core import gram_schmidt_haar, load_matrix, save_matrix, seeded_rng
from .mesh import (BeamsplitterErrors, load_errors, load_mesh, mesh_unitary,
                   permuting_spec, propagate_fields, rectangular_spec,
                   save_errors, save_mesh, triangular_spec)
from .haar import haar_initialize, uniform_initialize

__all__ = ["main"]


def _build_parser():
    p = argparse.ArgumentParser(prog="meshopt",
                                description="Universal MZI mesh simulator and trainer")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample-haar", help="sample a Haar-random unitary")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("init", help="build and initialize a mesh")
    s.add_argument("--arch", choices=["rm", "rrm", "prm", "triangular"],
                   required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--extra-layers", type=int, default=None,
                   help="extra tunable columns (rrm only)")
    s.add_argument("--order", default=None,
                   help="comma-separated permutation-stage order (prm only)")
    s.add_argument("--init", choices=["haar", "uniform"], required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("unitary", help="matrix implemented by a mesh file")
    s.add_argument("--mesh", required=True)
    s.add_argument("--errors", default=None)
    s.add_argument("--out", required=True)

    s = sub.add_parser("decompose", help="rectangular decomposition of a unitary")
    s.add_argument("--target", required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("train", help="train a mesh toward a target unitary")
    s.add_argument("--mesh", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--trace-out", required=True)

    s = sub.add_parser("bandsize", help="eta-bandsize of a matrix")
    s.add_argument("--matrix", required=True)
    s.add_argument("--eta", type=float, default=analysis.DEFAULT_ETA)

    s = sub.add_parser("propagate", help="field magnitudes per layer")
    s.add_argument("--mesh", required=True)
    s.add_argument("--input", type=int, required=True,
                   help="input port, 1-based")
    s.add_argument("--out", required=True)

    s = sub.add_parser("checkerboard", help="per-MZI quantity grid")
    s.add_argument("--mesh", required=True)
    s.add_argument("--quantity", choices=list(analysis.CHECKERBOARD_QUANTITIES),
                   required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("errors", help="beamsplitter error utilities")
    esub = s.add_subparsers(dest="errors_command", required=True)
    e = esub.add_parser("sample", help="draw Gaussian split-ratio errors")
    e.add_argument("--mesh", required=True)
    e.add_argument("--sigma", type=float, required=True)
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--out", required=True)

    return p


def _cmd_init(args):
    if args.arch == "rm":
        spec = rectangular_spec(args.n, args.n)
    elif args.arch == "rrm":
        if args.extra_layers is None:
            raise ValueError("rrm needs --extra-layers")
        spec = rectangular_spec(args.n, args.n + args.extra_layers)
    elif args.arch == "prm":
        order = None
        if args.order:
            order = tuple(int(k) for k in args.order.split(","))
        spec = permuting_spec(args.n, order)
    else:
        spec = triangular_spec(args.n)
    rng = seeded_rng(args.seed)
    init = haar_initialize if args.init == "haar" else uniform_initialize
    save_mesh(args.out, spec, init(spec, rng))


def _cmd_train(args):
    spec, _ = load_mesh(args.mesh)
    target = load_matrix(args.target)
    with open(args.config) as fh:
        config = train.TrainConfig.from_json(json.load(fh))
    trace = train.train_unitary(spec, target, config)
    os.makedirs(args.trace_out, exist_ok=True)
    trace.save_costs_csv(os.path.join(args.trace_out, "costs.csv"))
    save_mesh(os.path.join(args.trace_out, "final_params.json"),
              spec, trace.final_params)
    save_matrix(os.path.join(args.trace_out, "error_map.json"),
                trace.final_error_map.astype(np.complex128))
    print(f"final test cost: {trace.final_test_cost:.6e}")


def _run(args):
    if args.command == "sample-haar":
        save_matrix(args.out, gram_schmidt_haar(args.n, seeded_rng(args.seed)))
    elif args.command == "init":
        _cmd_init(args)
    elif args.command == "unitary":
        spec, params = load_mesh(args.mesh)
        if params is None:
            raise ValueError(f"mesh file {args.mesh} carries no phases")
        errors = load_errors(args.errors) if args.errors else None
        save_matrix(args.out, mesh_unitary(spec, params, errors))
    elif args.command == "decompose":
        target = load_matrix(args.target)
        params = decompose.clements_decompose(target)
        save_mesh(args.out, rectangular_spec(target.shape[0]), params)
    elif args.command == "train":
        _cmd_train(args)
    elif args.command == "bandsize":
        b = analysis.bandsize(load_matrix(args.matrix), args.eta)
        print(json.dumps({"global": b.global_count,
                          "per_row_mean": b.per_row_mean}))
    elif args.command == "propagate":
        spec, params = load_mesh(args.mesh)
        if params is None:
            raise ValueError(f"mesh file {args.mesh} carries no phases")
        analysis.save_fields_csv(args.out,
                                 propagate_fields(spec, params, args.input))
    elif args.command == "checkerboard":
        spec, params = load_mesh(args.mesh)
        grid = analysis.checkerboard(spec, params, args.quantity)
        analysis.save_grid_csv(args.out, grid)
    elif args.command == "errors":
        spec, _ = load_mesh(args.mesh)
        errors = BeamsplitterErrors.gaussian(spec, args.sigma,
                                             seeded_rng(args.seed))
        save_errors(args.out, errors)


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        _run(args)
    except (ValueError, IndexError, OSError, KeyError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
