"""Command line interface: ``mavr solve | generate | experiment``.

Exit status is 0 on success, 1 on usage errors and 2 on runtime failures.
"""
import argparse
import csv
import json
import logging
import math
import sys

import numpy as np

from . import __version__
from .data import P_PRESETS, generate_3circles, generate_blobs, preset
from .graph import KernelSpec, build_laplacian, build_similarity, read_csv, write_csv
from .harness import ExperimentSpec, run_experiment, write_results
from .predict import predict_multiclass
from .solver import EigenCache, LabelMatrix, SolverConfig, solve


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(v):
    return format(float(v), ".17g")


def _read_matrix(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        return np.array([[float(f) for f in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise UsageError(f"{path}: not a numeric matrix ({exc})") from None


def _add_graph_flags(p):
    p.add_argument("--kernel", choices=("gaussian", "local_scaling", "cosine_knn"), help="similarity kernel")
    p.add_argument("--sigma", type=float, help="gaussian kernel width")
    p.add_argument("--k", type=int, help="nearest neighbours for local_scaling / cosine_knn")
    p.add_argument("--laplacian", choices=("normalized", "unnormalized"), help="graph Laplacian")


def build_parser():
    parser = _Parser(prog="mavr", description="Multi-class approximate volume regularization.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one problem and write H, rho and predictions")
    src = s.add_argument_group("input (either --data, or --q-matrix with --y-matrix)")
    src.add_argument("--data", help="dataset CSV; empty label fields mark unlabeled points")
    src.add_argument("--q-matrix", help="CSV with the n x n matrix Q")
    src.add_argument("--y-matrix", help="CSV with the n x c label matrix Y")
    src.add_argument("--p-matrix", help="CSV with the c x c matrix P (default identity)")
    s.add_argument("--preset", choices=sorted(P_PRESETS), help="use a built-in P1..P6 for P")
    s.add_argument("--gamma", type=float, default=99.0)
    s.add_argument("--tau", type=float, help="norm of H (default sqrt of the number of labeled rows)")
    s.add_argument("--mode", choices=("constrained", "unconstrained"), default="constrained")
    s.add_argument("--balance-gamma", type=float, default=0.0)
    _add_graph_flags(s)
    s.add_argument("--out", help="output file (default: summary on stdout only)")
    s.add_argument("--format", choices=("csv", "json"), default="csv")

    g = sub.add_parser("generate", help="write a synthetic dataset as CSV")
    g.add_argument("generator", choices=("3circles", "blobs"))
    g.add_argument("--n", type=int, default=300, help="3circles: number of points")
    g.add_argument("--sigma-eps", type=float, default=0.5, help="3circles: noise level")
    g.add_argument("--centers", help="blobs: centers as 'x1,y1;x2,y2;...'")
    g.add_argument("--counts", help="blobs: points per center as 'n1,n2,...'")
    g.add_argument("--sigma", type=float, default=1.0, help="blobs: cluster spread")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    e = sub.add_parser("experiment", help="run an experiment described by a JSON file")
    e.add_argument("spec", help="ExperimentSpec JSON")
    e.add_argument("--gamma", type=float, nargs="+")
    e.add_argument("--tau", type=float, nargs="+")
    e.add_argument("--preset", choices=sorted(P_PRESETS))
    _add_graph_flags(e)
    e.add_argument("--trials", type=int)
    e.add_argument("--seed", type=int, help="base seed")
    e.add_argument("--out", required=True)
    e.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _kernel_from_args(args):
    kind = args.kernel or "gaussian"
    if kind == "gaussian":
        return KernelSpec(kind, sigma=args.sigma if args.sigma is not None else 0.5)
    return KernelSpec(kind, k=args.k if args.k is not None else 7)


def _cmd_solve(args):
    if args.data:
        if args.q_matrix or args.y_matrix:
            raise UsageError("give either --data or --q-matrix/--y-matrix, not both")
        data = read_csv(args.data, labels=True)
        c = data.n_classes
        if c < 1:
            raise UsageError("the dataset has no labeled points")
        Q = build_laplacian(build_similarity(data, _kernel_from_args(args)), args.laplacian or "normalized")
        idx = np.flatnonzero(data.labels > 0)
        Y = LabelMatrix.from_classes(data.n, c, idx, data.labels[idx]).entries
    elif args.q_matrix and args.y_matrix:
        Q, Y = _read_matrix(args.q_matrix), _read_matrix(args.y_matrix)
        if Y.ndim == 1:
            Y = Y[:, None]
    else:
        raise UsageError("solve needs --data, or both --q-matrix and --y-matrix")

    c = Y.shape[1]
    if args.preset and args.p_matrix:
        raise UsageError("give at most one of --preset and --p-matrix")
    if args.preset:
        P = preset(args.preset)
    elif args.p_matrix:
        P = _read_matrix(args.p_matrix)
    else:
        P = np.eye(c)

    labeled_rows = int(np.sum(np.any(Y != 0, axis=1)))
    tau = args.tau if args.tau is not None else math.sqrt(max(labeled_rows, 1))
    cfg = SolverConfig(args.gamma, tau, args.mode, args.balance_gamma)
    sol = solve(P, Q, Y, cfg, cache=EigenCache())
    pred = predict_multiclass(sol.H).labels if c > 1 else np.where(sol.H[:, 0] >= 0, 1, -1)

    print(f"rho = {_fmt(sol.rho)}")
    print(f"k0 = {sol.k0}  iterations = {sol.iterations}  g_residual = {_fmt(sol.g_residual)}")
    if sol.H.size <= 50:
        for row in sol.H:
            print("H = " + " ".join(_fmt(v) for v in row))

    if args.out:
        if args.format == "csv":
            with open(args.out, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow([f"h{j + 1}" for j in range(c)] + ["prediction", "rho"])
                for i, row in enumerate(sol.H):
                    w.writerow([_fmt(v) for v in row] + [int(pred[i]), _fmt(sol.rho) if i == 0 else ""])
        else:
            rows = ",\n".join("    [" + ", ".join(_fmt(v) for v in row) + "]" for row in sol.H)
            text = (
                "{\n"
                f'  "rho": {_fmt(sol.rho)},\n'
                f'  "k0": {sol.k0},\n'
                f'  "iterations": {sol.iterations},\n'
                f'  "g_residual": {_fmt(sol.g_residual)},\n'
                f'  "H": [\n{rows}\n  ],\n'
                f'  "predictions": {json.dumps([int(p) for p in pred])}\n'
                "}\n"
            )
            with open(args.out, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)
    return 0


def _parse_list(text, kind, what):
    try:
        return [kind(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse {what}: {text!r}") from None


def _cmd_generate(args):
    if args.generator == "3circles":
        data = generate_3circles(args.n, args.sigma_eps, args.seed)
    else:
        if not args.centers or not args.counts:
            raise UsageError("blobs needs --centers and --counts")
        centers = [_parse_list(c, float, "--centers") for c in args.centers.split(";")]
        data = generate_blobs(centers, _parse_list(args.counts, int, "--counts"), args.sigma, args.seed)
    write_csv(data, args.out)
    print(f"wrote {data.n} points to {args.out}")
    return 0


def _cmd_experiment(args):
    try:
        spec = ExperimentSpec.from_json(args.spec)
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        raise UsageError(f"cannot read experiment spec: {exc}") from None
    if args.gamma:
        spec.gamma = list(args.gamma)
    if args.tau:
        spec.tau = list(args.tau)
    if args.preset:
        spec.P = args.preset
    if args.kernel:
        spec.kernel = {"kind": args.kernel}
    if args.sigma is not None:
        spec.kernel["sigma"] = args.sigma
        spec.kernel.pop("sigma_scale", None)
    if args.k is not None:
        spec.kernel["k"] = args.k
    if args.laplacian:
        spec.laplacian = args.laplacian
    if args.trials is not None:
        spec.trials = args.trials
    if args.seed is not None:
        spec.base_seed = args.seed
    spec = ExperimentSpec.from_dict(vars(spec))
    result = run_experiment(spec)
    write_results(result, args.out, args.format)
    for r in result.records:
        print(
            f"{r.method:20s} {r.factor_name}={_fmt(r.factor_value)} gamma={_fmt(r.gamma)} "
            f"tau={_fmt(r.tau)} error={r.mean_error:.4f} +- {r.std_error:.4f} "
            f"({r.trials} trials, {r.failures} failures)"
        )
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"solve": _cmd_solve, "generate": _cmd_generate, "experiment": _cmd_experiment}[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"mavr {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, RuntimeError, OSError, np.linalg.LinAlgError) as exc:
        print(f"mavr {args.command}: failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
