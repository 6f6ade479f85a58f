"""Command-line interface.

Exit codes: 0 success, 2 invalid configuration or input, 3 numerical
failure (including oracle residuals above tolerance).
"""

import argparse
import sys
import warnings
from pathlib import Path

from . import baselines, core, harness, synthgen
from .core import read_manifest
from .exceptions import (
    CapabilityError,
    CapacityError,
    GenerationError,
    InvalidInputError,
    NumericalFailureError,
)
from .linalg import read_matrix, write_matrix
from .preimage import SolverOptions

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _int_list(text):
    """Parse ``"2,4,6"`` or ``"2:20:2"`` (inclusive range) into a list of ints."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = [int(b) for b in part.split(":")]
            start, stop = bits[0], bits[1]
            step = bits[2] if len(bits) > 2 else 1
            if step < 1:
                raise argparse.ArgumentTypeError("range step must be positive")
            out.extend(range(start, stop + 1, step))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _str_list(text):
    out = [t.strip() for t in text.split(",") if t.strip()]
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="okdmd", description="Optimal kernel-based DMD toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic snapshot dataset")
    g.add_argument("--n", type=int, default=8, help="grid side (p = 2 n^2)")
    g.add_argument("--N", type=int, default=20, help="number of trajectories per set")
    g.add_argument("--T", type=int, default=2, help="trajectory length")
    g.add_argument("--alpha", type=float, default=0.5)
    g.add_argument("--hurst", type=float, default=1.0 / 3.0)
    g.add_argument("--noise", type=float, default=1e-6)
    g.add_argument("--scale", type=float, default=1e-2, help="target median norm of x_2")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--modes", type=int, default=None, help="retained stream-function coefficients")
    g.add_argument("--out", required=True)

    f = sub.add_parser("fit", help="fit a model on a dataset directory")
    f.add_argument("--data", required=True)
    f.add_argument("--method", choices=harness.METHODS, default="okdmd")
    f.add_argument("--kernel", default="log")
    f.add_argument("--k", type=int, required=True)
    f.add_argument("--rank-tol", type=float, default=core.DEFAULT_RANK_TOL)
    f.add_argument("--out", required=True)

    p = sub.add_parser("predict", help="predict states from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--theta", required=True, help="matrix file, one initial state per column")
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--inverse", choices=("variational", "closed"), default="closed")
    p.add_argument("--out", required=True)

    s = sub.add_parser("sweep", help="error-vs-rank sweep")
    s.add_argument("--data", required=True)
    s.add_argument("--methods", type=_str_list, default=["okdmd", "kdmd"])
    s.add_argument("--kernels", type=_str_list, default=["log"])
    s.add_argument("--ranks", type=_int_list, required=True)
    s.add_argument("--inverse", choices=("variational", "closed"), default="closed")
    s.add_argument("--rank-tol", type=float, default=core.DEFAULT_RANK_TOL)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--timing", action="store_true", help="record fit wall-clock seconds")
    s.add_argument("--plot", action="store_true", help="also write sweep.svg")
    s.add_argument("--out", required=True)

    o = sub.add_parser("oracle-check", help="compare against explicit feature coordinates")
    o.add_argument("--data", required=True)
    o.add_argument("--kernel", default="log")
    o.add_argument("--k", type=int, required=True)
    o.add_argument("--rank-tol", type=float, default=core.DEFAULT_RANK_TOL)
    o.add_argument("--tol", type=float, default=1e-8, help="maximum accepted residual")
    return parser


def _generate(args):
    grid = synthgen.GridSpec(args.n)
    cfg = synthgen.GenConfig(
        N=args.N,
        T=args.T,
        alpha=args.alpha,
        hurst=args.hurst,
        noise_std=args.noise,
        target_scale=args.scale,
        seed=args.seed,
        modes=args.modes,
    )
    train, test = synthgen.generate_dataset(grid, cfg)
    synthgen.save_dataset(args.out, train, test, grid, cfg)
    print(f"wrote p={train.p} m={train.m} to {args.out}")


def _fit(args):
    train, _ = synthgen.load_dataset(args.data)
    if args.method == "kdmd":
        if not 1 <= args.k <= train.m:
            raise InvalidInputError(f"k must lie in [1, {train.m}]")
        model = baselines.kdmd_fit(train, args.kernel, args.rank_tol)
        baselines.save_kdmd(model, args.out, k=args.k)
        k_eff = args.k
    elif args.method == "lowrank":
        model = baselines.lowrank_dmd_fit(train, args.k, args.rank_tol)
        core.save_model(model, args.out, method="lowrank")
        k_eff = model.k_eff
    else:
        model = core.fit(train, args.kernel, args.k, args.rank_tol)
        core.save_model(model, args.out, method="okdmd")
        k_eff = model.k_eff
    print(f"method={args.method} k={args.k} k_eff={k_eff} saved to {args.out}")


def _predict(args):
    meta_path = Path(args.model) / "model.meta"
    if not meta_path.exists():
        raise InvalidInputError(f"{args.model} has no model.meta")
    meta = read_manifest(meta_path)
    theta = read_matrix(args.theta)
    if meta.get("method") == "kdmd":
        model = baselines.load_kdmd(args.model)
        out = baselines.kdmd_predict(model, theta, args.t, int(meta["k"]))
    else:
        model = core.load_model(args.model)
        diagnostics = []
        out = core.predict(model, theta, args.t, args.inverse, SolverOptions(), diagnostics)
        failed = sum(not d.converged for d in diagnostics)
        if failed:
            print(f"warning: {failed} of {len(diagnostics)} pre-image solves did not converge", file=sys.stderr)
    write_matrix(args.out, out[:, None] if out.ndim == 1 else out)


def _sweep(args):
    cfg = harness.ExperimentConfig(
        data=args.data,
        methods=args.methods,
        kernels=args.kernels,
        ranks=args.ranks,
        inverse_mode=args.inverse,
        rank_tol=args.rank_tol,
        out=args.out,
        workers=args.workers,
        timing=args.timing,
    )
    table = harness.sweep(cfg)
    if args.plot:
        (Path(args.out) / "sweep.svg").write_text(harness.render_svg(table))
    sys.stdout.write(table.to_csv())


def _oracle_check(args):
    report = harness.oracle_check(args.data, args.kernel, args.k, args.rank_tol)
    print(f"kernel={report.kernel} k={report.k} k_eff={report.k_eff}")
    for name, value in report.residuals().items():
        print(f"{name}={value:.3e}")
    worst = report.max_residual()
    ok = worst <= args.tol
    print(f"max_residual={worst:.3e} {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERICAL


_COMMANDS = {
    "generate": _generate,
    "fit": _fit,
    "predict": _predict,
    "sweep": _sweep,
    "oracle-check": _oracle_check,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            code = _COMMANDS[args.command](args)
    except (InvalidInputError, CapabilityError, CapacityError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalFailureError, GenerationError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
