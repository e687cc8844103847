"""Command-line driver: ``crt <subcommand> ...``.

Exit codes: 0 on success, 1 on usage or input errors, 2 when a numerical
routine fails (singular system, non-finite values).

Subcommands
    corrupt   corrupt every image of a dataset, write data + masks + manifest
    rpca      low-rank training targets from a dataset
    train     learn a transformation from clean/corrupted matrices
    recover   apply a learned transformation to a matrix of columns
    classify  recover query columns, then label them with KNN or SRC
    eval      cross-validated experiment from a key=value config
    basis     export the first columns of a transformation as PGM images
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .classify import knn_predict, src_predict
from .corruption import CorruptionSpec, apply_corruption
from .harness import load_experiment_config, run_cv
from .matrix_io import (
    DatasetError,
    MatrixFormatError,
    load_dataset,
    load_labels,
    load_matrix,
    save_dataset,
    save_labels,
    save_matrix,
    write_key_values,
)
from .rpca import rpca_decompose
from .solver import SolverConfig, export_basis, fit_robust, load_model, recover, save_model

EXIT_USAGE = 1
EXIT_NUMERIC = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; reserve 2 for numerical failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_columns(path) -> np.ndarray:
    """A matrix file, or the ``[0, 1]`` data of a dataset manifest."""
    if str(path).endswith(".manifest"):
        return load_dataset(path).data
    return load_matrix(path)


# --------------------------------------------------------------------------
# subcommands

def cmd_corrupt(args) -> None:
    ds = load_dataset(args.manifest)
    spec = CorruptionSpec(args.kind, args.fraction, args.seed, args.fill)
    noisy, masks = apply_corruption(ds, spec)
    out = Path(args.out)
    save_dataset(noisy, out)
    save_matrix(masks.astype(np.float64), out / "masks.crtm")
    print(f"corrupted {noisy.data.shape[1]} images -> {out / 'data.manifest'}")


def cmd_rpca(args) -> None:
    ds = load_dataset(args.manifest)
    res = rpca_decompose(ds.data, args.lam)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix(res.low_rank, out / "z0.crtm")
    save_matrix(res.sparse, out / "sparse.crtm")
    state = "converged" if res.report.converged else "stopped"
    print(f"rpca {state} after {res.report.iterations} iterations -> {out / 'z0.crtm'}")


def _solver_config(args) -> SolverConfig:
    return SolverConfig(mu0=args.mu0, rho=args.rho, mu_max=args.mu_max, tol=args.tol, max_iter=args.max_iter)


def cmd_train(args) -> None:
    z0 = _load_columns(args.clean)
    z = _load_columns(args.noisy)
    model, report = fit_robust(z0, z, args.lam, args.loss, _solver_config(args))
    out = Path(args.out)
    save_model(model, out)
    with open(out / "trace.csv", "w", newline="\n") as fh:
        fh.write("iteration,objective,residual_1,residual_2,mu\n")
        for k in range(report.iterations):
            fh.write(
                f"{k},{report.objective[k]!r},{report.residual_1[k]!r},"
                f"{report.residual_2[k]!r},{report.mu[k]!r}\n"
            )
    if not report.converged:
        print(f"warning: no convergence in {report.iterations} iterations; best iterate saved", file=sys.stderr)
    print(f"trained {model.p}x{model.p} model in {report.iterations} iterations -> {out}")


def cmd_recover(args) -> None:
    model = load_model(args.model)
    save_matrix(recover(model, _load_columns(args.inp)), args.out)


def cmd_classify(args) -> None:
    model = load_model(args.model)
    train = _load_columns(args.train)
    labels = load_labels(args.labels)
    if labels.size != train.shape[1]:
        raise DatasetError(f"label count mismatch: {labels.size} labels for {train.shape[1]} columns")
    queries = recover(model, _load_columns(args.query))
    if args.src is not None:
        pred = src_predict(train, labels, queries, args.src)
    else:
        pred = knn_predict(train, labels, queries, args.knn)
    if args.out:
        save_labels(pred, args.out)
    else:
        sys.stdout.write("".join(f"{int(c)}\n" for c in pred))


def cmd_eval(args) -> None:
    config = load_experiment_config(args.config)
    table = run_cv(config)
    print(table.summary())


def cmd_basis(args) -> None:
    model = load_model(args.model)
    paths = export_basis(model, args.height, args.width, args.out, args.count)
    write_key_values({"height": args.height, "width": args.width, "count": len(paths)}, Path(args.out) / "basis.txt")
    print(f"wrote {len(paths)} basis images -> {args.out}")


# --------------------------------------------------------------------------
# parser

def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"{text} must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crt", description="Corruption recovery transformations for image recognition.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("corrupt", help="corrupt every image of a dataset")
    s.add_argument("--manifest", required=True)
    s.add_argument("--kind", choices=("block", "cross", "saltpepper", "salt_pepper"), default="block")
    s.add_argument("--fraction", type=float, default=0.10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--fill", choices=("zeros", "max", "random_binary"), default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_corrupt)

    s = sub.add_parser("rpca", help="low-rank targets of a dataset")
    s.add_argument("--manifest", required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=None, help="default 1/sqrt(max(p, n))")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rpca)

    s = sub.add_parser("train", help="learn a transformation")
    s.add_argument("--clean", required=True, help="target matrix (or manifest)")
    s.add_argument("--noisy", required=True, help="corrupted matrix (or manifest)")
    s.add_argument("--lambda", dest="lam", type=float, default=0.12)
    s.add_argument("--loss", choices=("l21", "frobenius"), default="l21")
    s.add_argument("--mu0", type=_positive_float, default=1e-6)
    s.add_argument("--rho", type=float, default=1.2)
    s.add_argument("--mu-max", dest="mu_max", type=_positive_float, default=1e10)
    s.add_argument("--tol", type=_positive_float, default=1e-7)
    s.add_argument("--max-iter", dest="max_iter", type=int, default=1000)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("recover", help="apply a transformation")
    s.add_argument("--model", required=True)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("classify", help="recover and label query columns")
    s.add_argument("--model", required=True)
    s.add_argument("--train", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--query", required=True)
    how = s.add_mutually_exclusive_group()
    how.add_argument("--knn", type=int, choices=(1, 3), default=1)
    how.add_argument("--src", type=_positive_float, metavar="GAMMA", default=None)
    s.add_argument("--out", default=None, help="write labels here instead of stdout")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("eval", help="run a cross-validated experiment")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("basis", help="export basis images")
    s.add_argument("--model", required=True)
    s.add_argument("--height", type=int, required=True)
    s.add_argument("--width", type=int, required=True)
    s.add_argument("--count", type=int, default=32)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_basis)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        args.func(args)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"crt {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MatrixFormatError, DatasetError, ValueError, OSError) as exc:
        print(f"crt {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
