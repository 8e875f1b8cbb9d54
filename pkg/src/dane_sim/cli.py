"""Command-line entry point: ``dane-sim <command> ...``.

Exit codes: 0 success, 1 a ``verify`` check failed, 2 bad configuration
or unreadable input.
"""
import argparse
import logging
import sys

import numpy as np

from . import experiment as ex
from .errors import ConfigError, ParseError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _run_and_write(cfg, args):
    rows = ex.run_experiment(cfg)
    out, close = _open_out(args.out)
    try:
        ex.write_csv(rows, out)
    finally:
        if close:
            out.close()
    if args.summary:
        with open(args.summary, "w", encoding="utf-8", newline="") as fh:
            for line in ex.summary_lines(cfg, rows):
                fh.write(line + "\n")
    return EXIT_OK


def cmd_run(args):
    return _run_and_write(ex.load_config(args.config), args)


def cmd_sweep(args):
    cfg = ex.load_config(args.config)
    overrides = {}
    for item in args.param:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        overrides[key.strip()] = value
    return _run_and_write(ex.apply_overrides(cfg, overrides), args)


def cmd_verify(args):
    from . import verify
    reports = verify.run_suite(args.suite, quick=args.quick)
    for rep in reports:
        print(rep.summary())
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_gen_data(args):
    from .data import gen_logistic, gen_ridge, write_libsvm
    if args.problem == "ridge":
        data, _ = gen_ridge(args.N, args.p, args.noise_sigma, seed=args.seed)
    else:
        data, _ = gen_logistic(args.N, args.p, seed=args.seed)
    out, close = _open_out(args.out)
    try:
        write_libsvm(data, out)
    finally:
        if close:
            out.close()
    return EXIT_OK


def cmd_parse(args):
    from .data import load_libsvm
    data = load_libsvm(args.libsvm, binary=not args.regression)
    if args.stats:
        X = data.features
        nnz = X.nnz if data.is_sparse else int(np.count_nonzero(X))
        norms = data.row_norms()
        labels, counts = np.unique(data.labels, return_counts=True)
        print(f"samples      {data.n_samples}")
        print(f"features     {data.n_features}")
        print(f"nonzeros     {nnz}")
        print(f"density      {nnz / (data.n_samples * data.n_features):.6g}")
        print(f"storage      {'csr' if data.is_sparse else 'dense'}")
        print(f"row norm     min {norms.min():.6g} max {norms.max():.6g} "
              f"mean {norms.mean():.6g}")
        if len(labels) <= 20:
            dist = ", ".join(f"{lab:g}: {c}" for lab, c in zip(labels, counts))
            print(f"labels       {dist}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="dane-sim", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--summary", help="JSON-lines summary path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a config with overridden keys")
    p.add_argument("--config", required=True)
    p.add_argument("--param", action="append", default=[],
                   help="key=value, e.g. m=4,16,64 (repeatable)")
    p.add_argument("--out")
    p.add_argument("--summary")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the oracle audits")
    p.add_argument("--suite", choices=("lemmas", "contraction", "all"),
                   default="all")
    p.add_argument("--quick", action="store_true", help="fewer random instances")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen-data", help="write a synthetic dataset as LIBSVM text")
    p.add_argument("--problem", choices=("ridge", "logistic"), default="ridge")
    p.add_argument("--N", type=int, default=2000)
    p.add_argument("--p", type=int, default=200)
    p.add_argument("--noise-sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("parse", help="parse a LIBSVM file")
    p.add_argument("--libsvm", required=True)
    p.add_argument("--stats", action="store_true")
    p.add_argument("--regression", action="store_true",
                   help="keep labels as real numbers")
    p.set_defaults(func=cmd_parse)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
