"""Command-line entry point: qpsolve <subcommand> --config FILE [options]."""
import argparse
import json
import os
import sys

from threadpoolctl import threadpool_limits

from . import qpfield
from .config import KINDS, ConfigError, load_config
from .experiments import COLUMNS, DRIVERS
from .reports import OutputExists, emit_reports, json_value, write_manifest

EXIT_OK, EXIT_CONFIG, EXIT_NOCONV, EXIT_ORACLE = 0, 2, 3, 4


def build_parser():
    p = argparse.ArgumentParser(prog="qpsolve", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind)
        s.add_argument("--config", required=True, help="JSON experiment file")
        s.add_argument("--out", default="results", help="output directory")
        s.add_argument("--threads", type=int, default=None, help="pin BLAS/FFT thread count")
        s.add_argument("--rel-tol", type=float, default=None, help="override solver tolerance")
        s.add_argument("--max-iter", type=int, default=None, help="override solver iteration cap")
        s.add_argument("--dense-check", action="store_true", help="cross-check against dense oracles")
        s.add_argument("--overwrite", action="store_true", help="replace existing outputs")
        s.add_argument("--no-timing", action="store_true", help="blank wall_time so reruns are byte-identical")
    return p


def _status(kind, rows):
    if any(r.get("dense_check") == "fail" or r.get("expected_ok") is False for r in rows):
        return EXIT_ORACLE
    if any(r.get("converged") is False for r in rows):
        return EXIT_NOCONV
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.kind != args.command:
            raise ConfigError(f"{args.config}: config kind {cfg.kind!r} does not match subcommand {args.command!r}")
        if args.rel_tol is not None:
            if not args.rel_tol > 0:
                raise ConfigError("--rel-tol must be positive")
            cfg.solver.rel_tol = args.rel_tol
        if args.max_iter is not None:
            if args.max_iter < 1:
                raise ConfigError("--max-iter must be >= 1")
            cfg.solver.max_iter = args.max_iter
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    stem = cfg.stem or os.path.splitext(os.path.basename(args.config))[0]
    qpfield.FFT_WORKERS = args.threads
    with threadpool_limits(limits=args.threads):
        try:
            rows = DRIVERS[cfg.kind](cfg, dense_check=args.dense_check)
        except ValueError as e:
            print(f"config error: {e}", file=sys.stderr)
            return EXIT_CONFIG
    code = _status(cfg.kind, rows)
    try:
        paths = emit_reports(rows, COLUMNS[cfg.kind], args.out, stem, args.overwrite, timing=not args.no_timing)
        write_manifest(args.out, stem, {
            "config": os.path.abspath(args.config), "config_sha256": cfg.source_hash, "kind": cfg.kind,
            "threads": args.threads, "rel_tol": cfg.solver.rel_tol, "max_iter": cfg.solver.max_iter,
            "dense_check": args.dense_check, "outputs": [os.path.basename(p) for p in paths],
            "exit_code": code,
        }, args.overwrite)
    except OutputExists as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    for r in rows:
        print(json.dumps({k: json_value(v) for k, v in r.items()}))
    return code


if __name__ == "__main__":
    sys.exit(main())
