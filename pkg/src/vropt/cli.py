"""Command-line entry point: ``vropt run|run-dist|check|plot|fetch``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .data import TABLE3, fetch_instructions
from .errors import (
    ConfigError, DatasetNotFound, DegenerateSmoothness, EmptyDataset, InvalidArgument, ParseError,
)
from .harness import emit_plot_svg, load_config, read_trace_csv, run_sweep, write_trace_csv

EXIT_OK, EXIT_ERROR, EXIT_DIVERGED = 0, 1, 2

_USER_ERRORS = (ConfigError, DatasetNotFound, ParseError, EmptyDataset, InvalidArgument, DegenerateSmoothness, OSError)


def _csv_path(base: str, i: int, total: int) -> Path:
    p = Path(base)
    return p if total == 1 else p.with_name(f"{p.stem}_{i}{p.suffix}")


def _run(args, distributed: bool) -> int:
    cfg = load_config(args.config)
    if cfg.distributed != distributed:
        want = "run-dist" if cfg.distributed else "run"
        raise ConfigError(f"algorithm {cfg.algorithm} must be run with `{want}`")
    results = run_sweep(cfg)
    status = EXIT_OK
    for i, res in enumerate(results):
        label = f"{cfg.algorithm} eta={res.config.stepsize}" if res.config.stepsize is not None else cfg.algorithm
        last = res.trace[-1] if res.trace else None
        if last is not None:
            print(f"{label}: iters={last.iter} paper_count={last.paper_count} "
                  f"actual_count={last.actual_count} grad_norm={last.grad_norm:.6e}")
        for note in res.notes:
            print(f"  note: {note}")
        if res.bound is not None:
            if res.bound.get("available"):
                b = res.bound
                tag = " (proxy)" if b["delta0_is_proxy"] else ""
                print(f"  bound: K={b['K']} delta0={b['delta0']:.6e}{tag} G0={b['G0']:.6e} "
                      f"rhs={b['bound']:.6e} observed |grad f(x_hat)|^2={b['output_sq_grad_norm']:.6e}")
            else:
                print(f"  bound: unavailable ({res.bound['reason']})")
        if res.trace and (args.output or cfg.output_csv):
            path = _csv_path(args.output or cfg.output_csv, i, len(results))
            write_trace_csv(res.trace, path)
            print(f"  trace written to {path}")
        if res.diverged:
            print(f"  diverged: {res.error}", file=sys.stderr)
            status = EXIT_DIVERGED
    svg = args.svg or cfg.output_svg
    if svg:
        traces = [(f"{cfg.algorithm} eta={r.config.stepsize}" if r.config.stepsize is not None else cfg.algorithm,
                   r.trace) for r in results if r.trace]
        emit_plot_svg(traces, svg, title=cfg.dataset or cfg.dataset_file)
        print(f"plot written to {svg}")
    return status


def _check(args) -> int:
    from .checks import run_checks

    results = run_checks()
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}  ({r.seconds:.2f}s)")
    return EXIT_OK if all(r.passed for r in results) else EXIT_ERROR


def _plot(args) -> int:
    traces = [(Path(p).stem, read_trace_csv(Path(p))) for p in args.csv]
    emit_plot_svg(traces, args.output, title=args.title)
    print(f"plot written to {args.output}")
    return EXIT_OK


def _fetch(args) -> int:
    names = sorted(TABLE3) if args.name == "all" else [args.name]
    for name in names:
        print(fetch_instructions(name))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vropt", description="Variance-reduced optimizer experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run a sequential experiment"), ("run-dist", "run a federated experiment")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config")
        sp.add_argument("-o", "--output", help="trace CSV path (overrides output_csv)")
        sp.add_argument("--svg", help="plot path (overrides output_svg)")
    sub.add_parser("check", help="run the brute-force verification oracles")
    sp = sub.add_parser("plot", help="plot one or more trace CSVs")
    sp.add_argument("csv", nargs="+")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--title")
    sp = sub.add_parser("fetch", help="print download commands for registry datasets")
    sp.add_argument("name", help="dataset name or 'all'")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            return _run(args, distributed=False)
        if args.command == "run-dist":
            return _run(args, distributed=True)
        if args.command == "check":
            return _check(args)
        if args.command == "plot":
            return _plot(args)
        return _fetch(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
