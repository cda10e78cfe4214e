"""Command-line client for the experiment pipelines.

Thin over the same runner the HTTP service calls: ``run`` executes a config
file, ``compare`` gates two run directories against a tolerance,
``export-raster`` converts a stored field dump for plotting, and ``serve``
starts the HTTP service.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 comparison above tolerance.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_COMPARISON = 4


def _cmd_run(args) -> int:
    from .experiments import ExperimentConfig, NumericalFailure, run

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = ExperimentConfig.from_ini(text)
    except (ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(cfg, output_root=args.output_dir)
    except (NumericalFailure, ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"run {result.run_id} finished in {result.wall_time_s:.2f}s")
    print(f"output: {result.out_dir}")
    for name in result.artifacts:
        print(f"  {name}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    from .experiments import IncompatibleRuns, compare

    try:
        report = compare(args.run_a, args.run_b, tol=args.tol)
    except (IncompatibleRuns, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.report:
        Path(args.report).write_text(text + "\n")
    else:
        print(text)
    if not report["ok"]:
        print(f"comparison FAILED: worst rel {report['worst_rel']:.3e} > {args.tol:g}",
              file=sys.stderr)
        return EXIT_COMPARISON
    return EXIT_OK


def _cmd_export_raster(args) -> int:
    from .experiments import export_raster, parse_number

    try:
        step = parse_number(args.phi_step)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    dump = Path(args.dump)
    if not dump.exists():
        print(f"error: no such dump: {dump}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.output) if args.output else dump.with_suffix(".raster.csv")
    try:
        export_raster(dump, out, phi_step=step)
    except Exception as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"raster written: {out}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("kerrsim.service.app:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kerrsim",
                                     description="Lossy Kerr oscillator simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", help="path to the INI config")
    p_run.add_argument("--output-dir", default=None,
                       help="override the output root directory")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="compare two run directories")
    p_cmp.add_argument("run_a")
    p_cmp.add_argument("run_b")
    p_cmp.add_argument("--tol", type=float, default=1e-10)
    p_cmp.add_argument("--report", default=None, help="write the JSON report here")
    p_cmp.set_defaults(func=_cmd_compare)

    p_ras = sub.add_parser("export-raster", help="raster a stored field dump")
    p_ras.add_argument("dump")
    p_ras.add_argument("--phi-step", default="pi/200")
    p_ras.add_argument("-o", "--output", default=None)
    p_ras.set_defaults(func=_cmd_export_raster)

    p_srv = sub.add_parser("serve", help="start the HTTP service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
