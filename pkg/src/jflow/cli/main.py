"""Command-line entry point.

    jflow --config run.toml [--out DIR] [--tol NAME=VALUE ...] [--sweep SPEC]

Exit codes: 0 stable / solved / exists, 2 destabilized / no solution,
1 error (bad config or a failed computation).
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from jflow.cli.config import ConfigError, RunConfig, parse_config, to_document, tolerances, validate
from jflow.cli.runner import DESTABILIZED, ERROR, OK, Report, csv_text, exit_code, format_value, render, run

OUT_ENV = "JFLOW_OUT"
DEFAULT_OUT = "jflow-out"

SWEEP_NAMES = {"ruled": ("a", "b"), "surface": ("a", "b"), "torus": ("amplitude",)}
SWEEP_COLUMNS = {
    "ruled": ("a", "b", "c", "ratio", "case", "margin_E0", "kahler", "lambda", "defect_l2"),
    "surface": ("a", "b", "c", "margin_E", "margin_H-E", "critical_square", "verdict"),
    "torus": ("amplitude", "c", "c_lower", "c_upper", "residual_sup", "min_hessian_eig", "newton_iters"),
}


def parse_sweep(spec: str, command: str) -> list[dict]:
    """'a=11/10:6:50;b=2:3:2' -> the cartesian grid of assignments.

    Each axis ``start:stop:count`` is ``count`` equally spaced exact
    rationals from start to stop inclusive (a single value if count = 1).
    """
    names = SWEEP_NAMES.get(command)
    if names is None:
        raise ConfigError(f"sweeps are not available for the {command} command", key="--sweep")
    axes: dict[str, list[Fraction]] = {}
    for part in filter(None, (s.strip() for s in spec.split(";"))):
        name, sep, rng = part.partition("=")
        name = name.strip()
        if not sep or name not in names:
            raise ConfigError(f"expected NAME=start:stop:count with NAME in {', '.join(names)}", key="--sweep")
        pieces = rng.split(":")
        if len(pieces) != 3:
            raise ConfigError(f"bad range {rng!r}; expected start:stop:count", key="--sweep")
        try:
            start, stop, count = Fraction(pieces[0]), Fraction(pieces[1]), int(pieces[2])
        except ValueError as exc:
            raise ConfigError(f"bad range {rng!r}: {exc}", key="--sweep") from exc
        if count < 1:
            raise ConfigError("count must be at least 1", key="--sweep")
        step = (stop - start) / (count - 1) if count > 1 else Fraction(0)
        axes[name] = [start + i * step for i in range(count)]
    if not axes:
        raise ConfigError("empty sweep", key="--sweep")
    grid = [{}]
    for name, values in axes.items():
        grid = [dict(g, **{name: v}) for g in grid for v in values]
    return grid


def _sweep_instance(args) -> tuple[str, list[str]]:
    config, point = args
    columns = SWEEP_COLUMNS[config.command]
    if config.command == "torus":
        report = run(config, amplitude=float(point["amplitude"]))
    else:
        doc = to_document(config)
        doc[config.command].update({k: str(v) for k, v in point.items()})
        try:
            config = validate(doc)
        except ConfigError as exc:
            return ERROR, [str(point.get(c, "")) for c in columns] + [str(exc)]
        report = run(config)
    values = {e.key: format_value(e.value) for e in report.entries}
    return report.status, [values.get(c, "") for c in columns] + [report.error or ""]


def run_sweep(config: RunConfig, spec: str, workers: int | None = None) -> tuple[str, str]:
    """Run every grid point in parallel; return (status, CSV text)."""
    if config.command == "ruled":
        config = replace(config, params=dict(config.params, flow=False, levels=()))
    points = parse_sweep(spec, config.command)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_sweep_instance, [(config, p) for p in points]))
    statuses = {s for s, _ in results}
    status = ERROR if ERROR in statuses else DESTABILIZED if DESTABILIZED in statuses else OK
    header = ",".join(SWEEP_COLUMNS[config.command] + ("status", "error"))
    rows = [row[:-1] + [s, row[-1]] for s, row in results]
    return status, csv_text(header, rows)


def write_outputs(report: Report, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(render(report), encoding="utf-8")
    for name, text in sorted(report.artifacts.items()):
        (out / name).write_text(text, encoding="utf-8")


def _tol_override(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jflow",
        description="Slope stability, ruled-surface J-flow analysis and torus J-equation solver.",
        epilog=f"Exit codes: 0 stable/solved/exists, 2 destabilized/no solution, 1 error. "
        f"Output directory: --out, else 'out' in the config, else ${OUT_ENV}, else ./{DEFAULT_OUT}.",
    )
    parser.add_argument("--config", required=True, type=Path, help="TOML run configuration")
    parser.add_argument("--out", type=Path, help="output directory for report.txt and CSV files")
    parser.add_argument("--sweep", metavar="SPEC", help="grid such as 'a=11/10:6:50;b=11/10:6:50' or 'amplitude=0:3/10:4'")
    parser.add_argument(
        "--tol", action="append", default=[], type=_tol_override, metavar="NAME=VALUE", help="override newton, flow or quadrature"
    )
    parser.add_argument("--workers", type=int, default=None, help="processes for --sweep")
    parser.add_argument("--quiet", action="store_true", help="do not echo the report")
    return parser


def _output_dir(args, config: RunConfig) -> Path:
    if args.out is not None:
        return args.out
    if config.out is not None:
        return Path(config.out)
    return Path(os.environ.get(OUT_ENV, DEFAULT_OUT))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        config = parse_config(text)
        if args.tol:
            config = replace(config, tolerances=tolerances(config.tolerances, dict(args.tol)))
        out = _output_dir(args, config)
        if args.sweep:
            status, table = run_sweep(config, args.sweep, args.workers)
            out.mkdir(parents=True, exist_ok=True)
            (out / "sweep.csv").write_text(table, encoding="utf-8")
            if not args.quiet:
                print(table, end="")
            return {OK: 0, DESTABILIZED: 2, ERROR: 1}[status]
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report = run(config)
    write_outputs(report, out)
    if not args.quiet:
        print(render(report), end="")
    if report.error:
        print(f"error: {report.error}", file=sys.stderr)
    return exit_code(report)


if __name__ == "__main__":
    sys.exit(main())
