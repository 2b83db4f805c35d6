"""Command-line entry point: ``isingcdr {run,spectrum,fit,stats}``.

Exit codes: 0 success, 2 configuration / input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path
from typing import Sequence

from .analysis import fit_damped_cosine, spectrum_rows
from .circuits import circuit_stats, trotter_circuit
from .harness import ConfigError, emit, load_config, run_experiment
from .model import CapacityError, ModelParams, TimeGrid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--hX", type=float, default=0.5)
    p.add_argument("--L", type=int, default=9)


def _write(text: str, out: str | None, name: str) -> None:
    outdir = os.environ.get("ISINGCDR_OUTPUT_DIR") or out
    if outdir is None:
        sys.stdout.write(text)
        return
    path = Path(outdir)
    path.mkdir(parents=True, exist_ok=True)
    (path / name).write_text(text)
    print(path / name)


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    report = run_experiment(config)
    paths = emit(report, args.out)
    for (oid, method), err in sorted(report.error_table().items()):
        print(f"{oid}\t{method}\t{err:.6f}")
    for (oid, method), res in sorted(report.results.items()):
        if res.failure:
            print(f"{oid}\t{method}\tFAILED: {res.failure}", file=sys.stderr)
    for p in paths:
        print(p)
    return EXIT_OK


def _cmd_spectrum(args: argparse.Namespace) -> int:
    params = [ModelParams(J=args.J, hX=args.hX, hZ=hz, L=args.L) for hz in args.hZ]
    rows = spectrum_rows(params, args.k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["hX", "hZ", "alpha", "E", "omega", "m"])
    for r in rows:
        w.writerow([repr(r["hX"]), repr(r["hZ"]), r["alpha"], repr(r["E"]),
                    "" if r["omega"] is None else repr(r["omega"]), repr(r["m"])])
    _write(buf.getvalue(), args.out, "spectrum.csv")
    return EXIT_OK


def _cmd_fit(args: argparse.Namespace) -> int:
    try:
        with open(args.csv, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {args.csv}: {exc}") from exc
    if args.where:
        key, _, value = args.where.partition("=")
        rows = [r for r in rows if r.get(key) == value]
    try:
        t = [float(r[args.x]) for r in rows]
        y = [float(r[args.y]) for r in rows]
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad column in {args.csv}: {exc}") from exc
    try:
        fit = fit_damped_cosine((t, y), args.tmax)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print("a1,a2,a3,a4,a5,residual,converged,degenerate")
    print(",".join([*(repr(float(v)) for v in fit.params), repr(float(fit.residual)), str(fit.converged), str(fit.degenerate)]))
    return EXIT_OK if fit.converged and not fit.degenerate else EXIT_NUMERIC


def _cmd_stats(args: argparse.Namespace) -> int:
    params = ModelParams(J=args.J, hX=args.hX, hZ=args.hZ, L=args.L)
    s = circuit_stats(trotter_circuit(params, TimeGrid(args.dt, args.steps)))
    print("depth,cnotCount,nonCliffordCount")
    print(f"{s.depth},{s.cnotCount},{s.nonCliffordCount}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isingcdr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a TOML config")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory (ISINGCDR_OUTPUT_DIR wins)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("spectrum", help="two-kink spectrum sweep over hZ")
    _model_args(p)
    p.add_argument("--hZ", type=float, nargs="+", default=[0.5, 0.65, 0.75, 0.9])
    p.add_argument("--k", type=float, default=0.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("fit", help="damped-cosine frequency fit of a CSV column")
    p.add_argument("csv")
    p.add_argument("--x", default="t")
    p.add_argument("--y", default="median")
    p.add_argument("--where", default=None, help="row filter COLUMN=VALUE, e.g. method=cdr")
    p.add_argument("--tmax", type=float, default=3.0)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("stats", help="Trotter circuit statistics")
    _model_args(p)
    p.add_argument("--hZ", type=float, default=0.9)
    p.add_argument("--dt", type=float, default=0.25)
    p.add_argument("--steps", type=int, default=1)
    p.set_defaults(func=_cmd_stats)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CapacityError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
