"""Command line: ``dirichlet-lab run <experiment> [flags]``.

Exit codes: 0 pass, 1 fail, 2 inconclusive, 3 configuration error,
4 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, _accel
from .config import defaults_for, resolve
from .experiments import EXPERIMENTS, FAIL, INCONCLUSIVE, PASS, RUNNERS
from .parabolic_solver import ConfigurationError, NumericalAbort

EXIT = {PASS: 0, FAIL: 1, INCONCLUSIVE: 2}
EXIT_CONFIG, EXIT_ABORT = 3, 4


def jsonable(obj):
    """Plain JSON types; non-finite floats become the strings "inf", "-inf", "nan".

    Key order is the runners' insertion order, which is fixed, so equal
    inputs give byte-identical text.
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(body) -> str:
    return json.dumps(jsonable(body), separators=(",", ":"), allow_nan=False)


def write_table(path: Path, rows) -> None:
    rows = list(rows)
    if not rows:
        return
    fields = list(rows[0])
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: jsonable(v) for k, v in r.items()})


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dirichlet-lab", description="Numerical checks for Dirichlet operators.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("list", help="list experiments and their defaults")
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("experiment", choices=EXPERIMENTS, metavar="experiment")
    run.add_argument("--config", type=Path)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", type=Path, default=Path("runs"))
    run.add_argument("--threads", type=int)
    run.add_argument("--budget-factor", type=float, dest="budget_factor")
    run.add_argument("--K", type=int, dest="K")
    run.add_argument("--samples", type=int)
    run.add_argument("--eps0", type=float)
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="sets")
    run.add_argument("--quiet", action="store_true", help="do not echo the body to stdout")
    return parser


def _overrides(args, params_keys) -> dict:
    out = {}
    for key in ("seed", "threads", "budget_factor", "K", "samples", "eps0"):
        value = getattr(args, key)
        if value is None:
            continue
        if key not in params_keys:
            raise ConfigurationError(f"--{key.replace('_', '-')} does not apply to {args.experiment}")
        out[key] = value
    return out


def run(args) -> int:
    started = datetime.now(timezone.utc)
    params = resolve(args.experiment, args.config, _overrides(args, defaults_for(args.experiment)), args.sets)
    _accel.set_threads(params["threads"])
    t0 = time.perf_counter()
    body, status, tables = RUNNERS[args.experiment](params)
    elapsed = time.perf_counter() - t0
    text = dumps(body)
    out_dir = args.out / args.experiment
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "result.json").write_text(text + "\n", encoding="utf-8")
    files = ["result.json"]
    for stem, rows in tables.items():
        write_table(out_dir / f"{stem}.csv", rows)
        files.append(f"{stem}.csv")
    manifest = {
        "experiment": args.experiment,
        "status": status,
        "exit_code": EXIT[status],
        "seed": params["seed"],
        "config": params,
        "config_file": str(args.config) if args.config else None,
        "body_sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
        "started_utc": started.isoformat(),
        "elapsed_s": elapsed,
        "version": __version__,
        "numba": _accel.USE_NUMBA,
        "files": files,
    }
    (out_dir / "manifest.json").write_text(json.dumps(jsonable(manifest), indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")
    if not args.quiet:
        print(text)
    return EXIT[status]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in EXPERIMENTS:
            print(name, dumps(defaults_for(name)))
        return 0
    try:
        return run(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
