"""Timing of the numba kernels against their pure-numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Both paths are called directly, so the environment flag does not matter
here.  Each row also reports the max abs difference between the paths.
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from dirichlet_lab import kernels
from dirichlet_lab.parabolic_solver import Grid, GridOperator, ou_drift


def _best(fn, repeat):
    fn()  # warm-up (JIT compile on the numba side)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def stencil_cases():
    for d, n in ((1, 4001), (2, 241), (3, 61)):
        grid = Grid(d, 6.0, n)
        op = GridOperator.build(ou_drift(d), grid)
        u = np.exp(-0.5 * np.sum(grid.mesh**2, axis=0))
        dt = 0.9 * op.max_stable_dt
        yield f"advance d={d} n={n} x200", (
            lambda u=u, op=op, dt=dt: kernels.advance_numpy(u, op.am, op.a0, op.ap, dt, 200),
            lambda u=u, op=op, dt=dt: kernels.advance_numba(u, op.am, op.a0, op.ap, dt, 200),
        )


def wick_cases():
    rng = np.random.default_rng(0)
    z = rng.standard_normal(1_000_000)
    yield "wick_stack 1e6 nmax=8", (
        lambda: kernels.wick_stack_numpy(z, np.float64(1.5), 8),
        lambda: kernels.wick_stack_numba(z, np.float64(1.5), 8),
    )


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", dest="json_path")
    args = ap.parse_args(argv)
    rows = []
    for name, (np_fn, nb_fn) in [*stencil_cases(), *wick_cases()]:
        t_np, out_np = _best(np_fn, args.repeat)
        t_nb, out_nb = _best(nb_fn, args.repeat)
        rows.append({"case": name, "numpy_s": t_np, "numba_s": t_nb, "speedup": t_np / t_nb,
                     "max_abs_diff": float(np.max(np.abs(out_np - out_nb)))})
    width = max(len(r["case"]) for r in rows)
    print(f"{'case':<{width}}  {'numpy [s]':>10}  {'numba [s]':>10}  {'speedup':>8}  {'max diff':>9}")
    for r in rows:
        print(f"{r['case']:<{width}}  {r['numpy_s']:10.4f}  {r['numba_s']:10.4f}  {r['speedup']:8.1f}"
              f"  {r['max_abs_diff']:9.1e}")
    if args.json_path:
        with open(args.json_path, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return rows


if __name__ == "__main__":
    main()
