import os
import subprocess
import sys

import numpy as np
import pytest

from dirichlet_lab import _accel, kernels
from dirichlet_lab.parabolic_solver import Grid, GridOperator, ou_drift, rotation_drift


@pytest.mark.parametrize("d,n", [(1, 41), (2, 21), (3, 11)])
def test_stencil_paths_agree(d, n):
    grid = Grid(d, 3.0, n)
    b = rotation_drift() if d == 2 else ou_drift(d)
    op = GridOperator.build(b, grid)
    u = np.random.default_rng(d).standard_normal(grid.shape)
    np.testing.assert_allclose(kernels.apply_stencil_numba(u, op.am, op.a0, op.ap),
                               kernels.apply_stencil_numpy(u, op.am, op.a0, op.ap), rtol=1e-13, atol=1e-13)
    dt = 0.5 * op.max_stable_dt
    np.testing.assert_allclose(kernels.advance_numba(u, op.am, op.a0, op.ap, dt, 25),
                               kernels.advance_numpy(u, op.am, op.a0, op.ap, dt, 25), rtol=1e-12, atol=1e-12)


def test_wick_paths_agree():
    z = np.random.default_rng(0).standard_normal((50, 7))
    np.testing.assert_allclose(kernels.wick_stack_numba(z, np.float64(2.0), 6),
                               kernels.wick_stack_numpy(z, np.float64(2.0), 6), rtol=1e-13)


def test_stencil_rows_sum_to_zero():
    grid = Grid(2, 4.0, 31)
    op = GridOperator.build(ou_drift(2) + rotation_drift(), grid)
    np.testing.assert_allclose(op.apply(np.ones(grid.shape)), 0.0, atol=1e-12)


def test_env_flag_selects_numpy():
    env = dict(os.environ, DIRICHLET_LAB_PURE_NUMPY="1")
    out = subprocess.run([sys.executable, "-c", "from dirichlet_lab import _accel; print(_accel.USE_NUMBA)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
    assert _accel.numba_requested() == (os.environ.get("DIRICHLET_LAB_PURE_NUMPY", "") in ("", "0"))
