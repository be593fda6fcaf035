"""Hot numeric kernels with numba and pure-numpy implementations.

Two families live here:

* the three-point-per-axis stencil used by the explicit parabolic solver
  (reflecting ghost nodes, i.e. homogeneous Neumann on a node-centred grid);
* the scaled Hermite recurrence used for Wick powers,
  ``W_{n+1} = z W_n - n c W_{n-1}`` with ``W_0 = 1``, ``W_1 = z``.

The public entry points (``apply_stencil``, ``advance``, ``wick_stack``)
dispatch on :data:`dirichlet_lab._accel.USE_NUMBA`.  The ``*_numpy`` and
``*_numba`` variants are exported so the benchmark and the tests can call both.
"""

import numpy as np

from . import _accel
from ._accel import njit

# ---------------------------------------------------------------------------
# stencil: L u = A0 * u + sum_k (Am[k] * u[i-1 along k] + Ap[k] * u[i+1 along k])
# ---------------------------------------------------------------------------


def apply_stencil_numpy(u, am, a0, ap):
    d = u.ndim
    out = a0 * u
    padded = np.pad(u, 1, mode="reflect")
    core = tuple(slice(1, -1) for _ in range(d))
    for k in range(d):
        lo = list(core)
        hi = list(core)
        lo[k] = slice(0, -2)
        hi[k] = slice(2, None)
        out += am[k] * padded[tuple(lo)] + ap[k] * padded[tuple(hi)]
    return out


@njit(cache=True)
def _refl(i, n):
    if i < 0:
        return -i
    if i >= n:
        return 2 * (n - 1) - i
    return i


@njit(cache=True)
def _stencil_1d(u, am, a0, ap, out):
    n = u.shape[0]
    for i in range(n):
        out[i] = a0[i] * u[i] + am[0, i] * u[_refl(i - 1, n)] + ap[0, i] * u[_refl(i + 1, n)]


@njit(cache=True)
def _stencil_2d(u, am, a0, ap, out):
    n0, n1 = u.shape
    for i in range(n0):
        im = _refl(i - 1, n0)
        ip = _refl(i + 1, n0)
        for j in range(n1):
            jm = _refl(j - 1, n1)
            jp = _refl(j + 1, n1)
            out[i, j] = (
                a0[i, j] * u[i, j]
                + am[0, i, j] * u[im, j]
                + ap[0, i, j] * u[ip, j]
                + am[1, i, j] * u[i, jm]
                + ap[1, i, j] * u[i, jp]
            )


@njit(cache=True)
def _stencil_3d(u, am, a0, ap, out):
    n0, n1, n2 = u.shape
    for i in range(n0):
        im = _refl(i - 1, n0)
        ip = _refl(i + 1, n0)
        for j in range(n1):
            jm = _refl(j - 1, n1)
            jp = _refl(j + 1, n1)
            for k in range(n2):
                km = _refl(k - 1, n2)
                kp = _refl(k + 1, n2)
                out[i, j, k] = (
                    a0[i, j, k] * u[i, j, k]
                    + am[0, i, j, k] * u[im, j, k]
                    + ap[0, i, j, k] * u[ip, j, k]
                    + am[1, i, j, k] * u[i, jm, k]
                    + ap[1, i, j, k] * u[i, jp, k]
                    + am[2, i, j, k] * u[i, j, km]
                    + ap[2, i, j, k] * u[i, j, kp]
                )


_STENCILS = {1: _stencil_1d, 2: _stencil_2d, 3: _stencil_3d}


def apply_stencil_numba(u, am, a0, ap):
    out = np.empty_like(u)
    _STENCILS[u.ndim](u, am, a0, ap, out)
    return out


@njit(cache=True)
def _advance_1d(u, am, a0, ap, dt, nsteps):
    buf = np.empty_like(u)
    for _ in range(nsteps):
        _stencil_1d(u, am, a0, ap, buf)
        for i in range(u.shape[0]):
            u[i] += dt * buf[i]


@njit(cache=True)
def _advance_2d(u, am, a0, ap, dt, nsteps):
    buf = np.empty_like(u)
    for _ in range(nsteps):
        _stencil_2d(u, am, a0, ap, buf)
        for i in range(u.shape[0]):
            for j in range(u.shape[1]):
                u[i, j] += dt * buf[i, j]


@njit(cache=True)
def _advance_3d(u, am, a0, ap, dt, nsteps):
    buf = np.empty_like(u)
    for _ in range(nsteps):
        _stencil_3d(u, am, a0, ap, buf)
        for i in range(u.shape[0]):
            for j in range(u.shape[1]):
                for k in range(u.shape[2]):
                    u[i, j, k] += dt * buf[i, j, k]


_ADVANCE = {1: _advance_1d, 2: _advance_2d, 3: _advance_3d}


def advance_numpy(u, am, a0, ap, dt, nsteps):
    u = np.array(u, dtype=np.float64, copy=True)
    for _ in range(nsteps):
        u += dt * apply_stencil_numpy(u, am, a0, ap)
    return u


def advance_numba(u, am, a0, ap, dt, nsteps):
    u = np.array(u, dtype=np.float64, copy=True)
    _ADVANCE[u.ndim](u, am, a0, ap, float(dt), int(nsteps))
    return u


def apply_stencil(u, am, a0, ap):
    if _accel.USE_NUMBA:
        return apply_stencil_numba(u, am, a0, ap)
    return apply_stencil_numpy(u, am, a0, ap)


def advance(u, am, a0, ap, dt, nsteps):
    """Take ``nsteps`` explicit Euler steps ``u += dt * L u``; returns a new array."""
    if _accel.USE_NUMBA:
        return advance_numba(u, am, a0, ap, dt, nsteps)
    return advance_numpy(u, am, a0, ap, dt, nsteps)


# ---------------------------------------------------------------------------
# scaled Hermite recurrence
# ---------------------------------------------------------------------------


def wick_stack_numpy(z, c, nmax):
    """Return ``W`` with ``W[n] = c^{n/2} H_n(z / sqrt(c))`` for ``n <= nmax``.

    ``z`` and ``c`` broadcast against each other; the result has shape
    ``(nmax + 1,) + broadcast_shape``.
    """
    z, c = np.broadcast_arrays(np.asarray(z, dtype=np.float64), np.asarray(c, dtype=np.float64))
    out = np.empty((nmax + 1,) + z.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = z
    for n in range(1, nmax):
        out[n + 1] = z * out[n] - n * c * out[n - 1]
    return out


@njit(cache=True)
def _wick_flat(z, c, nmax, out):
    for i in range(z.shape[0]):
        zi = z[i]
        ci = c[i]
        w0 = 1.0
        out[0, i] = w0
        if nmax >= 1:
            w1 = zi
            out[1, i] = w1
            for n in range(1, nmax):
                w2 = zi * w1 - n * ci * w0
                out[n + 1, i] = w2
                w0 = w1
                w1 = w2


def wick_stack_numba(z, c, nmax):
    z, c = np.broadcast_arrays(np.asarray(z, dtype=np.float64), np.asarray(c, dtype=np.float64))
    shape = z.shape
    zf = np.ascontiguousarray(z).reshape(-1)
    cf = np.ascontiguousarray(c).reshape(-1)
    out = np.empty((nmax + 1, zf.shape[0]))
    _wick_flat(zf, cf, int(nmax), out)
    return out.reshape((nmax + 1,) + shape)


def wick_stack(z, c, nmax):
    if _accel.USE_NUMBA:
        return wick_stack_numba(z, c, nmax)
    return wick_stack_numpy(z, c, nmax)
