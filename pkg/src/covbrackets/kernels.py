"""Hot numerical kernels with numba and numpy implementations.

Each kernel has a ``*_numpy`` reference version and a ``*_numba`` compiled
version with identical semantics. The un-suffixed name dispatches to one of
them according to :data:`covbrackets._accel.USE_NUMBA`.
"""

import numpy as np

from ._accel import USE_NUMBA, njit


# ---------------------------------------------------------------------------
# periodic one-sided differences
# ---------------------------------------------------------------------------

def _as_3d(f, axis):
    f = np.ascontiguousarray(f, dtype=np.float64)
    axis = axis % f.ndim
    pre = int(np.prod(f.shape[:axis], dtype=np.int64))
    post = int(np.prod(f.shape[axis + 1:], dtype=np.int64))
    return f.reshape(pre, f.shape[axis], post)


def periodic_diff_numpy(f, axis, h, forward=True):
    """Periodic forward (``f[i+1]-f[i]``) or backward difference divided by h."""
    f = np.asarray(f, dtype=np.float64)
    if forward:
        return (np.roll(f, -1, axis=axis) - f) / h
    return (f - np.roll(f, 1, axis=axis)) / h


@njit
def _pdiff3(g, inv_h, forward):
    pre, n, post = g.shape
    out = np.empty_like(g)
    for a in range(pre):
        for i in range(n):
            if forward:
                j = i + 1
                if j == n:
                    j = 0
                for b in range(post):
                    out[a, i, b] = (g[a, j, b] - g[a, i, b]) * inv_h
            else:
                j = i - 1
                if j < 0:
                    j = n - 1
                for b in range(post):
                    out[a, i, b] = (g[a, i, b] - g[a, j, b]) * inv_h
    return out


def periodic_diff_numba(f, axis, h, forward=True):
    f = np.asarray(f, dtype=np.float64)
    g = _as_3d(f, axis)
    return _pdiff3(g, 1.0 / h, bool(forward)).reshape(f.shape)


# ---------------------------------------------------------------------------
# lattice mode sums
# ---------------------------------------------------------------------------

def _time_factor_numpy(omega, tau, kind):
    wt = np.multiply.outer(tau, omega)
    if kind == 0:
        return np.cos(wt)
    safe = np.where(omega == 0.0, 1.0, omega)
    val = np.sin(wt) / safe
    return np.where(omega == 0.0, tau[:, None], val)


def mode_sum_numpy(kvecs, omega, amp, dx, tau, kind):
    """Evaluate ``Re sum_k amp[p,k] T(omega_k, tau_p) exp(i k.dx_p)`` per pair.

    Parameters
    ----------
    kvecs : (K, d) wavevectors.
    omega : (K,) non-negative frequencies.
    amp : (P, K) complex amplitudes.
    dx : (P, d) physical displacements.
    tau : (P,) time differences.
    kind : 0 for ``cos(omega tau)``, 1 for ``sin(omega tau)/omega``
        (``tau`` at zero frequency).
    """
    phase = np.exp(1j * (np.asarray(dx) @ np.asarray(kvecs).T))
    fac = _time_factor_numpy(np.asarray(omega), np.asarray(tau, dtype=float), kind)
    return np.real(np.sum(amp * fac * phase, axis=1))


@njit
def _mode_sum_loop(kvecs, omega, amp, dx, tau, kind):
    npairs = dx.shape[0]
    nk, d = kvecs.shape
    out = np.zeros(npairs)
    for p in range(npairs):
        acc = 0.0
        for k in range(nk):
            arg = 0.0
            for j in range(d):
                arg += kvecs[k, j] * dx[p, j]
            w = omega[k]
            if kind == 0:
                fac = np.cos(w * tau[p])
            elif w == 0.0:
                fac = tau[p]
            else:
                fac = np.sin(w * tau[p]) / w
            a = amp[p, k]
            acc += fac * (a.real * np.cos(arg) - a.imag * np.sin(arg))
        out[p] = acc
    return out


def mode_sum_numba(kvecs, omega, amp, dx, tau, kind):
    return _mode_sum_loop(
        np.ascontiguousarray(kvecs, dtype=np.float64),
        np.ascontiguousarray(omega, dtype=np.float64),
        np.ascontiguousarray(amp, dtype=np.complex128),
        np.ascontiguousarray(dx, dtype=np.float64),
        np.ascontiguousarray(tau, dtype=np.float64),
        int(kind),
    )


if USE_NUMBA:
    periodic_diff = periodic_diff_numba
    mode_sum = mode_sum_numba
else:
    periodic_diff = periodic_diff_numpy
    mode_sum = mode_sum_numpy
