"""Closed-form reference values built from plane-wave mode sums.

These use only the lattice dispersion relations and Fourier symbols, never
the dense matrices of the slice models, so they serve as independent checks.
"""

import numpy as np

from . import kernels


def free_particle_bracket(mass, t1, t2):
    """``{q(t2), q(t1)}`` for a free particle of the given mass."""
    return (t1 - t2) / mass


def lattice_laplacian_symbol(lattice):
    """``sum_j (4/h_j^2) sin^2(k_j h_j / 2)`` for every wavevector."""
    k = lattice.wavevectors()
    h = np.asarray(lattice.spacing)
    return np.sum(4.0 / h**2 * np.sin(0.5 * k * h) ** 2, axis=1)


def boson_dispersion(lattice, mass):
    return np.sqrt(mass**2 + lattice_laplacian_symbol(lattice))


def maxwell_dispersion(lattice):
    return np.sqrt(lattice_laplacian_symbol(lattice))


def _displacements(lattice, x2, x1):
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    return (x2 - x1) * np.asarray(lattice.spacing)


def _broadcast_pairs(dx, amp):
    n = max(dx.shape[0], amp.shape[0])
    dx = np.ascontiguousarray(np.broadcast_to(dx, (n, dx.shape[1])))
    amp = np.ascontiguousarray(np.broadcast_to(amp, (n, amp.shape[1])))
    return dx, amp


def boson_bracket(lattice, mass, x2, t2, x1, t1):
    """``{P^0(t2, x2), phi(t1, x1)}`` for the lattice Klein-Gordon field.

    ``x1``, ``x2`` are integer site coordinates (arrays of shape ``(P, d)``
    for many pairs) and ``t1``, ``t2`` arrays of shape ``(P,)``.
    """
    k = lattice.wavevectors()
    w = boson_dispersion(lattice, mass)
    dx = _displacements(lattice, x2, x1)
    tau = np.atleast_1d(np.asarray(t1, dtype=float) - np.asarray(t2, dtype=float))
    amp = np.ones((dx.shape[0], k.shape[0]), dtype=complex)
    norm = lattice.n_sites * lattice.cell_volume
    return kernels.mode_sum(k, w, amp, dx, tau, 0) / norm


def boson_field_bracket(lattice, mass, x2, t2, x1, t1):
    """``{phi(t2, x2), phi(t1, x1)}`` for the lattice Klein-Gordon field."""
    k = lattice.wavevectors()
    w = boson_dispersion(lattice, mass)
    dx = _displacements(lattice, x2, x1)
    tau = np.atleast_1d(np.asarray(t2, dtype=float) - np.asarray(t1, dtype=float))
    amp = np.ones((dx.shape[0], k.shape[0]), dtype=complex)
    norm = lattice.n_sites * lattice.cell_volume
    return kernels.mode_sum(k, w, amp, dx, tau, 1) / norm


def transverse_symbol(lattice):
    """Fourier symbol of the transverse projector on link fields, ``(K, d, d)``."""
    k = lattice.wavevectors()
    h = np.asarray(lattice.spacing)
    g = (np.exp(1j * k * h) - 1.0) / h
    norm2 = np.sum(np.abs(g) ** 2, axis=1)
    eye = np.eye(lattice.ndim)
    out = np.empty((k.shape[0], lattice.ndim, lattice.ndim), dtype=complex)
    for i in range(k.shape[0]):
        if norm2[i] == 0.0:
            out[i] = eye
        else:
            out[i] = eye - np.outer(g[i], g[i].conj()) / norm2[i]
    return out


def transverse_kernel(lattice, comp2, x2, comp1, x1):
    """Real-space matrix element of the transverse projector."""
    k = lattice.wavevectors()
    sym = transverse_symbol(lattice)
    comp2 = np.atleast_1d(comp2)
    comp1 = np.atleast_1d(comp1)
    dx = _displacements(lattice, x2, x1)
    dx, amp = _broadcast_pairs(dx, sym[:, comp2, comp1].T)
    zeros = np.zeros(k.shape[0])
    return kernels.mode_sum(k, zeros, amp, dx, np.zeros(dx.shape[0]), 0) / lattice.n_sites


def maxwell_transverse_bracket(lattice, comp2, x2, t2, comp1, x1, t1):
    """``{A^T_{comp2}(t2, x2), A^T_{comp1}(t1, x1)}`` in Coulomb gauge.

    Components are 0-based spatial indices. Zero-frequency modes contribute
    ``(t2 - t1)`` in place of ``sin(w tau)/w``.
    """
    k = lattice.wavevectors()
    w = maxwell_dispersion(lattice)
    sym = transverse_symbol(lattice)
    comp2 = np.atleast_1d(comp2)
    comp1 = np.atleast_1d(comp1)
    dx = _displacements(lattice, x2, x1)
    dx, amp = _broadcast_pairs(dx, sym[:, comp2, comp1].T)
    tau = np.broadcast_to(np.asarray(t2, dtype=float) - np.asarray(t1, dtype=float), (dx.shape[0],))
    norm = lattice.n_sites * lattice.cell_volume
    return kernels.mode_sum(k, w, amp, dx, tau, 1) / norm
