"""Coulomb-gauge connection on the final constraint subspace.

The kernel of the final two-form of the Maxwell slice consists of gradient
shifts of the vector potential. The connection used here is the orthogonal
projector onto those directions, so horizontal vectors have transverse
(divergence-free) potential.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import KernelMismatch, NotGauge, ShapeMismatch
from .presymp import Classification, null_space
from .lattice import SpatialLattice

PROJECTOR_TOL = 1e-10


@lru_cache(maxsize=8)
def _poisson_pinv(lattice):
    """Pseudo-inverse of ``-div grad`` (positive semidefinite, constants removed)."""
    g = lattice.gradient_matrix.toarray()
    lap = g.T @ g
    w, v = np.linalg.eigh(lap)
    keep = w > 1e-10 * max(w[-1], 1.0)
    inv = (v[:, keep] / w[keep]) @ v[:, keep].T
    inv.setflags(write=False)
    return inv


def helmholtz_decompose(lattice, v):
    """Split a link field into transverse and longitudinal parts.

    Parameters
    ----------
    lattice : SpatialLattice
    v : array_like, shape (d, N)

    Returns
    -------
    transverse, longitudinal : ndarray, shape (d, N)
        ``longitudinal`` is a lattice gradient and ``transverse`` has zero
        backward-difference divergence.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (lattice.ndim, lattice.n_sites):
        raise ShapeMismatch(f"expected shape {(lattice.ndim, lattice.n_sites)}, got {v.shape}")
    # -div = grad^T, so psi solves grad^T grad psi = grad^T v
    rhs = -lattice.div(v)
    psi = _poisson_pinv(lattice) @ rhs
    lon = lattice.grad(psi)
    return v - lon, lon


@dataclass(frozen=True)
class ConnectionProjector:
    """Vertical projector ``P`` in final coordinates.

    ``P`` is idempotent, its range is the kernel of the final two-form, and
    ``ker P`` is the horizontal subspace.
    """

    matrix: np.ndarray
    kernel_basis: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def apply(self, x):
        return self.matrix @ np.asarray(x, dtype=np.float64)

    def horizontal(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x - self.matrix @ x

    def horizontal_basis(self):
        return null_space(self.matrix, scale=1.0)

    def idempotency_residual(self):
        m = self.matrix
        return float(np.max(np.abs(m @ m - m))) if m.size else 0.0

    def range_residual(self, omega_final):
        return float(np.max(np.abs(np.asarray(omega_final) @ self.matrix))) if self.matrix.size else 0.0


def coulomb_projector(chain, model, tol=PROJECTOR_TOL):
    """Projector onto gradient directions of the vector potential.

    Raises
    ------
    NotGauge
        If the final two-form is non-degenerate.
    KernelMismatch
        If the gradient directions do not span the kernel.
    """
    if chain.classification is not Classification.GAUGE:
        raise NotGauge("final two-form is non-degenerate; no connection is needed")
    lattice = model.lattice
    if "a" not in model.layout.names():
        raise KernelMismatch("model has no vector-potential block")
    g = lattice.gradient_matrix.toarray()
    amb = np.zeros((model.dim, g.shape[1]))
    amb[model.layout.slice("a")] = g
    basis = chain.final.basis
    coords = basis.T @ amb
    if np.max(np.abs(basis @ coords - amb)) > tol * (1.0 + np.max(np.abs(amb))):
        raise KernelMismatch("gradient directions are not tangent to the final subspace")
    u, s, _ = np.linalg.svd(coords, full_matrices=False)
    rank = int(np.count_nonzero(s > 1e-10 * s[0])) if s.size else 0
    w = u[:, :rank]
    ker = chain.kernel_final
    if rank != ker.dim:
        raise KernelMismatch(f"gradient directions span {rank} dimensions, kernel has {ker.dim}")
    om = chain.omega_final
    if rank and np.max(np.abs(om @ w)) > tol * (1.0 + np.max(np.abs(om))):
        raise KernelMismatch("gradient directions are not in the kernel of the final form")
    proj = ConnectionProjector(w @ w.T, w)
    if proj.idempotency_residual() > 1e-12:
        raise KernelMismatch("projector is not idempotent")
    return proj
