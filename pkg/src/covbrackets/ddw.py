"""Covariant first-order field equations on a staggered spacetime lattice.

Placement on the lattice
------------------------
Scalars sit on sites, vector-like components on the link from site ``x`` to
``x + e_j`` (stored at index ``x``), and antisymmetric spatial pairs on
plaquettes (also stored at the base site). Spatial derivatives from sites to
links are forward differences, from links back to sites are backward
differences. Time derivatives are second-order centred differences, one-sided
at the first and last time slices.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import kernels
from .errors import ShapeMismatch, UnsupportedSpec
from .lattice import SpacetimeLattice


class MomentaShape(enum.Enum):
    PLAIN = "Plain"
    ANTISYMMETRIC2 = "Antisymmetric2"


def minkowski(n):
    """Diagonal metric ``diag(1, -1, ..., -1)`` in ``n`` dimensions."""
    return np.diag([1.0] + [-1.0] * (n - 1))


def upper_pairs(n):
    """Index pairs ``(mu, nu)`` with ``mu < nu`` in storage order."""
    return list(combinations(range(n), 2))


@dataclass(frozen=True)
class FreeParticle:
    """Non-relativistic particle, energy ``p^2 / 2m``."""

    mass: float = 1.0

    def __post_init__(self):
        if not float(self.mass) > 0:
            raise UnsupportedSpec("mass must be positive")

    def hamiltonian(self, u, rho):
        return np.sum(rho**2, axis=(-2, -1)) / (2 * self.mass)

    def d_du(self, u, rho):
        return np.zeros_like(u)

    def d_drho(self, u, rho):
        return rho / self.mass


@dataclass(frozen=True)
class VectorBoson:
    """Massive scalar multiplet, ``1/2 (eta(rho, rho) + m^2 u^2)``."""

    mass: float = 1.0
    r: int = 1
    spatial_dim: int = 3

    def _eta(self, n):
        return np.diag(minkowski(n))

    def hamiltonian(self, u, rho):
        eta = self._eta(rho.shape[-2])
        kin = np.einsum("m,...ma,...ma->...", eta, rho, rho)
        return 0.5 * (kin + self.mass**2 * np.sum(u**2, axis=-1))

    def d_du(self, u, rho):
        return self.mass**2 * u

    def d_drho(self, u, rho):
        eta = self._eta(rho.shape[-2])
        return eta[:, None] * rho


@dataclass(frozen=True)
class Electrodynamics:
    """Free Maxwell field with antisymmetric polymomenta.

    The field strength is normalised as ``F = (dA - dA^T) / 2``. With the energy
    ``-1/2 sum_{mu<nu} P^{mu nu} P_{mu nu}`` the stationarity conditions read
    ``F_{mu nu} + 1/2 P_{mu nu} = 0`` and ``d_nu P^{mu nu} = 0``.
    """

    def _signs(self, n):
        eta = np.diag(minkowski(n))
        return np.array([eta[m] * eta[v] for m, v in upper_pairs(n)])

    def hamiltonian(self, u, rho):
        s = self._signs(u.shape[-1])
        return -0.5 * np.sum(s * rho**2, axis=-1)

    def d_du(self, u, rho):
        return np.zeros_like(u)

    def d_drho(self, u, rho):
        return -self._signs(u.shape[-1]) * rho


@dataclass(frozen=True)
class FieldTheorySpec:
    """Base dimension, fiber dimension, polymomentum layout and energy density."""

    base_dim: int
    fiber_dim: int
    momenta_shape: MomentaShape
    density: object

    def __post_init__(self):
        d = self.density
        n, r = int(self.base_dim), int(self.fiber_dim)
        if isinstance(d, FreeParticle) and (n, r) != (1, 1):
            raise UnsupportedSpec("a free particle needs base_dim = 1 and fiber_dim = 1")
        if isinstance(d, Electrodynamics):
            if n != 4 or r != 4 or self.momenta_shape is not MomentaShape.ANTISYMMETRIC2:
                raise UnsupportedSpec("electrodynamics needs base_dim = 4 with antisymmetric momenta")
        elif self.momenta_shape is not MomentaShape.PLAIN:
            raise UnsupportedSpec("antisymmetric momenta are only supported for electrodynamics")
        if isinstance(d, VectorBoson) and (r != d.r or n != d.spatial_dim + 1):
            raise UnsupportedSpec("vector boson dimensions disagree with the density")
        if n < 1 or r < 1:
            raise UnsupportedSpec("dimensions must be positive")
        object.__setattr__(self, "base_dim", n)
        object.__setattr__(self, "fiber_dim", r)

    @classmethod
    def free_particle(cls, mass=1.0):
        return cls(1, 1, MomentaShape.PLAIN, FreeParticle(float(mass)))

    @classmethod
    def vector_boson(cls, mass=1.0, r=1, spatial_dim=3):
        return cls(spatial_dim + 1, r, MomentaShape.PLAIN, VectorBoson(float(mass), int(r), int(spatial_dim)))

    @classmethod
    def electrodynamics(cls):
        return cls(4, 4, MomentaShape.ANTISYMMETRIC2, Electrodynamics())

    @property
    def spatial_dim(self):
        return self.base_dim - 1

    @property
    def metric(self):
        return minkowski(self.base_dim)

    @property
    def momenta_components(self):
        if self.momenta_shape is MomentaShape.PLAIN:
            return (self.base_dim, self.fiber_dim)
        return (len(upper_pairs(self.base_dim)),)


@dataclass(frozen=True)
class DiscretizedSection:
    """Field values ``phi`` of shape ``(n_t, N, r)`` and polymomenta.

    ``momenta`` has shape ``(n_t, N, n, r)`` for plain momenta or
    ``(n_t, N, n(n-1)/2)`` for antisymmetric ones (upper pairs in order).
    """

    phi: np.ndarray
    momenta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=np.float64))
        object.__setattr__(self, "momenta", np.asarray(self.momenta, dtype=np.float64))


def check_section(spec, lattice, section):
    nt, ns = lattice.n_t, lattice.n_sites
    want_phi = (nt, ns, spec.fiber_dim)
    want_mom = (nt, ns) + spec.momenta_components
    if lattice.spatial.ndim != spec.spatial_dim:
        raise ShapeMismatch(
            f"lattice has {lattice.spatial.ndim} spatial axes, theory expects {spec.spatial_dim}"
        )
    if section.phi.shape != want_phi:
        raise ShapeMismatch(f"phi has shape {section.phi.shape}, expected {want_phi}")
    if section.momenta.shape != want_mom:
        raise ShapeMismatch(f"momenta have shape {section.momenta.shape}, expected {want_mom}")


def _dt(f, dt):
    n = f.shape[0]
    if n >= 3:
        return np.gradient(f, dt, axis=0, edge_order=2)
    if n == 2:
        return np.gradient(f, dt, axis=0, edge_order=1)
    return np.zeros_like(f)


def _dspace(f, lattice, axis, forward):
    """Spatial difference of an array whose axis 1 is the flattened site index."""
    shape = f.shape
    g = f.reshape(shape[:1] + lattice.spatial_shape + shape[2:])
    out = kernels.periodic_diff(g, 1 + axis, lattice.spacing[axis], forward)
    return out.reshape(shape)


def _derivatives(lattice, f, forward):
    """List of ``D_mu f`` for ``mu = 0..d`` (time centred, space one-sided)."""
    out = [_dt(f, lattice.dt)]
    for j in range(lattice.spatial.ndim):
        out.append(_dspace(f, lattice, j, forward))
    return out


def _field_strength(lattice, a):
    """``(D_mu A_nu - D_nu A_mu) / 2`` for upper pairs; ``a`` has shape ``(n_t, N, n)``."""
    n = a.shape[-1]
    da = [_derivatives(lattice, a[..., nu], True) for nu in range(n)]
    return 0.5 * np.stack([da[nu][mu] - da[mu][nu] for mu, nu in upper_pairs(n)], axis=-1)


def _full_antisym(p, n):
    full = np.zeros(p.shape[:-1] + (n, n))
    for i, (mu, nu) in enumerate(upper_pairs(n)):
        full[..., mu, nu] = p[..., i]
        full[..., nu, mu] = -p[..., i]
    return full


def ddw_residual(spec, lattice, section):
    """Residuals of the first-order field equations.

    Returns
    -------
    res_field : ndarray
        ``D_mu phi^a - dH/drho^mu_a`` with shape ``(n_t, N, n, r)`` for plain
        momenta, or ``F_{mu nu} - 1/2 dH/dP^{mu nu}`` (``F`` the half
        antisymmetrised derivative) with shape
        ``(n_t, N, n(n-1)/2)`` for antisymmetric momenta.
    res_momenta : ndarray
        ``D_mu P^mu_a + dH/dphi^a`` (plain) or ``D_nu P^{mu nu} + dH/dA_mu``,
        shape ``(n_t, N, r)``.

    The first and last time slices use one-sided differences; see
    :func:`interior_max` for the norm used in convergence checks.
    """
    check_section(spec, lattice, section)
    dens = spec.density
    phi, mom = section.phi, section.momenta
    if spec.momenta_shape is MomentaShape.PLAIN:
        dphi = np.stack(_derivatives(lattice, phi, True), axis=2)
        res_field = dphi - dens.d_drho(phi, mom)
        div = _dt(mom[:, :, 0, :], lattice.dt)
        for j in range(lattice.spatial.ndim):
            div = div + _dspace(mom[:, :, j + 1, :], lattice, j, False)
        res_mom = div + dens.d_du(phi, mom)
        return res_field, res_mom
    n = spec.base_dim
    res_field = _field_strength(lattice, phi) - 0.5 * dens.d_drho(phi, mom)
    full = _full_antisym(mom, n)
    res_mom = np.zeros_like(phi)
    for mu in range(n):
        acc = _dt(full[..., mu, 0], lattice.dt)
        for j in range(1, n):
            acc = acc + _dspace(full[..., mu, j], lattice, j - 1, False)
        res_mom[..., mu] = acc
    res_mom = res_mom + dens.d_du(phi, mom)
    return res_field, res_mom


def interior_max(res):
    """Max-abs of a residual array over the interior time slices."""
    res = np.asarray(res)
    if res.shape[0] <= 2:
        return 0.0
    return float(np.max(np.abs(res[1:-1])))


def evaluate_action(spec, lattice, section):
    """Discrete action ``sum_x vol int dt (P^mu_a D_mu phi^a - H)``.

    For antisymmetric momenta the pairing is ``sum_{mu<nu} P^{mu nu} (D_mu A_nu - D_nu A_mu)``.

    The time integral uses trapezoid weights over ``t0 .. t0 + (n_t-1) dt`` and
    the derivatives are the ones used by :func:`ddw_residual`.
    """
    check_section(spec, lattice, section)
    dens = spec.density
    phi, mom = section.phi, section.momenta
    if spec.momenta_shape is MomentaShape.PLAIN:
        dphi = np.stack(_derivatives(lattice, phi, True), axis=2)
        density = np.sum(mom * dphi, axis=(2, 3)) - dens.hamiltonian(phi, mom)
    else:
        curl = 2.0 * _field_strength(lattice, phi)
        density = np.sum(mom * curl, axis=-1) - dens.hamiltonian(phi, mom)
    per_slice = density.sum(axis=1) * lattice.spatial.cell_volume
    if lattice.n_t == 1:
        return 0.0
    return float(np.trapezoid(per_slice, dx=lattice.dt))
