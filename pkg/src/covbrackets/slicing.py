"""Constant-time slices: phase spaces, restriction maps and section assembly.

Slice layouts (blocks in order)
-------------------------------
mechanics        ``q | p``
vector boson     ``phi (N r) | p (N r) | beta (d N r)``
electrodynamics  ``a (3 N) | p (3 N) | beta (3 N) | a0 (N)``

For the field models the slice momentum is minus the time polymomentum
(``p = -P^0`` for the boson, ``p^k = P^{k0} = -P^{0k}`` for the Maxwell field),
which is what makes the slice flow reproduce the covariant field equations.
The spatial polymomenta become the ``beta`` block and are eliminated by the
constraint algorithm. The scalar potential ``a0`` is carried along so that
Gauss's law appears as a constraint; it is inert on the final subspace and is
pinned to zero there.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .ddw import (
    DiscretizedSection,
    Electrodynamics,
    FieldTheorySpec,
    FreeParticle,
    VectorBoson,
    upper_pairs,
)
from .errors import IndexOutOfRange, LengthMismatch, ShapeMismatch, UnsupportedSpec
from .lattice import SpacetimeLattice, SpatialLattice
from .presymp import (
    DEFAULT_RANK_RTOL,
    PresymplecticSystem,
    QuadraticHamiltonian,
    constraint_algorithm,
    pin_coordinates,
)

SPATIAL_PAIRS = ((0, 1), (0, 2), (1, 2))

# dense assembly guard: a state of this size needs about 1.3 GB per matrix
MAX_DENSE_DIM = 12800


@dataclass(frozen=True)
class SliceLayout:
    """Named contiguous blocks of the slice state vector."""

    blocks: tuple

    @property
    def dim(self):
        return sum(n for _, n in self.blocks)

    def slice(self, name):
        start = 0
        for key, n in self.blocks:
            if key == name:
                return slice(start, start + n)
            start += n
        raise KeyError(name)

    def names(self):
        return tuple(k for k, _ in self.blocks)


@dataclass(frozen=True)
class SliceState:
    """Slice state vector together with its layout."""

    vector: np.ndarray
    layout: SliceLayout

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64)
        if v.shape != (self.layout.dim,):
            raise LengthMismatch(f"state has length {v.size}, layout needs {self.layout.dim}")
        object.__setattr__(self, "vector", v)

    def block(self, name):
        return self.vector[self.layout.slice(name)]


def _kind(spec):
    d = spec.density
    if isinstance(d, FreeParticle):
        return "mechanics"
    if isinstance(d, VectorBoson):
        return "boson"
    if isinstance(d, Electrodynamics):
        return "maxwell"
    raise UnsupportedSpec(f"no slice model for density {type(d).__name__}")


@dataclass(frozen=True)
class SliceModel:
    """Slice phase space of a field theory on a spatial lattice."""

    spec: FieldTheorySpec
    lattice: SpatialLattice
    system: PresymplecticSystem = field(repr=False)
    layout: SliceLayout

    @property
    def kind(self):
        return _kind(self.spec)

    @property
    def dim(self):
        return self.layout.dim

    @property
    def momentum_mask(self):
        """Boolean mask of the ``p`` block, the kinetic part for leapfrog splitting."""
        m = np.zeros(self.dim, dtype=bool)
        m[self.layout.slice("p")] = True
        return m

    @property
    def gauge_parameter_indices(self):
        if "a0" in self.layout.names():
            s = self.layout.slice("a0")
            return tuple(range(s.start, s.stop))
        return ()

    # -- observables ------------------------------------------------------

    def components(self):
        """Names accepted by :meth:`field_functional`."""
        if self.kind == "mechanics":
            return ("q", "p")
        if self.kind == "boson":
            return ("phi", "P0") + tuple(f"P{j + 1}" for j in range(self.lattice.ndim))
        return (
            ("A0", "A1", "A2", "A3", "AT1", "AT2", "AT3")
            + tuple(f"P{m}{n}" for m in range(4) for n in range(4) if m != n)
        )

    def field_functional(self, component, site=(), fiber=0):
        """Ambient covector ``r`` with ``r @ z`` the covariant field value.

        Components are named after the covariant fields (``phi``, ``P0``,
        ``Pj`` for the boson; ``A0..A3``, ``Pmn`` for the Maxwell field;
        ``q``, ``p`` for mechanics). ``ATk`` is the transverse part of the
        vector potential at the site, the gauge-invariant version of ``Ak``.
        """
        lat = self.lattice
        site = tuple(site)
        if len(site) != lat.ndim:
            raise IndexOutOfRange(f"site {site} needs {lat.ndim} coordinates")
        for s, n in zip(site, lat.shape):
            if not 0 <= int(s) < n:
                raise IndexOutOfRange(f"site {site} outside lattice {lat.shape}")
        x = lat.site_index(site)
        n_sites = lat.n_sites
        r = np.zeros(self.dim)
        kind = self.kind
        if kind == "mechanics":
            names = {"q": ("q", 1.0), "phi": ("q", 1.0), "p": ("p", 1.0), "P0": ("p", 1.0)}
            if component not in names:
                raise UnsupportedSpec(f"unknown component {component!r}")
            blk, sign = names[component]
            r[self.layout.slice(blk).start] = sign
            return r
        if kind == "boson":
            rf = self.spec.fiber_dim
            if not 0 <= fiber < rf:
                raise IndexOutOfRange(f"fiber index {fiber} outside 0..{rf - 1}")
            if component == "phi":
                r[self.layout.slice("phi").start + x * rf + fiber] = 1.0
            elif component == "P0":
                r[self.layout.slice("p").start + x * rf + fiber] = -1.0
            elif component.startswith("P") and component[1:].isdigit() and 1 <= int(component[1:]) <= lat.ndim:
                j = int(component[1:]) - 1
                r[self.layout.slice("beta").start + (j * n_sites + x) * rf + fiber] = 1.0
            else:
                raise UnsupportedSpec(f"unknown component {component!r}")
            return r
        if component == "A0":
            r[self.layout.slice("a0").start + x] = 1.0
            return r
        if component in ("A1", "A2", "A3"):
            k = int(component[1]) - 1
            r[self.layout.slice("a").start + k * n_sites + x] = 1.0
            return r
        if component in ("AT1", "AT2", "AT3"):
            k = int(component[2]) - 1
            row = self.transverse_projector[k * n_sites + x]
            s = self.layout.slice("a")
            r[s] = row
            return r
        if len(component) == 3 and component[0] == "P" and component[1:].isdigit():
            m, n = int(component[1]), int(component[2])
            if m == n or m > 3 or n > 3:
                raise UnsupportedSpec(f"unknown component {component!r}")
            sign = 1.0
            if m > n:
                m, n = n, m
                sign = -1.0
            if m == 0:
                r[self.layout.slice("p").start + (n - 1) * n_sites + x] = -sign
            else:
                pair = SPATIAL_PAIRS.index((m - 1, n - 1))
                r[self.layout.slice("beta").start + pair * n_sites + x] = sign
            return r
        raise UnsupportedSpec(f"unknown component {component!r}")

    @cached_property
    def transverse_projector(self):
        """Dense orthogonal projector onto divergence-free link fields."""
        g = self.lattice.gradient_matrix.toarray()
        u, s, _ = np.linalg.svd(g, full_matrices=False)
        rank = int(np.count_nonzero(s > 1e-10 * s[0]))
        lon = u[:, :rank] @ u[:, :rank].T
        return np.eye(g.shape[0]) - lon


def _boson_system(spec, lat):
    n, d, rf = lat.n_sites, lat.ndim, spec.fiber_dim
    vol = lat.cell_volume
    m2 = spec.density.mass**2
    nphi, nbeta = n * rf, d * n * rf
    layout = SliceLayout((("phi", nphi), ("p", nphi), ("beta", nbeta)))
    dim = layout.dim
    omega = np.zeros((dim, dim))
    eye = np.eye(nphi)
    omega[:nphi, nphi:2 * nphi] = vol * eye
    omega[nphi:2 * nphi, :nphi] = -vol * eye
    q = np.zeros((dim, dim))
    sb = layout.slice("beta")
    if d:
        grad = sp.kron(lat.gradient_matrix, sp.identity(rf), format="csr").toarray()
        q[sb, :nphi] = vol * grad
        q[:nphi, sb] = vol * grad.T
        q[sb, sb] = vol * np.eye(nbeta)
    q[nphi:2 * nphi, nphi:2 * nphi] = -vol * eye
    q[:nphi, :nphi] = -vol * m2 * eye
    return omega, q, layout


def _maxwell_system(lat):
    if lat.ndim != 3:
        raise UnsupportedSpec("electrodynamics needs a three-dimensional lattice")
    n = lat.n_sites
    vol = lat.cell_volume
    layout = SliceLayout((("a", 3 * n), ("p", 3 * n), ("beta", 3 * n), ("a0", n)))
    dim = layout.dim
    sa, spp, sb, s0 = (layout.slice(k) for k in ("a", "p", "beta", "a0"))
    omega = np.zeros((dim, dim))
    omega[sa, spp] = vol * np.eye(3 * n)
    omega[spp, sa] = -vol * np.eye(3 * n)
    d = [lat.forward_difference(j).toarray() for j in range(3)]
    curl = np.zeros((3 * n, 3 * n))
    for i, (k, j) in enumerate(SPATIAL_PAIRS):
        curl[i * n:(i + 1) * n, j * n:(j + 1) * n] += d[k]
        curl[i * n:(i + 1) * n, k * n:(k + 1) * n] -= d[j]
    grad = np.vstack(d)
    q = np.zeros((dim, dim))
    q[spp, s0] = vol * grad
    q[s0, spp] = vol * grad.T
    q[sb, sa] = vol * curl
    q[sa, sb] = vol * curl.T
    q[sb, sb] = vol * np.eye(3 * n)
    q[spp, spp] = -vol * np.eye(3 * n)
    return omega, q, layout


def build_slice_model(spec, lattice):
    """Assemble the slice phase space for ``spec`` on a spatial lattice."""
    if isinstance(lattice, SpacetimeLattice):
        lattice = lattice.spatial
    if lattice.ndim != spec.spatial_dim:
        raise ShapeMismatch(
            f"lattice has {lattice.ndim} spatial axes, theory expects {spec.spatial_dim}"
        )
    kind = _kind(spec)
    per_site = {"mechanics": 0, "boson": spec.fiber_dim * (2 + lattice.ndim), "maxwell": 10}[kind]
    if per_site * lattice.n_sites > MAX_DENSE_DIM:
        raise UnsupportedSpec(
            f"slice state of dimension {per_site * lattice.n_sites} exceeds the dense limit {MAX_DENSE_DIM}"
        )
    if kind == "mechanics":
        m = spec.density.mass
        layout = SliceLayout((("q", 1), ("p", 1)))
        omega = np.array([[0.0, 1.0], [-1.0, 0.0]])
        q = np.diag([0.0, 1.0 / m])
    elif kind == "boson":
        omega, q, layout = _boson_system(spec, lattice)
    else:
        omega, q, layout = _maxwell_system(lattice)
    system = PresymplecticSystem(omega, QuadraticHamiltonian(q), {"model": kind})
    return SliceModel(spec, lattice, system, layout)


def build_slice_system(spec, lattice):
    """The :class:`PresymplecticSystem` of a slice; see :func:`build_slice_model`."""
    return build_slice_model(spec, lattice).system


def slice_constraints(model, rank_rtol=DEFAULT_RANK_RTOL, max_iter=64):
    """Run the constraint algorithm and pin inert gauge parameters."""
    res = constraint_algorithm(model.system, rank_rtol=rank_rtol, max_iter=max_iter)
    if model.gauge_parameter_indices:
        res = pin_coordinates(res, model.system, model.gauge_parameter_indices, rank_rtol)
    return res


# -- restriction of covariant sections ----------------------------------------

def restrict_to_slice(section, t_index, model):
    """Slice state at time index ``t_index`` of a discretized section."""
    nt = section.phi.shape[0]
    if not 0 <= t_index < nt:
        raise IndexOutOfRange(f"time index {t_index} outside 0..{nt - 1}")
    phi = section.phi[t_index]
    mom = section.momenta[t_index]
    lat = model.lattice
    n = lat.n_sites
    if phi.shape[0] != n:
        raise ShapeMismatch("section and slice model use different lattices")
    kind = model.kind
    if kind == "mechanics":
        vec = np.array([phi[0, 0], mom[0, 0, 0]])
    elif kind == "boson":
        vec = np.concatenate(
            [phi.ravel(), -mom[:, 0, :].ravel(), np.transpose(mom[:, 1:, :], (1, 0, 2)).ravel()]
        )
    else:
        pairs = upper_pairs(4)
        p = np.stack([-mom[:, pairs.index((0, k))] for k in (1, 2, 3)])
        beta = np.stack([mom[:, pairs.index((j + 1, k + 1))] for j, k in SPATIAL_PAIRS])
        vec = np.concatenate([phi[:, 1:].T.ravel(), p.ravel(), beta.ravel(), phi[:, 0]])
    return SliceState(vec, model.layout)


def curve_to_section(states, lattice, model):
    """Assemble slice states at ``lattice.times`` into a discretized section."""
    states = list(states)
    if len(states) != lattice.n_t:
        raise LengthMismatch(f"{len(states)} states for {lattice.n_t} time slices")
    if lattice.spatial != model.lattice:
        raise ShapeMismatch("spacetime lattice and slice model use different spatial lattices")
    n = model.lattice.n_sites
    spec = model.spec
    phis, moms = [], []
    for st in states:
        vec = st.vector if isinstance(st, SliceState) else np.asarray(st, dtype=np.float64)
        if vec.shape != (model.dim,):
            raise LengthMismatch(f"state has length {vec.size}, layout needs {model.dim}")
        blk = {k: vec[model.layout.slice(k)] for k in model.layout.names()}
        if model.kind == "mechanics":
            phis.append(blk["q"].reshape(1, 1))
            moms.append(blk["p"].reshape(1, 1, 1))
        elif model.kind == "boson":
            rf, d = spec.fiber_dim, model.lattice.ndim
            mom = np.empty((n, d + 1, rf))
            mom[:, 0, :] = -blk["p"].reshape(n, rf)
            mom[:, 1:, :] = np.transpose(blk["beta"].reshape(d, n, rf), (1, 0, 2))
            phis.append(blk["phi"].reshape(n, rf))
            moms.append(mom)
        else:
            pairs = upper_pairs(4)
            phi = np.empty((n, 4))
            phi[:, 0] = blk["a0"]
            phi[:, 1:] = blk["a"].reshape(3, n).T
            mom = np.empty((n, 6))
            p = blk["p"].reshape(3, n)
            beta = blk["beta"].reshape(3, n)
            for k in (1, 2, 3):
                mom[:, pairs.index((0, k))] = -p[k - 1]
            for i, (j, k) in enumerate(SPATIAL_PAIRS):
                mom[:, pairs.index((j + 1, k + 1))] = beta[i]
            phis.append(phi)
            moms.append(mom)
    return DiscretizedSection(np.stack(phis), np.stack(moms))
