"""Periodic spatial lattices and their product with a uniform time grid."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import ShapeMismatch

MAX_SITES = 1 << 22


@dataclass(frozen=True)
class SpatialLattice:
    """Periodic box of ``shape`` sites with spacing ``spacing`` per axis.

    A zero-dimensional lattice (``shape == ()``) has a single site and is
    used for mechanics.
    """

    shape: tuple
    spacing: tuple

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        spacing = self.spacing
        if np.ndim(spacing) == 0:
            spacing = (float(spacing),) * len(shape)
        spacing = tuple(float(h) for h in spacing)
        if len(spacing) != len(shape):
            raise ShapeMismatch("spacing must have one entry per spatial axis")
        if any(n < 2 for n in shape) or any(not h > 0 for h in spacing):
            raise ShapeMismatch("lattice sizes must be >= 2 and spacings positive")
        if int(np.prod(shape, dtype=np.int64)) > MAX_SITES:
            raise ShapeMismatch(f"lattice has more than {MAX_SITES} sites")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def n_sites(self):
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing)) if self.shape else 1.0

    def site_index(self, site):
        site = tuple(int(s) for s in site)
        if len(site) != self.ndim:
            raise ShapeMismatch(f"site {site} has wrong number of coordinates")
        if self.ndim == 0:
            return 0
        return int(np.ravel_multi_index(site, self.shape, mode="wrap"))

    def site_coords(self, index):
        if self.ndim == 0:
            return ()
        return tuple(int(i) for i in np.unravel_index(index, self.shape))

    def forward_difference(self, axis):
        """Sparse periodic forward difference along ``axis`` (site to link)."""
        return self._diff_matrix(axis, True)

    def backward_difference(self, axis):
        """Sparse periodic backward difference along ``axis`` (link to site)."""
        return self._diff_matrix(axis, False)

    def _diff_matrix(self, axis, forward):
        mats = []
        for j, n in enumerate(self.shape):
            if j == axis:
                eye = sp.identity(n, format="csr")
                shift = sp.eye(n, n, 1 if forward else -1, format="csr") + sp.eye(
                    n, n, -(n - 1) if forward else n - 1, format="csr"
                )
                m = (shift - eye) if forward else (eye - shift)
                mats.append(m / self.spacing[j])
            else:
                mats.append(sp.identity(n, format="csr"))
        out = mats[0]
        for m in mats[1:]:
            out = sp.kron(out, m, format="csr")
        return out.tocsr()

    @cached_property
    def gradient_matrix(self):
        """Stacked forward differences, shape ``(d*N, N)``."""
        return sp.vstack([self.forward_difference(j) for j in range(self.ndim)], format="csr")

    def grad(self, f):
        """Forward-difference gradient of site values ``f`` (shape ``(N,)``), shape ``(d, N)``."""
        g = np.asarray(f, dtype=np.float64).reshape(self.shape)
        return np.stack(
            [kernels.periodic_diff(g, j, self.spacing[j], True).ravel() for j in range(self.ndim)]
        )

    def div(self, v):
        """Backward-difference divergence of link values ``v`` (shape ``(d, N)``)."""
        v = np.asarray(v, dtype=np.float64).reshape((self.ndim,) + self.shape)
        out = np.zeros(self.shape)
        for j in range(self.ndim):
            out += kernels.periodic_diff(v[j], j, self.spacing[j], False)
        return out.ravel()

    def wavevectors(self):
        """All lattice wavevectors ``2 pi n / (N h)``, shape ``(N, d)`` in site order."""
        if self.ndim == 0:
            return np.zeros((1, 0))
        axes = [2 * np.pi * np.fft.fftfreq(n, d=h) for n, h in zip(self.shape, self.spacing)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def positions(self):
        """Physical site positions, shape ``(N, d)``."""
        if self.ndim == 0:
            return np.zeros((1, 0))
        idx = np.indices(self.shape).reshape(self.ndim, -1).T
        return idx * np.asarray(self.spacing)


@dataclass(frozen=True)
class SpacetimeLattice:
    """Uniform time grid ``t0 + n dt`` times a periodic spatial lattice."""

    n_t: int
    dt: float
    spatial_shape: tuple = ()
    spacing: tuple = ()
    t0: float = 0.0

    def __post_init__(self):
        if int(self.n_t) < 2 or not float(self.dt) > 0:
            raise ShapeMismatch("n_t must be >= 2 and dt > 0")
        object.__setattr__(self, "n_t", int(self.n_t))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t0", float(self.t0))
        sl = SpatialLattice(self.spatial_shape, self.spacing)
        object.__setattr__(self, "spatial_shape", sl.shape)
        object.__setattr__(self, "spacing", sl.spacing)

    @property
    def spatial(self):
        return SpatialLattice(self.spatial_shape, self.spacing)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.n_t)

    @property
    def n_sites(self):
        return self.spatial.n_sites
