"""Assemble model, constraint chain, connection and flow from a run configuration."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .brackets import FieldPoint, bracket_batch, build_flow, evolve_states
from .config import RunConfig
from .ddw import FieldTheorySpec
from .gauge import coulomb_projector
from .lattice import SpacetimeLattice, SpatialLattice
from .presymp import Classification
from .slicing import build_slice_model, curve_to_section, slice_constraints


def spec_from_config(cfg):
    m = cfg.model
    if m.kind == "free_particle":
        return FieldTheorySpec.free_particle(m.mass)
    if m.kind == "vector_boson":
        return FieldTheorySpec.vector_boson(m.mass, m.r, len(m.shape))
    return FieldTheorySpec.electrodynamics()


@dataclass
class Session:
    """Lazily built objects for one run; ``timings`` records build costs."""

    config: RunConfig
    timings: dict = field(default_factory=dict)

    def _timed(self, name, func):
        start = time.perf_counter()
        out = func()
        self.timings[name] = time.perf_counter() - start
        return out

    @cached_property
    def spec(self):
        return spec_from_config(self.config)

    @cached_property
    def lattice(self):
        m = self.config.model
        return SpatialLattice(m.shape, m.h)

    @cached_property
    def spacetime(self):
        t = self.config.time
        m = self.config.model
        return SpacetimeLattice(t.n_steps + 1, t.dt, m.shape, m.h, t.t0)

    @cached_property
    def model(self):
        return self._timed("model", lambda: build_slice_model(self.spec, self.lattice))

    @cached_property
    def chain(self):
        tol = self.config.tolerances
        return self._timed(
            "constraints", lambda: slice_constraints(self.model, tol.rank_rtol, tol.max_iter)
        )

    @cached_property
    def projector(self):
        if self.chain.classification is Classification.GAUGE:
            return self._timed("projector", lambda: coulomb_projector(self.chain, self.model))
        return None

    @cached_property
    def flow(self):
        t = self.config.time
        return self._timed(
            "flow",
            lambda: build_flow(self.chain, self.projector, self.model, self.config.method,
                               dt=t.dt, window=t.window, rank_rtol=self.config.tolerances.rank_rtol),
        )

    @property
    def sigma_time(self):
        return self.config.time.sigma_time

    def observables(self):
        out = []
        for o in self.config.observables:
            out.append(FieldPoint(o.component, o.site, o.t, o.fiber, o.label))
        return out

    def random_datum(self, rng=None):
        """Random horizontal datum on the final subspace."""
        rng = np.random.default_rng(self.config.seed) if rng is None else rng
        u = rng.standard_normal(self.chain.dim)
        if self.projector is not None:
            u = self.projector.horizontal(u)
        return u

    def trajectory(self, u=None):
        """Discretized section obtained by evolving a datum from the first slice."""
        u = self.random_datum() if u is None else u
        times = self.spacetime.times
        states = evolve_states(self.flow, u, times - times[0])
        return curve_to_section(states, self.spacetime, self.model)

    def brackets(self, pairs, sigma_time=None):
        sigma = self.sigma_time if sigma_time is None else sigma_time
        return bracket_batch(pairs, self.flow, self.model, sigma, self.chain, self.projector)
