import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pytest

from covbrackets import (
    FieldTheorySpec,
    SpatialLattice,
    build_flow,
    build_slice_model,
    coulomb_projector,
    slice_constraints,
)
from covbrackets.presymp import Classification

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


@dataclass
class Pipeline:
    """Model, constraint chain, connection and flow with build timings."""

    spec: object
    lattice: object
    model: object
    chain: object
    projector: object
    flow: object
    timings: dict = field(default_factory=dict)

    @property
    def total_time(self):
        return sum(self.timings.values())


def build_pipeline(spec, lattice, window=None, method="spectral", dt=None):
    timings = {}
    t = time.perf_counter()
    model = build_slice_model(spec, lattice)
    chain = slice_constraints(model)
    timings["constraints"] = time.perf_counter() - t
    t = time.perf_counter()
    proj = coulomb_projector(chain, model) if chain.classification is Classification.GAUGE else None
    timings["projector"] = time.perf_counter() - t
    t = time.perf_counter()
    flow = build_flow(chain, proj, model, method=method, dt=dt, window=window)
    timings["flow"] = time.perf_counter() - t
    return Pipeline(spec, lattice, model, chain, proj, flow, timings)


@pytest.fixture(scope="session")
def free_particle():
    return build_pipeline(FieldTheorySpec.free_particle(1.0), SpatialLattice((), ()))


@pytest.fixture(scope="session")
def boson4():
    return build_pipeline(FieldTheorySpec.vector_boson(1.0, 1, 3), SpatialLattice((4, 4, 4), 1.0))


@pytest.fixture(scope="session")
def maxwell4():
    return build_pipeline(FieldTheorySpec.electrodynamics(), SpatialLattice((4, 4, 4), 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[name])
