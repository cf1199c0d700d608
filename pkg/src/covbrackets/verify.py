"""Invariant suite run by ``covbrackets verify``."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import oracles
from .brackets import FieldPoint, evolve
from .ddw import ddw_residual, interior_max
from .errors import CovBracketError, NonAntisymmetric
from .presymp import PresymplecticSystem, orthosymplectic_complement
from .pipeline import Session


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tol: float
    passed: bool
    detail: str = ""

    def to_dict(self):
        d = asdict(self)
        d["value"] = float(d["value"])
        return d


def _check(name, value, tol, detail=""):
    value = float(value)
    return Check(name, value, tol, bool(np.isfinite(value) and value <= tol), detail)


def _default_pair(session):
    kind = session.config.model.kind
    lat = session.lattice
    site = (0,) * lat.ndim
    other = tuple(min(1, n - 1) for n in lat.shape)
    lo, hi = session.config.time.window
    t1, t2 = lo + 0.3 * (hi - lo), lo + 0.8 * (hi - lo)
    if kind == "free_particle":
        return FieldPoint("q", (), t1), FieldPoint("q", (), t2)
    if kind == "vector_boson":
        return FieldPoint("phi", site, t1), FieldPoint("P0", other, t2)
    return FieldPoint("AT1", site, t1), FieldPoint("AT2", other, t2)


def _oracle_value(session, f, g):
    cfg = session.config.model
    lat = session.lattice
    if cfg.kind == "free_particle":
        return oracles.free_particle_bracket(cfg.mass, f.t, g.t)
    if cfg.kind == "vector_boson":
        if f.component == "phi" and g.component == "P0":
            return oracles.boson_bracket(lat, cfg.mass, [g.site], [g.t], [f.site], [f.t])[0]
        return None
    if f.component.startswith("AT") and g.component.startswith("AT"):
        k1, k2 = int(f.component[2]) - 1, int(g.component[2]) - 1
        return oracles.maxwell_transverse_bracket(lat, [k2], [g.site], g.t, [k1], [f.site], f.t)[0]
    return None


def run_checks(session, inject_fault=None):
    """Evaluate all invariants; returns a list of :class:`Check`."""
    tol = session.config.tolerances.bracket_tol
    checks = []
    model = session.model
    system = model.system
    omega = np.array(system.omega)
    if inject_fault == "asymmetric_omega":
        omega[0, -1] += 1e-6
    try:
        system = PresymplecticSystem(omega, system.hamiltonian, system.metadata)
        checks.append(_check("antisymmetry", np.max(np.abs(omega + omega.T)), 1e-12))
    except NonAntisymmetric as exc:
        checks.append(Check("antisymmetry", float(np.max(np.abs(omega + omega.T))), 1e-12, False,
                            f"NonAntisymmetric: {exc}"))
        return checks

    chain = session.chain
    b = chain.final.basis
    checks.append(_check("final_form_pullback", np.max(np.abs(chain.omega_final - b.T @ omega @ b)), 1e-12))

    rng = np.random.default_rng(session.config.seed)
    comp = orthosymplectic_complement(system, chain.final).basis
    worst = 0.0
    for _ in range(5):
        z = chain.final.embed(rng.standard_normal(chain.dim))
        g = system.hamiltonian.gradient(z)
        worst = max(worst, np.max(np.abs(comp.T @ g), initial=0.0) / (1.0 + np.linalg.norm(z)))
    checks.append(_check("final_subspace_stable", worst, tol))

    proj = session.projector
    if proj is not None:
        checks.append(_check("projector_idempotent", proj.idempotency_residual(), 1e-12))
        checks.append(_check("projector_range_in_kernel", proj.range_residual(chain.omega_final), tol))

    flow = session.flow
    times = np.linspace(0.0, session.config.time.window[1] - session.config.time.window[0], 5)
    j1, j2 = session.random_datum(rng), session.random_datum(rng)
    base = j1 @ chain.omega_final @ j2
    drift = max(abs(evolve(flow, j1, t) @ chain.omega_final @ evolve(flow, j2, t) - base) for t in times)
    checks.append(_check("isotropy", drift / max(1.0, abs(base)), tol))
    h = chain.hamiltonian_final
    e0 = h(j1)
    edrift = max(abs(h(evolve(flow, j1, t)) - e0) for t in times)
    if flow.method == "spectral":
        checks.append(_check("energy_conservation", edrift / max(1.0, abs(e0)), tol))
    else:
        checks.append(_check("energy_bounded", edrift / max(1.0, abs(e0)), 1e-1))

    section = session.trajectory(j1)
    res_field, res_mom = ddw_residual(session.spec, session.spacetime, section)
    if session.config.model.kind == "free_particle":
        checks.append(_check("ddw_residual", max(interior_max(res_field), interior_max(res_mom)), 1e-12))
    elif session.config.model.kind == "vector_boson":
        checks.append(_check("ddw_spatial_residual", interior_max(res_field[:, :, 1:]), tol))
    else:
        spatial = [i for i, (m, _) in enumerate([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]) if m > 0]
        checks.append(_check("ddw_spatial_residual", interior_max(res_field[..., spatial]), tol))
        checks.append(_check("gauss_law", interior_max(res_mom[..., 0]), tol))

    f, g = _default_pair(session)
    n = session.config.time.n_steps
    idx = np.unique(np.linspace(0, n, min(10, n + 1)).round().astype(int))
    t0, dt = session.config.time.t0, session.config.time.dt
    vals = [session.brackets([(f, g)], sigma_time=t0 + i * dt)[0] for i in idx]
    checks.append(_check("slice_independence", np.ptp(vals), tol))
    ref = _oracle_value(session, f, g)
    if ref is not None:
        checks.append(_check("oracle_agreement", abs(vals[0] - ref), 1e-8))
    return checks


def verify(session, inject_fault=None):
    """Run the suite; internal errors become failed checks."""
    try:
        return run_checks(session, inject_fault)
    except CovBracketError as exc:
        return [Check("suite", float("nan"), 0.0, False, f"{type(exc).__name__}: {exc}")]
