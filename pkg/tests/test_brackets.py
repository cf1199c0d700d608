import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covbrackets import FieldTheorySpec, SpatialLattice, build_flow, evolve
from covbrackets.brackets import (
    CauchyLinear,
    FieldPoint,
    bracket,
    bracket_batch,
    bracket_spacetime,
    evolve_states,
    hamiltonian_vector_field,
    pullback_observable,
)
from covbrackets.errors import GaugeVariantObservable, MissingProjector, NotHorizontal, OutOfWindow
from covbrackets.oracles import (
    boson_bracket,
    boson_dispersion,
    free_particle_bracket,
    maxwell_transverse_bracket,
)

from conftest import build_pipeline


def final_coords(pipe, z):
    """Final coordinates of an ambient state lying on the final subspace."""
    basis, offset = pipe.chain.final.basis, pipe.chain.final.offset
    u, *_ = np.linalg.lstsq(basis, z - offset, rcond=None)
    np.testing.assert_allclose(basis @ u + offset, z, atol=1e-10)
    return u


def ambient(pipe, u):
    return pipe.chain.final.basis @ u + pipe.chain.final.offset


def field_bracket(pipe, f, g, sigma=0.0, **kw):
    return bracket_spacetime(f, g, pipe.flow, pipe.model, sigma, pipe.chain, pipe.projector, **kw)


# -- free particle -------------------------------------------------------------

def test_free_particle_flow(free_particle):
    np.testing.assert_allclose(evolve(free_particle.flow, [0.0, 1.0], 2.0), [2.0, 1.0], atol=1e-14)
    np.testing.assert_array_equal(evolve(free_particle.flow, [0.3, -0.2], 0.0), [0.3, -0.2])


@pytest.mark.parametrize("t1, sigma", [(2.0, 0.0), (-1.5, 0.5), (4.0, 4.0)])
def test_free_particle_pullback_and_vector_field(free_particle, t1, sigma):
    fp = free_particle
    f = pullback_observable(FieldPoint("q", (), t1), fp.flow, fp.model, sigma)
    np.testing.assert_allclose(f.coefficients, [1.0, t1 - sigma], atol=1e-14)
    assert f.constant == 0.0
    np.testing.assert_allclose(hamiltonian_vector_field(f, fp.chain), [t1 - sigma, -1.0], atol=1e-14)


def test_free_particle_bracket_value(free_particle):
    val = field_bracket(free_particle, FieldPoint("q", (), 2.0), FieldPoint("q", (), 5.0))
    assert val == pytest.approx(-3.0, abs=1e-12)


@pytest.mark.parametrize("mass, t1, t2", [(1.0, 2.0, 5.0), (2.5, -1.0, 3.0), (0.3, 0.7, 0.7)])
@pytest.mark.parametrize("sigma", [-2.0, 0.0, 1.3, 6.0])
def test_free_particle_matches_closed_form(mass, t1, t2, sigma):
    fp = build_pipeline(FieldTheorySpec.free_particle(mass), SpatialLattice((), ()))
    val = field_bracket(fp, FieldPoint("q", (), t1), FieldPoint("q", (), t2), sigma)
    assert val == pytest.approx(free_particle_bracket(mass, t1, t2), abs=1e-12)


# -- vector boson -------------------------------------------------------------

def test_boson_zero_mode_rotates_at_the_mass(boson4):
    model = boson4.model
    z = np.zeros(model.dim)
    z[model.layout.slice("phi")] = 1.0
    u = final_coords(boson4, z)
    for t in (0.3, 1.0, 2.7):
        zt = ambient(boson4, evolve(boson4.flow, u, t))
        np.testing.assert_allclose(zt[model.layout.slice("phi")], np.cos(t), atol=1e-12)
        np.testing.assert_allclose(zt[model.layout.slice("p")], np.sin(t), atol=1e-12)


def test_boson_frequencies_are_the_lattice_dispersion(boson4):
    w = boson_dispersion(boson4.lattice, 1.0)
    np.testing.assert_allclose(boson4.flow.frequencies, np.sort(np.repeat(w, 2)), atol=1e-10)


def test_boson_plane_wave_evolution(boson4):
    model, lat = boson4.model, boson4.lattice
    x = lat.positions()
    k = 2 * np.pi / 4 * np.array([1.0, 2.0, 0.0])
    w = np.sqrt(1.0 + np.sum(4 * np.sin(k / 2) ** 2))
    phi = np.cos(x @ k)
    z = np.zeros(model.dim)
    z[model.layout.slice("phi")] = phi
    z[model.layout.slice("p")] = -w * np.sin(x @ k)
    z[model.layout.slice("beta")] = -lat.grad(phi).ravel()
    u = final_coords(boson4, z)
    t = 1.7
    site = (1, 2, 3)
    g = pullback_observable(FieldPoint("phi", site, t), boson4.flow, model, 0.0)
    expected = np.cos(np.asarray(site) @ k - w * t)
    assert g(u) == pytest.approx(expected, abs=1e-12)


def test_pullback_at_the_slice_time_is_a_unit_functional(boson4):
    model = boson4.model
    f = pullback_observable(FieldPoint("phi", (1, 0, 2), 0.8), boson4.flow, model, 0.8)
    np.testing.assert_allclose(ambient(boson4, np.zeros(boson4.chain.dim)), 0.0)
    r = model.field_functional("phi", (1, 0, 2))
    np.testing.assert_allclose(f.coefficients, boson4.chain.final.basis.T @ r, atol=1e-13)


@pytest.mark.parametrize("h", [1.0, 0.5])
def test_equal_time_canonical_pairs(h):
    pipe = build_pipeline(FieldTheorySpec.vector_boson(1.0, 1, 3), SpatialLattice((3, 3, 3), h))
    x, y = (0, 1, 2), (2, 1, 0)
    phi = FieldPoint("phi", x, 0.4)
    assert field_bracket(pipe, phi, FieldPoint("P0", x, 0.4)) == pytest.approx(h**-3, rel=1e-10)
    assert field_bracket(pipe, phi, FieldPoint("P0", y, 0.4)) == pytest.approx(0.0, abs=1e-10)
    assert field_bracket(pipe, phi, FieldPoint("phi", y, 0.4)) == pytest.approx(0.0, abs=1e-10)
    p = CauchyLinear(-pullback_observable(FieldPoint("P0", x, 0.0), pipe.flow, pipe.model, 0.0).coefficients)
    phi0 = pullback_observable(FieldPoint("phi", x, 0.0), pipe.flow, pipe.model, 0.0)
    assert bracket(phi0, p, pipe.chain) == pytest.approx(-(h**-3), rel=1e-10)


def test_boson_brackets_match_mode_sums(boson4, rng):
    lat = boson4.lattice
    for _ in range(8):
        x1, x2 = rng.integers(0, 4, 3), rng.integers(0, 4, 3)
        t1, t2 = rng.uniform(-3, 3, 2)
        val = field_bracket(boson4, FieldPoint("phi", x1, t1), FieldPoint("P0", x2, t2), 0.5)
        ref = boson_bracket(lat, 1.0, x2, t2, x1, t1)[0]
        assert val == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("sigma", [-4.0, -0.5, 0.0, 2.0, 7.5])
def test_brackets_do_not_depend_on_the_slice(boson4, sigma):
    f, g = FieldPoint("phi", (0, 0, 0), 1.0), FieldPoint("P0", (1, 2, 0), -0.5)
    ref = field_bracket(boson4, f, g, 0.0)
    assert field_bracket(boson4, f, g, sigma) == pytest.approx(ref, abs=1e-10)


def test_boson_isotropy(boson4):
    vals = []
    for axis in range(3):
        x2 = np.zeros(3, dtype=int)
        x2[axis] = 1
        vals.append(field_bracket(boson4, FieldPoint("phi", (0, 0, 0), 0.0), FieldPoint("phi", x2, 1.3)))
    assert max(vals) - min(vals) < 1e-10
    assert abs(vals[0]) > 1e-3


def test_energy_is_conserved(boson4, rng):
    q = boson4.chain.hamiltonian_final.Q
    u = rng.standard_normal(boson4.chain.dim)
    e0 = 0.5 * u @ q @ u
    for t in (0.5, 3.0, 11.0):
        ut = evolve(boson4.flow, u, t)
        assert abs(0.5 * ut @ q @ ut - e0) < 1e-10 * max(1.0, abs(e0))


@pytest.mark.parametrize("which", ["boson4", "maxwell4"])
def test_flow_is_symplectic_and_reversible(which, request):
    pipe = request.getfixturevalue(which)
    om = pipe.chain.omega_final
    for t in (0.7, 2.0):
        f = pipe.flow.propagator(t)
        assert np.max(np.abs(f.T @ om @ f - om)) < 1e-10
        back = pipe.flow.propagator(-t) @ f
        assert np.max(np.abs(back - np.eye(pipe.chain.dim))) < 1e-12


def test_leapfrog_stays_bounded_over_many_steps(rng):
    spec = FieldTheorySpec.vector_boson(1.0, 1, 1)
    pipe = build_pipeline(spec, SpatialLattice((8,), 1.0), method="leapfrog", dt=0.1)
    q = pipe.chain.hamiltonian_final.Q
    u = rng.standard_normal(pipe.chain.dim)
    e0 = 0.5 * u @ q @ u
    ut = evolve(pipe.flow, u, 1000.0)
    assert abs(0.5 * ut @ q @ ut - e0) < 1e-2 * abs(e0)


def test_leapfrog_converges_to_the_spectral_flow(boson4, rng):
    u = rng.standard_normal(boson4.chain.dim)
    ref = evolve(boson4.flow, u, 1.0)
    errs = []
    for dt in (0.02, 0.01):
        lf = build_flow(boson4.chain, None, boson4.model, method="leapfrog", dt=dt)
        errs.append(np.linalg.norm(evolve(lf, u, 1.0) - ref))
    assert errs[1] < errs[0] / 3.5


# -- electrodynamics ----------------------------------------------------------

def test_constant_mode_drifts(maxwell4):
    model, n = maxwell4.model, maxwell4.lattice.n_sites
    z = np.zeros(model.dim)
    a = model.layout.slice("a")
    p = model.layout.slice("p")
    z[a.start:a.start + n] = 1.0
    z[p.start + n:p.start + 2 * n] = 0.5
    u = final_coords(maxwell4, z)
    lf = build_flow(maxwell4.chain, maxwell4.projector, model, method="leapfrog", dt=0.01)
    for t in (0.5, 2.0):
        zt = ambient(maxwell4, evolve(maxwell4.flow, u, t))
        np.testing.assert_allclose(zt[a].reshape(3, n), np.outer([1.0, -0.5 * t, 0.0], np.ones(n)), atol=1e-12)
        np.testing.assert_allclose(zt[p].reshape(3, n), np.outer([0.0, 0.5, 0.0], np.ones(n)), atol=1e-12)
        np.testing.assert_allclose(ambient(maxwell4, evolve(lf, u, t)), zt, atol=1e-10)


def test_gauss_law_is_preserved(maxwell4, rng):
    model, lat = maxwell4.model, maxwell4.lattice
    u = maxwell4.projector.horizontal(rng.standard_normal(maxwell4.chain.dim))
    for z in evolve_states(maxwell4.flow, u, [0.0, 1.0, 4.0]):
        assert np.max(np.abs(lat.div(z[model.layout.slice("p")].reshape(3, -1)))) < 1e-10


def test_transverse_brackets_match_mode_sums(maxwell4, rng):
    lat = maxwell4.lattice
    for _ in range(6):
        c1, c2 = rng.integers(0, 3, 2)
        x1, x2 = rng.integers(0, 4, 3), rng.integers(0, 4, 3)
        t1, t2 = rng.uniform(-2, 2, 2)
        val = field_bracket(maxwell4, FieldPoint(f"AT{c1 + 1}", x1, t1), FieldPoint(f"AT{c2 + 1}", x2, t2))
        ref = maxwell_transverse_bracket(lat, c2, x2, t2, c1, x1, t1)[0]
        assert val == pytest.approx(ref, abs=1e-10)


def test_gauge_invariant_observables_ignore_gauge_shifts(maxwell4, rng):
    f = pullback_observable(FieldPoint("AT2", (1, 1, 0), 1.5), maxwell4.flow, maxwell4.model, 0.0)
    u = maxwell4.projector.horizontal(rng.standard_normal(maxwell4.chain.dim))
    shift = maxwell4.chain.kernel_final.basis @ rng.standard_normal(maxwell4.chain.kernel_final.dim)
    assert abs(f(u + shift) - f(u)) < 1e-10


def test_gauge_variant_observable_is_rejected(maxwell4):
    with pytest.raises(GaugeVariantObservable):
        field_bracket(maxwell4, FieldPoint("A2", (1, 0, 0), 1.0), FieldPoint("AT1", (0, 0, 0), 0.5))


def test_missing_projector(maxwell4):
    f = pullback_observable(FieldPoint("AT1", (0, 0, 0), 0.0), maxwell4.flow, maxwell4.model, 0.0)
    with pytest.raises(MissingProjector):
        bracket(f, f, maxwell4.chain, None)
    with pytest.raises(MissingProjector):
        build_flow(maxwell4.chain, None, maxwell4.model)


def test_vertical_datum_is_rejected(maxwell4):
    with pytest.raises(NotHorizontal):
        evolve(maxwell4.flow, maxwell4.chain.kernel_final.basis[:, 0], 1.0)


def test_observation_window():
    fp = build_pipeline(FieldTheorySpec.free_particle(1.0), SpatialLattice((), ()), window=(0.0, 5.0))
    field_bracket(fp, FieldPoint("q", (), 5.0), FieldPoint("q", (), 0.0))
    with pytest.raises(OutOfWindow):
        field_bracket(fp, FieldPoint("q", (), 5.5), FieldPoint("q", (), 0.0))


# -- algebraic properties -----------------------------------------------------

coeff = st.lists(st.floats(-3, 3), min_size=2, max_size=2)


@settings(max_examples=50, deadline=None)
@given(coeff, coeff, coeff, st.floats(-2, 2), st.floats(-5, 5))
def test_bracket_is_antisymmetric_and_bilinear(free_particle, a, b, c, lam, const):
    ch = free_particle.chain
    f, g, h = CauchyLinear(a), CauchyLinear(b), CauchyLinear(c, const)
    assert bracket(f, g, ch) == pytest.approx(-bracket(g, f, ch), abs=1e-12)
    assert bracket(f, f, ch) == pytest.approx(0.0, abs=1e-12)
    mix = CauchyLinear(np.asarray(a) + lam * np.asarray(c))
    assert bracket(mix, g, ch) == pytest.approx(bracket(f, g, ch) + lam * bracket(h, g, ch), abs=1e-10)


def test_jacobi_identity(boson4, rng):
    # brackets of linear functionals are constants, so nested brackets vanish
    # and the identity reduces to antisymmetry of the Poisson tensor
    fs = [CauchyLinear(rng.standard_normal(boson4.chain.dim)) for _ in range(3)]
    m = np.array([[bracket(f, g, boson4.chain) for g in fs] for f in fs])
    np.testing.assert_allclose(m, -m.T, atol=1e-10)


def test_batch_preserves_order(boson4):
    obs = [FieldPoint("phi", (i, 0, 0), 0.1 * i) for i in range(4)]
    pairs = [(obs[i], FieldPoint("P0", (0, j, 0), 0.3 * j)) for i in range(4) for j in range(3)]
    vals = bracket_batch(pairs, boson4.flow, boson4.model, 0.0, boson4.chain, max_workers=4)
    ref = [field_bracket(boson4, f, g) for f, g in pairs]
    np.testing.assert_allclose(vals, ref, atol=1e-13)


@pytest.mark.parametrize("which, f, g", [
    ("boson4", FieldPoint("phi", (0, 1, 0), 0.4), FieldPoint("P0", (1, 1, 3), 2.0)),
    ("maxwell4", FieldPoint("AT1", (0, 1, 0), 0.4), FieldPoint("AT3", (1, 1, 3), 2.0)),
])
def test_cross_check_agrees(which, f, g, request):
    pipe = request.getfixturevalue(which)
    assert field_bracket(pipe, f, g, cross_check=True) == pytest.approx(field_bracket(pipe, f, g), abs=1e-12)
