from dataclasses import replace

import numpy as np
import pytest

from covbrackets import LinearSubspace, SpatialLattice, coulomb_projector, evolve, helmholtz_decompose
from covbrackets.errors import KernelMismatch, NotGauge, ShapeMismatch


def dense_poisson_longitudinal(lat, v):
    """Longitudinal part through a dense least-squares solve of grad psi ~ v."""
    g = lat.gradient_matrix.toarray()
    psi, *_ = np.linalg.lstsq(g, v.ravel(), rcond=None)
    return (g @ psi).reshape(v.shape)


@pytest.mark.parametrize("shape, h", [((4, 4, 4), 1.0), ((3, 5), 0.5), ((6,), 2.0)])
def test_gradient_fields_are_longitudinal(shape, h, rng):
    lat = SpatialLattice(shape, h)
    psi = rng.standard_normal(lat.n_sites)
    psi -= psi.mean()
    v = lat.grad(psi)
    tr, lon = helmholtz_decompose(lat, v)
    assert np.max(np.abs(tr)) < 1e-10
    np.testing.assert_allclose(lon, v, atol=1e-10)


def test_constant_fields_are_transverse():
    lat = SpatialLattice((4, 4, 4), 1.0)
    v = np.outer([1.0, -2.0, 0.5], np.ones(lat.n_sites))
    tr, lon = helmholtz_decompose(lat, v)
    np.testing.assert_allclose(tr, v, atol=1e-12)
    assert np.max(np.abs(lon)) < 1e-12


def test_random_field_decomposition_matches_dense_solve(rng):
    lat = SpatialLattice((4, 4, 4), 1.0)
    v = rng.standard_normal((3, lat.n_sites))
    tr, lon = helmholtz_decompose(lat, v)
    np.testing.assert_allclose(tr + lon, v, rtol=0, atol=1e-14)
    assert np.max(np.abs(lat.div(tr))) < 1e-10
    np.testing.assert_allclose(lon, dense_poisson_longitudinal(lat, v), atol=1e-10)
    # the two parts are orthogonal
    assert abs(np.sum(tr * lon)) < 1e-10 * np.sum(v * v)


def test_helmholtz_shape_check():
    lat = SpatialLattice((4, 4), 1.0)
    with pytest.raises(ShapeMismatch):
        helmholtz_decompose(lat, np.zeros((3, 16)))


# -- connection projector -----------------------------------------------------

def final_coords_of_a_block(maxwell4, a, p=None):
    """Final coordinates of the tangent vector with the given potential and momentum.

    The spatial polymomenta are slaved to the potential on the final
    subspace, so only the ``a`` and ``p`` blocks are prescribed.
    """
    model, chain = maxwell4.model, maxwell4.chain
    rows = np.r_[model.layout.slice("a"), model.layout.slice("p")]
    target = np.concatenate([a.ravel(), np.zeros(a.size) if p is None else p.ravel()])
    w, *_ = np.linalg.lstsq(chain.final.basis[rows], target, rcond=None)
    np.testing.assert_allclose(chain.final.basis[rows] @ w, target, atol=1e-10)
    return w


def test_gradient_tangent_vectors_are_fixed(maxwell4, rng):
    lat = maxwell4.lattice
    v = final_coords_of_a_block(maxwell4, lat.grad(rng.standard_normal(lat.n_sites)))
    np.testing.assert_allclose(maxwell4.projector.apply(v), v, atol=1e-12)


def test_transverse_vectors_are_horizontal(maxwell4, rng):
    lat = maxwell4.lattice
    a, _ = helmholtz_decompose(lat, rng.standard_normal((3, lat.n_sites)))
    p, _ = helmholtz_decompose(lat, rng.standard_normal((3, lat.n_sites)))
    v = final_coords_of_a_block(maxwell4, a, p)
    assert np.max(np.abs(maxwell4.projector.apply(v))) < 1e-12


def test_projector_is_idempotent_onto_the_kernel(maxwell4, rng):
    proj, chain = maxwell4.projector, maxwell4.chain
    assert proj.idempotency_residual() < 1e-12
    assert proj.range_residual(chain.omega_final) < 1e-12
    v = rng.standard_normal(chain.dim)
    pv = proj.apply(v)
    np.testing.assert_allclose(proj.apply(pv), pv, atol=1e-12)
    assert np.max(np.abs(chain.omega_final @ pv)) < 1e-12
    n = maxwell4.lattice.n_sites
    assert np.linalg.matrix_rank(proj.matrix, tol=1e-8) == chain.kernel_final.dim == n - 1


def test_projector_extracts_the_longitudinal_potential(maxwell4, rng):
    chain, model, lat, proj = maxwell4.chain, maxwell4.model, maxwell4.lattice, maxwell4.projector
    v = rng.standard_normal(chain.dim)
    amb = chain.final.basis @ proj.apply(v)
    a = (chain.final.basis @ v)[model.layout.slice("a")].reshape(3, lat.n_sites)
    _, lon = helmholtz_decompose(lat, a)
    np.testing.assert_allclose(amb[model.layout.slice("a")], lon.ravel(), atol=1e-10)
    mask = np.ones(model.dim, dtype=bool)
    mask[model.layout.slice("a")] = False
    assert np.max(np.abs(amb[mask])) < 1e-12


def test_projector_has_constant_coefficients(maxwell4):
    again = coulomb_projector(maxwell4.chain, maxwell4.model)
    np.testing.assert_array_equal(again.matrix, maxwell4.projector.matrix)


def test_horizontal_data_stay_horizontal(maxwell4, rng):
    proj, flow = maxwell4.projector, maxwell4.flow
    u = proj.horizontal(rng.standard_normal(maxwell4.chain.dim))
    for t in np.linspace(0.0, 5.0, 11):
        assert np.linalg.norm(proj.apply(evolve(flow, u, t))) < 1e-9


def test_projector_requires_gauge_classification(boson4):
    with pytest.raises(NotGauge):
        coulomb_projector(boson4.chain, boson4.model)


def test_projector_detects_kernel_mismatch(maxwell4):
    chain = maxwell4.chain
    truncated = replace(chain, kernel_final=LinearSubspace(chain.kernel_final.basis[:, :10]))
    with pytest.raises(KernelMismatch):
        coulomb_projector(truncated, maxwell4.model)
