import math

import numpy as np
import pytest
from conftest import constant_form

import isoflow as iso
from isoflow.exact import PolyMap

SQRT3 = math.sqrt(3.0)


def lagrangian_plane_form(proj, rng):
    """Exact form with image in the (x1, x3) plane: exactly isotropic."""
    points = np.zeros((proj.mesh.num_vertices, proj.target.dim))
    points[:, 0] = rng.uniform(-1, 1, proj.mesh.num_vertices)
    points[:, 2] = rng.uniform(-1, 1, proj.mesh.num_vertices)
    return iso.differential(PolyMap(proj.mesh, proj.target, points))


# --- moment map ------------------------------------------------------------------


def test_moment_map_complex_line(torus4, target):
    F = constant_form(torus4, target, 0, 0) + constant_form(torus4, target, 1, 1)
    np.testing.assert_array_equal(iso.moment_map(F).values, -np.ones(32))


def test_moment_map_lagrangian_plane(torus4, target):
    F = constant_form(torus4, target, 0, 0) + constant_form(torus4, target, 1, 2)
    np.testing.assert_array_equal(iso.moment_map(F).values, np.zeros(32))


def test_moment_map_anticomplex_line(torus4, target):
    F = constant_form(torus4, target, 0, 0) - constant_form(torus4, target, 1, 1)
    np.testing.assert_array_equal(iso.moment_map(F).values, np.ones(32))


def test_moment_equals_minus_pullback(torus4, target, rng):
    for _ in range(50):
        F = iso.random_form(torus4, target, rng=rng)
        np.testing.assert_allclose(
            iso.moment_map(F).values, -iso.pullback_density(F).values, atol=1e-13)


def test_moment_equals_eigen_split_formula(torus4, target, rng):
    F = iso.random_form(torus4, target, rng=rng)
    plus, minus = iso.split_pm(F)
    predicted = -0.5 * (plus.facet_norm_sq() - minus.facet_norm_sq())
    np.testing.assert_allclose(iso.moment_map(F).values, predicted, atol=1e-13)


def test_moment_unit_gauge_invariant(torus4, target, rng):
    F = iso.random_form(torus4, target, rng=rng)
    for _ in range(10):
        lam = np.exp(1j * rng.uniform(0, 2 * np.pi, torus4.num_facets))
        np.testing.assert_allclose(
            iso.moment_map(iso.gauge_act(lam, F)).values,
            iso.moment_map(F).values, atol=1e-12)


# --- energy ----------------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 4])
def test_energy_of_unit_density(n, target):
    mesh = iso.build_torus_mesh(n)
    F = constant_form(mesh, target, 0, 0) + constant_form(mesh, target, 1, 1)
    assert iso.energy(F) == pytest.approx(SQRT3 / 4, rel=1e-14)


def test_energy_of_zero(torus4, target):
    assert iso.energy(iso.DiscreteOneForm.zeros(torus4, target)) == 0.0


def test_energy_quartic_scaling(torus4, target, rng):
    F = iso.random_form(torus4, target, rng=rng)
    assert iso.energy(2.0 * F) == pytest.approx(16.0 * iso.energy(F), rel=1e-13)


def test_energy_vanishes_iff_isotropic(proj4, rng):
    F = lagrangian_plane_form(proj4, rng)
    assert iso.energy(F) == 0.0
    assert iso.moment_map(F).max_abs() == 0.0


# --- gradient ---------------------------------------------------------------------


def test_gradient_of_isotropic_is_zero(proj4, rng):
    F = lagrangian_plane_form(proj4, rng)
    assert np.abs(iso.gradient(F).coeffs).max() == 0.0


def test_gradient_euler_identity(torus4, target, rng):
    for _ in range(50):
        F = iso.random_form(torus4, target, rng=rng)
        phi = iso.energy(F)
        assert iso.inner_product(iso.gradient(F), F) == pytest.approx(
            4.0 * phi, rel=1e-12)


def test_gradient_directional_finite_difference(torus4, target, rng):
    F = iso.random_form(torus4, target, rng=rng)
    Fdot = iso.random_form(torus4, target, rng=rng)
    exact = iso.inner_product(iso.gradient(F), Fdot)
    t = 1e-5 * iso.norm(F) / iso.norm(Fdot)
    fd = (iso.energy(F + t * Fdot) - iso.energy(F - t * Fdot)) / (2 * t)
    assert fd == pytest.approx(exact, rel=1e-8)


def test_gradient_fd_convergence_order(torus4, target, rng):
    F = iso.random_form(torus4, target, rng=rng)
    Fdot = iso.random_form(torus4, target, rng=rng)
    exact = iso.inner_product(iso.gradient(F), Fdot)

    def fd_error(t):
        return abs((iso.energy(F + t * Fdot) - iso.energy(F - t * Fdot)) / (2 * t) - exact)

    e1, e2 = fd_error(2e-3), fd_error(1e-3)
    order = math.log2(e1 / e2)
    assert order >= 1.9


# --- restricted gradient -----------------------------------------------------------


def test_restricted_gradient_isotropic_exact_is_zero(proj4, rng):
    F = lagrangian_plane_form(proj4, rng)
    assert np.abs(iso.restricted_gradient(proj4, F).coeffs).max() == 0.0


def test_restricted_gradient_is_exact(proj4, rng):
    F = iso.random_exact(proj4, 3, 1.0)
    g = iso.restricted_gradient(proj4, F)
    assert iso.exactness_residual(g) <= 1e-10 * iso.norm(iso.gradient(F))


def test_restricted_gradient_euler_identity(proj4, rng):
    for seed in range(10):
        F = iso.random_exact(proj4, seed, 1.0)
        phi = iso.energy(F)
        assert iso.inner_product(iso.restricted_gradient(proj4, F), F) == pytest.approx(
            4.0 * phi, rel=1e-10)


def test_restricted_gradient_pairs_like_full_gradient(proj4, rng):
    # <restricted g, H> = <g, H> for every exact H
    F = iso.random_exact(proj4, 5, 1.0)
    H = iso.random_exact(proj4, 6, 1.0)
    lhs = iso.inner_product(iso.restricted_gradient(proj4, F), H)
    rhs = iso.inner_product(iso.gradient(F), H)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_restricted_gradient_cubic_scaling(proj4):
    F = iso.random_exact(proj4, 8, 1.0)
    g = iso.restricted_gradient(proj4, F)
    for t in (0.5, 2.0):
        gt = iso.restricted_gradient(proj4, t * F)
        assert iso.norm(gt - t**3 * g) <= 1e-11 * max(1.0, iso.norm(gt))


def test_critical_equals_vanishing_on_exact_forms(proj4, rng):
    for seed in range(5):
        F = iso.random_exact(proj4, 40 + seed, 1.0)
        if iso.energy(F) > 0:
            assert iso.norm(iso.restricted_gradient(proj4, F)) > 0.0
    F0 = lagrangian_plane_form(proj4, rng)
    assert iso.norm(iso.restricted_gradient(proj4, F0)) == 0.0
