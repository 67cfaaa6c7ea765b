import math

import numpy as np
import pytest
from conftest import constant_form

import isoflow as iso
from isoflow.exact import (
    ExactnessError,
    GramSchmidtProjector,
    PolyMap,
    _residual_detail,
    hat_gradients,
    stiffness_comparison,
)

SQRT3 = math.sqrt(3.0)


def random_map(mesh, target, rng, scale=1.0):
    return PolyMap(mesh, target,
                   rng.uniform(-scale, scale, (mesh.num_vertices, target.dim)))


# --- hat differentials -------------------------------------------------------


def test_hats_partition_unity(torus4, target):
    for j in range(target.dim):
        total = sum(iso.hat_differential(torus4, target, v, j).coeffs
                    for v in range(torus4.num_vertices))
        assert np.abs(total).max() == 0.0


def test_hat_support_is_vertex_star(torus4, target):
    hd = iso.hat_differential(torus4, target, 3, 1)
    per_facet = hd.facet_norm_sq()
    star = np.flatnonzero(per_facet > 0)
    assert len(star) == 6
    incident = {f for f in range(torus4.num_facets) if 3 in torus4.facets[f]}
    assert set(star.tolist()) == incident


def test_hat_star_norms_equal(torus8, target):
    hd = iso.hat_differential(torus8, target, 11, 0)
    per_facet = hd.facet_norm_sq()
    star = per_facet[per_facet > 0]
    # equilateral star: all six facet contributions equal, |grad|^2 = 4 N^2 / 3
    np.testing.assert_allclose(star, 4 * 64 / 3.0, rtol=1e-13)


def test_hat_differential_index_validation(torus4, target):
    with pytest.raises(ValueError):
        iso.hat_differential(torus4, target, 99, 0)
    with pytest.raises(ValueError):
        iso.hat_differential(torus4, target, 0, 7)


# --- stiffness matrix ---------------------------------------------------------


def test_stiffness_row_sums_vanish(torus4):
    L = iso.stiffness_matrix(torus4)
    assert np.abs(np.asarray(L.sum(axis=1))).max() <= 1e-12


def test_stiffness_pattern_is_vertex_adjacency(torus4):
    L = iso.stiffness_matrix(torus4).tocoo()
    adjacent = set()
    for tri in torus4.facets:
        for a in range(3):
            adjacent.add((tri[a], tri[(a + 1) % 3]))
            adjacent.add((tri[(a + 1) % 3], tri[a]))
    for r, c, v in zip(L.row, L.col, L.data):
        if r != c and abs(v) > 1e-14:
            assert (r, c) in adjacent


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_stiffness_entries_independent_of_refinement(n):
    L = iso.stiffness_matrix(iso.build_torus_mesh(n)).tocoo()
    diag = L.data[L.row == L.col]
    off = L.data[L.row != L.col]
    np.testing.assert_allclose(diag, 2 * SQRT3, rtol=1e-13)
    np.testing.assert_allclose(off, -1 / SQRT3, rtol=1e-12)


def test_stiffness_matches_inner_product_oracle(torus4, target):
    # independent quadrature oracle: Gram entries via the forms inner product
    L = iso.stiffness_matrix(torus4).toarray()
    nv = torus4.num_vertices
    hats = [iso.hat_differential(torus4, target, v, 0) for v in range(nv)]
    oracle = np.array([[iso.inner_product(hats[a], hats[b]) for b in range(nv)]
                       for a in range(nv)])
    np.testing.assert_allclose(L, oracle, atol=1e-12)


def test_gram_tensor_structure(torus4, target, rng):
    # <hat_a (x) e_j, hat_b (x) e_k> = delta_jk L_ab on random index pairs
    L = iso.stiffness_matrix(torus4).toarray()
    for _ in range(20):
        a, b = rng.integers(0, torus4.num_vertices, 2)
        j, k = rng.integers(0, target.dim, 2)
        val = iso.inner_product(iso.hat_differential(torus4, target, int(a), int(j)),
                                iso.hat_differential(torus4, target, int(b), int(k)))
        expected = L[a, b] if j == k else 0.0
        assert val == pytest.approx(expected, abs=1e-12)


def test_stiffness_comparison_report(torus4):
    rep = stiffness_comparison(torus4)
    assert rep.diag_geometric == pytest.approx(2 * SQRT3, rel=1e-13)
    assert rep.adjacent_geometric == pytest.approx(-1 / SQRT3, rel=1e-12)
    assert rep.diag_spread <= 1e-12 and rep.adjacent_spread <= 1e-12
    assert rep.max_abs_row_sum <= 1e-12
    # the closed-form pair is what it is, and fails the row-sum identity
    assert rep.diag_closed_form == pytest.approx(7 * SQRT3 / 4)
    assert rep.adjacent_closed_form == pytest.approx(-5 / (4 * SQRT3))
    assert abs(rep.closed_form_row_sum) > 1.0


# --- projector -----------------------------------------------------------------


def test_projector_fixes_exact_forms(proj4, rng):
    weights = rng.uniform(-1, 1, (proj4.mesh.num_vertices, proj4.target.dim))
    coeffs = (proj4.diff_op @ weights).reshape(proj4.mesh.num_facets, 2, proj4.target.dim)
    F = iso.DiscreteOneForm(proj4.mesh, proj4.target, coeffs)
    assert iso.norm(proj4.project(F) - F) <= 1e-10 * iso.norm(F)


def test_projector_kills_constant_forms(proj4, torus4, target):
    for i in range(2):
        for j in range(target.dim):
            const = constant_form(torus4, target, i, j)
            assert iso.norm(proj4.project(const)) <= 1e-13


def test_projector_idempotent(proj4, torus4, target, rng):
    F = iso.random_form(torus4, target, rng=rng)
    PF = proj4.project(F)
    assert iso.norm(proj4.project(PF) - PF) <= 1e-10 * max(iso.norm(PF), 1e-12)


def test_projector_self_adjoint(proj4, torus4, target, rng):
    F = iso.random_form(torus4, target, rng=rng)
    H = iso.random_form(torus4, target, rng=rng)
    lhs = iso.inner_product(proj4.project(F), H)
    rhs = iso.inner_product(F, proj4.project(H))
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_projector_output_is_exact(proj4, torus4, target, rng):
    F = iso.random_form(torus4, target, rng=rng)
    PF = proj4.project(F)
    assert iso.exactness_residual(PF) <= 1e-12 * iso.norm(F)


def test_projector_mismatch_rejected(proj4, torus8, target):
    F = constant_form(torus8, target, 0, 0)
    with pytest.raises(ValueError, match="mesh/target"):
        proj4.project(F)


def test_projector_range_roundtrip(proj4, torus4, target, rng):
    # d(integrate(project(F))) reproduces project(F) on exact inputs
    F = iso.random_exact(proj4, 17, 1.0)
    PF = proj4.project(F)
    f = iso.integrate(PF, 0)
    assert iso.norm(iso.differential(f) - PF) <= 1e-10 * iso.norm(PF)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_gram_schmidt_projector_matches_sparse_solve(n, target):
    mesh = iso.build_torus_mesh(n)
    P = iso.ExactProjector(mesh, target)
    GS = GramSchmidtProjector(mesh, target)
    rng = np.random.default_rng(n)
    for _ in range(3):
        F = iso.random_form(mesh, target, rng=rng)
        diff = iso.norm(GS.project(F) - P.project(F))
        assert diff <= 1e-8 * max(iso.norm(F), 1.0)


def test_pinned_vertex_default_and_custom(torus4, target, rng):
    P0 = iso.ExactProjector(torus4, target)
    P5 = iso.ExactProjector(torus4, target, pinned_vertex=5)
    assert P0.pinned_vertex == 0
    F = iso.random_form(torus4, target, rng=rng)
    # the projector does not depend on the pinned choice
    np.testing.assert_allclose(P0.project(F).coeffs, P5.project(F).coeffs, atol=1e-11)


def test_projector_single_vertex_mesh(torus1, target):
    P = iso.ExactProjector(torus1, target)
    F = constant_form(torus1, target, 0, 0)
    assert iso.norm(P.project(F)) == 0.0


# --- differential ----------------------------------------------------------------


def test_differential_of_constant_map(torus4, target):
    f = PolyMap(torus4, target, np.ones((torus4.num_vertices, target.dim)))
    assert np.abs(iso.differential(f).coeffs).max() == 0.0


def test_differential_of_hat_map(torus4, target):
    points = np.zeros((torus4.num_vertices, target.dim))
    points[6, 2] = 1.0
    f = PolyMap(torus4, target, points)
    expected = iso.hat_differential(torus4, target, 6, 2)
    np.testing.assert_allclose(iso.differential(f).coeffs, expected.coeffs, atol=1e-14)


def test_differential_linear(torus4, target, rng):
    f = random_map(torus4, target, rng)
    g = random_map(torus4, target, rng)
    sum_map = PolyMap(torus4, target, f.points + g.points)
    lhs = iso.differential(sum_map)
    rhs = iso.differential(f) + iso.differential(g)
    assert np.abs(lhs.coeffs - rhs.coeffs).max() <= 1e-13 * max(1, np.abs(lhs.coeffs).max())


# --- integration -------------------------------------------------------------------


def test_integrate_zero_form(torus4, target):
    F = iso.DiscreteOneForm.zeros(torus4, target)
    v0 = np.array([1.0, 2.0, 3.0, 4.0])
    f = iso.integrate(F, 0, v0)
    np.testing.assert_array_equal(f.points, np.tile(v0, (torus4.num_vertices, 1)))


def test_integrate_differential_roundtrip(torus8, target, rng):
    f = random_map(torus8, target, rng)
    F = iso.differential(f)
    back = iso.integrate(F, 0, f.points[0])
    assert np.abs(back.points - f.points).max() <= 1e-10 * max(1, np.abs(f.points).max())


def test_integrate_clifford_roundtrip(torus8):
    f = iso.clifford_sample(torus8, 1.0)
    F = iso.differential(f)
    back = iso.integrate(F, 0, f.points[0])
    assert np.abs(back.points - f.points).max() <= 1e-10


def test_integrate_linearity_about_anchor(proj4, rng):
    F = iso.random_exact(proj4, 23, 1.0)
    v0 = np.array([0.5, -0.5, 1.0, 0.0])
    f1 = iso.integrate(F, 0, v0)
    f2 = iso.integrate(2.0 * F, 0, v0)
    np.testing.assert_allclose(f2.points - v0, 2.0 * (f1.points - v0), atol=1e-12)


def test_integrate_rejects_non_exact(torus4, target):
    F = constant_form(torus4, target, 0, 0)
    with pytest.raises(ExactnessError, match="edge"):
        iso.integrate(F, 0)


def test_integrate_other_anchor(proj4, rng):
    F = iso.random_exact(proj4, 29, 1.0)
    f = iso.integrate(F, x0=7, v0=np.zeros(4))
    assert np.abs(f.points[7]).max() == 0.0
    assert iso.norm(iso.differential(f) - F) <= 1e-11 * iso.norm(F)


# --- exactness residual ---------------------------------------------------------------


def test_residual_of_differentials(torus4, target, rng):
    for _ in range(5):
        f = random_map(torus4, target, rng)
        assert iso.exactness_residual(iso.differential(f)) <= 1e-12


def test_constant_form_has_unit_period_on_unit_torus(torus1, target):
    F = constant_form(torus1, target, 0, 0)
    whitney, period, _ = _residual_detail(F)
    assert whitney.max() <= 1e-15          # globally parallel, so edge-compatible
    assert period.max() == pytest.approx(1.0, rel=1e-14)
    assert iso.exactness_residual(F) == pytest.approx(1.0, rel=1e-14)


def test_zeroed_facet_block_breaks_whitney(proj4, rng):
    F = iso.random_exact(proj4, 31, 1.0)
    coeffs = F.coeffs.copy()
    coeffs[10] = 0.0
    broken = iso.DiscreteOneForm(proj4.mesh, proj4.target, coeffs)
    whitney, _, _ = _residual_detail(broken)
    touched = np.flatnonzero(whitney > 1e-9)
    edge_facets = proj4.mesh.edge_sides[:, :, 0]
    assert len(touched) > 0
    assert all(10 in edge_facets[e] for e in touched)


# --- PolyMap validation -----------------------------------------------------------------


def test_polymap_shape_validation(torus4, target):
    with pytest.raises(ValueError, match="shape"):
        PolyMap(torus4, target, np.zeros((3, 4)))
    bad = np.zeros((torus4.num_vertices, 4))
    bad[0, 0] = np.inf
    with pytest.raises(ValueError, match="finite"):
        PolyMap(torus4, target, bad)


def test_hat_gradients_sum_to_zero(torus4):
    grads = hat_gradients(torus4)
    np.testing.assert_allclose(grads.sum(axis=1), 0.0, atol=1e-12)
