import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_cut, random_lame
from oracles import dense_lu_coefficients, generic_constraint_shapes
from ife_elasticity import (
    Ellipse,
    IFEError,
    LameField,
    LineInterface,
    SingularConstruction,
    build_dof_map,
    build_jump_matrices,
    build_mesh,
    build_space,
    check_fundamental_identity,
    construct_ife_shapes,
    evaluate,
    standard_shapes,
)
from ife_elasticity.basis import monomial_grads, monomial_hessians, monomials, reference_element
from ife_elasticity.geometry import build_interface_data, traction
from ife_elasticity.space import StandardShapeSet, standard_coefficients

KINDS = ("linear", "bilinear", "rotated_q1")


def kronecker_target(m):
    T = np.zeros((m, 2 * m, 2))
    for k in range(2 * m):
        T[k % m, k, k // m] = 1.0
    return T


def physical_pieces(shapes):
    """(minus, plus) coefficient tensors in physical labeling."""
    if shapes.data.swapped:
        return shapes.plus, shapes.minus
    return shapes.minus, shapes.plus


def interior_points(geom, rng, n=20):
    Y = geom.origin + geom.h * rng.uniform(0.02, 0.98, (3 * n, 2))
    return Y[geom.contains(Y)][:n]


# ---------------------------------------------------------------------------
# standard shapes
# ---------------------------------------------------------------------------
@pytest.mark.parametrize("kind", KINDS)
def test_standard_shapes_kronecker(kind):
    geom = reference_element(kind, h=0.25, origin=(-1.0, 0.5))
    shapes = standard_shapes(geom)
    assert len(shapes) == 2 * geom.m
    V = np.stack([p.value(geom.sites) for p in shapes], axis=1)
    assert np.allclose(V, kronecker_target(geom.m), atol=1e-14)


def test_bilinear_first_scalar_shape():
    geom = reference_element("bilinear")
    assert np.allclose(geom.scalar_values(geom.sites)[:, 0], [1, 0, 0, 0])
    assert geom.scalar_values(np.array([0.5, 0.5]))[0] == pytest.approx(0.25)


def test_rotated_q1_scalar_basis_at_midpoints():
    geom = reference_element("rotated_q1")
    assert np.allclose(geom.scalar_values(geom.sites), np.eye(4), atol=1e-15)


def test_linear_second_shape_is_x_over_h():
    h = 0.3
    geom = reference_element("linear", h=h)
    X = np.random.default_rng(0).uniform(0, h / 2, (10, 2))
    assert np.allclose(standard_shapes(geom)[1].value(X)[:, 0], X[:, 0] / h)


@pytest.mark.parametrize("kind", KINDS)
def test_standard_shape_scaling(kind):
    rng = np.random.default_rng(1)
    for h in (1.0, 0.1, 0.01):
        geom = reference_element(kind, h=h, origin=(0.2, 0.7))
        X = interior_points(geom, rng)
        s = StandardShapeSet(geom)
        assert np.abs(s.values(X)).max() <= 1.0 + 1e-12
        assert h * np.abs(s.grads(X)).max() <= 4.0
        assert h * h * np.abs(s.hessians(X)).max() <= 4.0


# ---------------------------------------------------------------------------
# IFE construction
# ---------------------------------------------------------------------------
@pytest.mark.parametrize("kind", KINDS)
def test_matched_materials_reduce_to_standard(kind):
    rng = np.random.default_rng(2)
    for _ in range(20):
        data = random_cut(kind, rng)
        shapes = construct_ife_shapes(data, LameField(2.0, 2.0, 3.0, 3.0))
        S = standard_coefficients(data.element)
        assert np.abs(shapes.c0).max() <= 1e-13
        assert np.allclose(shapes.minus, S, atol=1e-13) and np.allclose(shapes.plus, S, atol=1e-13)


@pytest.mark.parametrize("kind", KINDS)
def test_sherman_morrison_matches_dense_solve(kind):
    rng = np.random.default_rng(3)
    for _ in range(200):
        data = random_cut(kind, rng, h=rng.uniform(0.01, 1))
        mat = random_lame(rng)
        shapes = construct_ife_shapes(data, mat)
        if not data.I_minus:
            assert shapes.c.shape[1] == 0
            continue
        c_ref, _ = dense_lu_coefficients(data, mat, data.F0)
        assert np.abs(shapes.c - c_ref).max() <= 1e-10 * max(1.0, np.abs(c_ref).max())


@pytest.mark.parametrize("kind", KINDS)
def test_shapes_match_generic_constraint_oracle(kind):
    rng = np.random.default_rng(4)
    for _ in range(100):
        data = random_cut(kind, rng, h=0.2, origin=(-0.4, 0.1), margin=0.02)
        mat = random_lame(rng, 0.1, 10.0)
        shapes = construct_ife_shapes(data, mat)
        ref_minus, ref_plus = generic_constraint_shapes(data, mat, data.F0)
        minus, plus = physical_pieces(shapes)
        scale = max(1.0, np.abs(ref_minus).max(), np.abs(ref_plus).max())
        assert np.abs(minus - ref_minus).max() <= 1e-9 * scale
        assert np.abs(plus - ref_plus).max() <= 1e-9 * scale


@pytest.mark.parametrize("kind", KINDS)
def test_partition_of_unity_on_both_pieces(kind):
    rng = np.random.default_rng(5)
    for _ in range(50):
        data = random_cut(kind, rng, h=0.1)
        shapes = construct_ife_shapes(data, random_lame(rng, 0.1, 100))
        geom = shapes.geom
        m, h = geom.m, geom.h
        X = interior_points(geom, rng)
        for piece in (shapes.minus, shapes.plus):
            # evaluate each polynomial piece everywhere, not only on its own side
            xi = geom.to_local(X)
            V = np.einsum("sck,nk->nsc", piece, monomials(kind, xi))
            G = np.einsum("sck,nkd->nscd", piece, monomial_grads(kind, xi)) / h
            H = np.einsum("sck,nkab->nscab", piece, monomial_hessians(kind, xi)) / h**2
            assert np.allclose(V[:, :m].sum(axis=1), [1, 0], atol=1e-10)
            assert np.allclose(V[:, m:].sum(axis=1), [0, 1], atol=1e-10)
            assert h * np.abs(G[:, :m].sum(axis=1)).max() <= 1e-10
            assert h * np.abs(G[:, m:].sum(axis=1)).max() <= 1e-10
            assert h * h * np.abs(H[:, :m].sum(axis=1)).max() <= 1e-10
            assert h * h * np.abs(H[:, m:].sum(axis=1)).max() <= 1e-10


@settings(max_examples=60, deadline=None)
@given(
    kind=st.sampled_from(KINDS),
    seed=st.integers(0, 2**32 - 1),
    log_h=st.floats(-4, 0),
)
def test_ife_conditions_hold(kind, seed, log_h):
    rng = np.random.default_rng(seed)
    h = 10.0**log_h
    data = random_cut(kind, rng, h=h, origin=tuple(rng.uniform(-1, 1, 2)))
    mat = random_lame(rng, 0.1, 100)
    shapes = construct_ife_shapes(data, mat)
    geom = shapes.geom
    # nodal values
    assert np.allclose(shapes.values(geom.sites), kronecker_target(geom.m), atol=1e-10)
    # continuity along l
    t = np.linspace(0, 1, 7)[:, None]
    on_line = data.D + t * (data.E - data.D)
    for k in range(shapes.n_shapes):
        assert np.allclose(shapes.piece(k, 1).value(on_line), shapes.piece(k, -1).value(on_line), atol=1e-10)
        o = data.oriented(mat)
        tp = traction(shapes.piece(k, 1).grad(data.F0), o.lambda_plus, o.mu_plus, data.nbar)
        tm = traction(shapes.piece(k, -1).grad(data.F0), o.lambda_minus, o.mu_minus, data.nbar)
        assert np.abs(tp - tm).max() <= 1e-10 * (o.lambda_plus + 2 * o.mu_plus) / h


def test_traction_at_requested_point():
    rng = np.random.default_rng(6)
    data = random_cut("bilinear", rng)
    mat = random_lame(rng, 0.5, 5)
    o = data.oriented(mat)
    F = 0.5 * (data.D + data.E)
    for option in ("midpoint", F):
        shapes = construct_ife_shapes(data, mat, option)
        assert np.allclose(shapes.F, F)
        for k in range(shapes.n_shapes):
            tp = traction(shapes.piece(k, 1).grad(F), o.lambda_plus, o.mu_plus, data.nbar)
            tm = traction(shapes.piece(k, -1).grad(F), o.lambda_minus, o.mu_minus, data.nbar)
            assert np.allclose(tp, tm, atol=1e-10)
    with pytest.raises(ValueError):
        construct_ife_shapes(data, mat, "centroid")


def test_singular_system_is_reported():
    # at F0 g_n lies in [0, 1], which rules out singularity; a user point far along l gives
    # g_n < 0, and with lambda_hat = 0 the choice mu_hat g_n = -mu_minus makes Xi singular
    geom = reference_element("bilinear")
    data = build_interface_data(geom, np.array([0.4, 0.0]), np.array([0.0, 0.5]), 0, 3, geom.polygon[2], 1)
    F = data.D + 10.0 * (data.E - data.D)
    g_n = build_jump_matrices(data, LameField(1.0, 1.0, 1.0, 1.0), F).g_n
    assert g_n < 0
    mat = LameField(1.0, 1.0, 1.0, 1.0 - 1.0 / g_n)
    with pytest.raises(SingularConstruction) as info:
        construct_ife_shapes(data, mat, F)
    assert info.value.stage == "construct"
    assert abs(info.value.det) <= 1e-12
    assert "det" in str(info.value)
    construct_ife_shapes(data, mat)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------
def test_evaluate_kronecker_and_errors():
    rng = np.random.default_rng(7)
    data = random_cut("bilinear", rng)
    shapes = construct_ife_shapes(data, random_lame(rng, 0.1, 10))
    geom = shapes.geom
    for i in range(shapes.n_shapes):
        expected = np.zeros(2)
        expected[i // geom.m] = 1.0
        assert np.allclose(evaluate(shapes, i, geom.sites[i % geom.m]), expected, atol=1e-12)
    assert evaluate(shapes, 0, geom.sites[0], "grad").shape == (2, 2)
    assert evaluate(shapes, 0, geom.sites[0], "hess").shape == (2, 2, 2)
    with pytest.raises(IFEError):
        evaluate(shapes, 0, geom.origin + np.array([2.0, 0.5]) * geom.h)
    with pytest.raises(ValueError):
        evaluate(shapes, 0, geom.sites[0], "laplacian")


def test_evaluate_uses_plus_piece_on_the_line():
    rng = np.random.default_rng(8)
    data = random_cut("rotated_q1", rng)
    shapes = construct_ife_shapes(data, random_lame(rng, 0.1, 10))
    X = 0.5 * (data.D + data.E)
    assert shapes.piece_side(X) == 1
    for i in range(shapes.n_shapes):
        assert np.allclose(evaluate(shapes, i, X), shapes.piece(i, 1).value(X))
        assert np.allclose(shapes.piece(i, 1).value(X), shapes.piece(i, -1).value(X), atol=1e-10)


def test_linear_hessians_vanish():
    rng = np.random.default_rng(9)
    data = random_cut("linear", rng)
    shapes = construct_ife_shapes(data, random_lame(rng))
    X = interior_points(shapes.geom, rng)
    assert np.all(shapes.hessians(X) == 0.0)


# ---------------------------------------------------------------------------
# fundamental identity
# ---------------------------------------------------------------------------
@pytest.mark.parametrize("kind", KINDS)
def test_fundamental_identity(kind):
    rng = np.random.default_rng(10)
    for _ in range(30):
        data = random_cut(kind, rng, h=0.05, origin=(0.1, 0.2))
        shapes = construct_ife_shapes(data, random_lame(rng, 0.1, 100))
        X = interior_points(shapes.geom, rng, 8)
        res = check_fundamental_identity(shapes, X)
        h = shapes.geom.h
        assert max(res["lambda_minus"], res["lambda_plus"]) <= 1e-9 * h
        assert res["d1"] <= 1e-10
        assert res["d2"] * h <= 1e-10
        # any point of l may serve as the reference point
        other = check_fundamental_identity(shapes, X, Xbar=0.3 * data.D + 0.7 * data.E)
        assert max(other.values()) <= 1e-9


def test_fundamental_identity_matched_materials():
    rng = np.random.default_rng(11)
    data = random_cut("bilinear", rng)
    shapes = construct_ife_shapes(data, LameField(1.0, 1.0, 1.0, 1.0))
    res = check_fundamental_identity(shapes, interior_points(shapes.geom, rng))
    assert max(res.values()) <= 1e-13


def test_fundamental_identity_detects_broken_shapes():
    rng = np.random.default_rng(12)
    data = random_cut("bilinear", rng)
    shapes = construct_ife_shapes(data, random_lame(rng, 1, 10))
    shapes.minus = shapes.minus.copy()
    shapes.minus[0, 0, 1] += 0.1
    res = check_fundamental_identity(shapes, interior_points(shapes.geom, rng))
    assert res["lambda_minus"] > 1e-3


# ---------------------------------------------------------------------------
# boundedness
# ---------------------------------------------------------------------------
# max over a seeded sweep of h^k |phi|_{k,inf} (lambda, mu in [0.1, 100]) recorded with about 2x headroom.
# The constants grow with the material contrast: with no minus sites the minus piece is
# psi + L c0 where |c0| scales like mu_hat / mu_minus.
BOUNDEDNESS = {"linear": (16.0, 125.0, 0.0), "bilinear": (2.5, 32.0, 5.5), "rotated_q1": (360.0, 1450.0, 8.0)}


@pytest.mark.parametrize("kind", KINDS)
def test_boundedness_regression(kind):
    rng = np.random.default_rng(11)
    g = (np.arange(20) + 0.5) / 20
    worst = np.zeros(3)
    for _ in range(400):
        data = random_cut(kind, rng, h=0.1, origin=(0.3, -0.2))
        shapes = construct_ife_shapes(data, random_lame(rng, 0.1, 100))
        geom, h = shapes.geom, shapes.geom.h
        X = geom.origin + h * np.array([[x, y] for x in g for y in g])
        X = X[geom.contains(X)]
        worst = np.maximum(
            worst,
            [np.abs(shapes.values(X)).max(), h * np.abs(shapes.grads(X)).max(), h * h * np.abs(shapes.hessians(X)).max()],
        )
    assert np.all(worst <= np.array(BOUNDEDNESS[kind]))


@pytest.mark.parametrize("kind", KINDS)
def test_scaled_seminorms_do_not_depend_on_h(kind):
    rng = np.random.default_rng(13)
    mat = random_lame(rng, 0.1, 100)
    geom1 = reference_element(kind)
    data1 = random_cut(kind, rng)
    ref = None
    for h in (1.0, 1e-2, 1e-4):
        geom = reference_element(kind, h=h, origin=(0.5, -0.25))
        D = geom.origin + h * (data1.D - geom1.origin)
        E = geom.origin + h * (data1.E - geom1.origin)
        data = build_interface_data(
            geom, D, E, data1.D_edge, data1.E_edge, plus_point=geom.sites[0], plus_side=int(data1.site_sides[0])
        )
        shapes = construct_ife_shapes(data, mat)
        X = geom.origin + h * np.array([[0.3, 0.2], [0.1, 0.6], [0.45, 0.45]])
        vals = (shapes.values(X), h * shapes.grads(X), h * h * shapes.hessians(X))
        if ref is None:
            ref = vals
        else:
            for a, b in zip(vals, ref):
                assert np.allclose(a, b, rtol=1e-8, atol=1e-8)


# ---------------------------------------------------------------------------
# global space
# ---------------------------------------------------------------------------
@pytest.mark.parametrize("kind, mesh_kind", [("bilinear", "rectangular"), ("rotated_q1", "rectangular"), ("linear", "triangular")])
def test_build_space_classification(kind, mesh_kind):
    mesh = build_mesh((-1, 1, -1, 1), 10, mesh_kind)
    dm = build_dof_map(mesh, kind)
    iface = Ellipse(0.5, 0.4)
    space = build_space(dm, LameField(1, 5, 2, 10, iface))
    assert len(space.shapes) == len(space.interface_elements) > 0
    for e in range(mesh.n_elements):
        P = mesh.element_polygon(e)
        phi = iface.phi(P)
        s = np.where(np.abs(phi) <= 1e-10, 0.0, np.sign(phi))
        if space.element_side[e] == 0:
            assert e in space.interface_data
        else:
            # non-interface elements have all vertices on their side, up to vertices snapped onto the interface
            assert np.all((s == space.element_side[e]) | (s == 0))
    e = next(iter(space.shapes))
    assert space.shape_set(e) is space.shapes[e]
    assert isinstance(space.shape_set(int(np.flatnonzero(space.element_side != 0)[0])), StandardShapeSet)


def test_build_space_needs_an_interface():
    dm = build_dof_map(build_mesh((0, 1, 0, 1), 4), "bilinear")
    with pytest.raises(ValueError):
        build_space(dm, LameField(1, 1, 1, 1))


def test_build_space_straight_interface_counts():
    mesh = build_mesh((0, 1, 0, 1), 8)
    dm = build_dof_map(mesh, "bilinear")
    space = build_space(dm, LameField(1, 5, 2, 10, LineInterface((1.0, -0.3), (0.51, 0.0))))
    # a steep line through an 8 x 8 grid meets between 8 and 16 cells
    assert 8 <= len(space.shapes) <= 16
    for data in space.interface_data.values():
        assert data.case_label in ("Bil1", "Bil2")
