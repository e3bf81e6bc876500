import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from se23mef.lie import (
    GroupElement,
    LieDomainError,
    adjoint_matrix,
    compose,
    exp_se23,
    exp_so3,
    hom,
    inverse,
    left_jacobian_so3,
    log_se23,
    log_so3,
    op_F,
    op_Fbar,
    op_G,
    op_Gbar,
    orthonormality_error,
    proj_sym,
    skew,
    vee,
    vex,
    wedge,
)

from conftest import random_group

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec3 = arrays(np.float64, 3, elements=finite)
vec9 = arrays(np.float64, 9, elements=finite)


def series_expm(M, terms=30):
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out


# -- skew / vex ----------------------------------------------------------------


def test_skew_zero():
    assert np.array_equal(skew([0, 0, 0]), np.zeros((3, 3)))


def test_skew_layout_e1():
    expected = np.array([[0, 0, 0], [0, 0, -1], [0, 1, 0]], dtype=float)
    assert np.array_equal(skew([1, 0, 0]), expected)


def test_skew_matches_cross_product(rng):
    for _ in range(200):
        w, u = rng.normal(size=3), rng.normal(size=3)
        np.testing.assert_allclose(skew(w) @ u, np.cross(w, u), atol=1e-14)
        assert np.array_equal(skew(w).T, -skew(w))


def test_vex():
    assert np.array_equal(vex(np.zeros((3, 3))), np.zeros(3))
    assert np.array_equal(vex(skew([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0])


def test_vex_rejects_symmetric_perturbation():
    M = skew([1.0, 2.0, 3.0])
    M[0, 1] += 1e-3
    M[1, 0] += 1e-3
    with pytest.raises(LieDomainError):
        vex(M)


# -- wedge / vee ---------------------------------------------------------------


def test_wedge_zero():
    assert np.array_equal(wedge(np.zeros(9)), np.zeros((5, 5)))


def test_wedge_e3_rotation_layout():
    X = wedge([0, 0, 1, 0, 0, 0, 0, 0, 0])
    assert X[0, 1] == -1.0 and X[1, 0] == 1.0
    X[0, 1] = X[1, 0] = 0.0
    assert not X.any()


def test_wedge_columns():
    X = wedge(np.arange(1.0, 10.0))
    assert np.array_equal(X[:3, 3], [4, 5, 6])
    assert np.array_equal(X[:3, 4], [7, 8, 9])
    assert not X[3:].any()


def test_vee_wedge_roundtrip_fuzz(rng):
    for _ in range(1000):
        xi = rng.normal(scale=5, size=9)
        assert np.array_equal(vee(wedge(xi)), xi)


@given(vec9)
def test_wedge_vee_inverse(xi):
    X = wedge(xi)
    assert np.array_equal(vee(X), xi)
    assert np.array_equal(wedge(vee(X)), X)


def test_vee_rejects_non_algebra():
    X = wedge(np.ones(9))
    X[4, 4] = 1.0
    with pytest.raises(LieDomainError):
        vee(X)
    Y = wedge(np.ones(9))
    Y[0, 0] = 0.1
    with pytest.raises(LieDomainError):
        vee(Y)


# -- group operations ----------------------------------------------------------


def test_compose_identity_and_inverse(rng):
    e = GroupElement.identity()
    for _ in range(50):
        g = random_group(rng)
        ge = compose(g, e)
        assert np.array_equal(ge.R, g.R) and np.array_equal(ge.v, g.v) and np.array_equal(ge.x, g.x)
        np.testing.assert_allclose(compose(g, inverse(g)).as_matrix(), np.eye(5), atol=1e-12)


def test_compose_matches_matrix_product(rng):
    for _ in range(200):
        g, h = random_group(rng), random_group(rng)
        np.testing.assert_allclose(compose(g, h).as_matrix(), g.as_matrix() @ h.as_matrix(), atol=1e-13)
        np.testing.assert_allclose((g @ h).as_matrix(), g.as_matrix() @ h.as_matrix(), atol=1e-13)


def test_inverse(rng):
    e = inverse(GroupElement.identity())
    np.testing.assert_array_equal(e.as_matrix(), np.eye(5))
    for _ in range(100):
        g = random_group(rng)
        np.testing.assert_allclose(inverse(inverse(g)).as_matrix(), g.as_matrix(), atol=1e-13)
        np.testing.assert_allclose(inverse(g).as_matrix(), np.linalg.inv(g.as_matrix()), atol=1e-12)


def test_matrix_roundtrip(rng):
    g = random_group(rng)
    h = GroupElement.from_matrix(g.as_matrix())
    assert np.array_equal(h.R, g.R) and np.array_equal(h.v, g.v) and np.array_equal(h.x, g.x)


def test_from_matrix_rejects_bad_rotation():
    T = np.eye(5)
    T[0, 0] = 1.001
    with pytest.raises(LieDomainError):
        GroupElement.from_matrix(T)
    T = np.eye(5)
    T[0, 0] = -1.0  # reflection
    with pytest.raises(LieDomainError):
        GroupElement.from_matrix(T)


def test_repeated_composition_stays_orthonormal(rng):
    steps = [exp_se23(rng.normal(scale=0.5, size=9)) for _ in range(1000)]
    g = GroupElement.identity()
    worst = 0.0
    for k in range(1_000_000):
        g = compose(g, steps[k % 1000])
        if k % 997 == 0:
            worst = max(worst, orthonormality_error(g.R))
    worst = max(worst, orthonormality_error(g.R))
    assert worst < 1e-9
    assert abs(np.linalg.det(g.R) - 1.0) < 1e-9


# -- exp / log -----------------------------------------------------------------


def test_exp_zero_is_identity():
    np.testing.assert_array_equal(exp_se23(np.zeros(9)).as_matrix(), np.eye(5))


def test_exp_pure_translation_is_exact():
    g = exp_se23([0, 0, 0, 1, 2, 3, 4, 5, 6])
    assert np.array_equal(g.R, np.eye(3))
    assert np.array_equal(g.v, [1, 2, 3])
    assert np.array_equal(g.x, [4, 5, 6])


def test_exp_quarter_turn_against_series():
    xi = np.array([0, 0, math.pi / 2, 1, 0, 0, 0, 0, 0])
    np.testing.assert_allclose(exp_se23(xi).as_matrix(), series_expm(wedge(xi)), atol=1e-10)


def test_exp_against_series_fuzz(rng):
    for _ in range(1000):
        xi = rng.normal(size=9)
        xi *= rng.uniform(0, 2) / np.linalg.norm(xi)
        np.testing.assert_allclose(exp_se23(xi).as_matrix(), series_expm(wedge(xi)), atol=1e-10)


@pytest.mark.parametrize("theta", [0.0, 1e-12, 1e-8, 5e-7, 1e-6, 2e-6, 1e-3])
def test_exp_small_angles(theta):
    axis = np.array([0.3, -0.5, 0.8]) / np.linalg.norm([0.3, -0.5, 0.8])
    xi = np.concatenate([theta * axis, [1.0, -2.0, 0.5], [3.0, 0.0, -1.0]])
    np.testing.assert_allclose(exp_se23(xi).as_matrix(), series_expm(wedge(xi)), atol=1e-14)


def test_left_jacobian_is_integral_of_rotation():
    # J_l(phi) = int_0^1 exp(s phi_x) ds, by Gauss-Legendre quadrature
    phi = np.array([0.4, -1.1, 0.7])
    nodes, weights = np.polynomial.legendre.leggauss(20)
    s = 0.5 * (nodes + 1.0)
    J = sum(0.5 * w * exp_so3(si * phi) for si, w in zip(s, weights))
    np.testing.assert_allclose(left_jacobian_so3(phi), J, atol=1e-13)


def test_log_identity():
    assert np.array_equal(log_se23(GroupElement.identity()), np.zeros(9))


def test_log_exp_roundtrip(rng):
    for _ in range(500):
        xi = rng.normal(scale=2, size=9)
        phi = rng.normal(size=3)
        xi[:3] = phi / np.linalg.norm(phi) * rng.uniform(0, 3)
        np.testing.assert_allclose(log_se23(exp_se23(xi)), xi, atol=1e-9)


def test_exp_log_roundtrip_on_group(rng):
    for _ in range(300):
        g = random_group(rng)
        if np.trace(g.R) <= -1 + 1e-6:
            continue
        np.testing.assert_allclose(exp_se23(log_se23(g)).as_matrix(), g.as_matrix(), atol=1e-9)


def test_log_rejects_half_turn():
    g = GroupElement(exp_so3([0, 0, math.pi - 1e-12]), np.zeros(3), np.zeros(3))
    with pytest.raises(LieDomainError):
        log_se23(g)


def test_log_so3_near_half_turn():
    axis = np.array([1.0, 2.0, -2.0]) / 3.0
    for theta in (2.6, 3.0, 3.14):
        np.testing.assert_allclose(log_so3(exp_so3(theta * axis)), theta * axis, atol=1e-9)


# -- adjoint and the F / G operators -------------------------------------------


def test_adjoint_zero():
    assert np.array_equal(adjoint_matrix(np.zeros(9)), np.zeros((9, 9)))


def test_adjoint_block_layout():
    e1, e2, e3 = np.eye(3)
    ad = adjoint_matrix(np.concatenate([e1, e2, e3]))
    Z = np.zeros((3, 3))
    expected = np.block([[skew(e1), Z, Z], [skew(e2), skew(e1), Z], [skew(e3), Z, skew(e1)]])
    assert np.array_equal(ad, expected)


def test_adjoint_is_commutator(rng):
    for _ in range(1000):
        xi, gamma = rng.normal(size=9), rng.normal(size=9)
        X, Y = wedge(xi), wedge(gamma)
        np.testing.assert_allclose(adjoint_matrix(xi) @ gamma, vee(X @ Y - Y @ X), atol=1e-12)


def test_F_zero_and_layout():
    F0 = op_F(np.zeros(3))
    assert np.array_equal(F0, np.hstack([np.zeros((3, 6)), np.eye(3)]))
    F1 = op_F([1.0, 0.0, 0.0])
    assert np.array_equal(F1[:, :3], [[0, 0, 0], [0, 0, 1], [0, -1, 0]])
    assert np.array_equal(op_Fbar([1.0, 0.0, 0.0])[:3], F1)
    assert not op_Fbar([1.0, 0.0, 0.0])[3:].any()


def test_G_zero_and_layout():
    assert not op_Gbar(np.zeros(3)).any()
    assert not op_G(np.zeros(3)).any()
    e2 = np.array([0.0, 1.0, 0.0])
    Gb = op_Gbar(e2)
    assert np.array_equal(Gb[:3, :3], [[0, 0, 1], [0, 0, 0], [-1, 0, 0]])
    assert np.array_equal(Gb[3, 3:6], e2) and np.array_equal(Gb[4, 6:9], e2)
    assert not Gb[:3, 3:].any()
    assert np.array_equal(op_G(e2), np.hstack([Gb[:3, :3], np.zeros((3, 6))]))


def test_identity_F(rng):
    for _ in range(1000):
        v, xi = rng.normal(size=3), rng.normal(size=9)
        np.testing.assert_allclose(wedge(xi) @ hom(v), op_Fbar(v) @ xi, atol=1e-13)


def test_identity_G(rng):
    for _ in range(1000):
        v, xi = rng.normal(size=3), rng.normal(size=9)
        np.testing.assert_allclose(wedge(xi).T @ hom(v), op_Gbar(v) @ xi, atol=1e-13)


@settings(max_examples=200)
@given(vec3, vec9)
def test_identities_property(v, xi):
    np.testing.assert_allclose(wedge(xi) @ hom(v), op_Fbar(v) @ xi, atol=1e-12)
    np.testing.assert_allclose(wedge(xi).T @ hom(v), op_Gbar(v) @ xi, atol=1e-12)


def test_hom():
    assert np.array_equal(hom([1.0, 2.0, 3.0]), [1, 2, 3, 0, 1])


# -- symmetric projector -------------------------------------------------------


def test_proj_sym(rng):
    S = rng.normal(size=(4, 4))
    S = S + S.T
    assert np.array_equal(proj_sym(S), S)
    K = skew(rng.normal(size=3))
    assert not proj_sym(K).any()
    A = rng.normal(size=(9, 9))
    P = proj_sym(A)
    assert np.array_equal(P, P.T)
    np.testing.assert_allclose(P, (A + A.T) / 2, atol=0)
    assert np.array_equal(proj_sym(P), P)
