import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distmorse.numerics import (
    NewtonError,
    NotSymmetricError,
    SingularMatrixError,
    barycentric_zero,
    fd_gradient,
    fd_hessian,
    inertia,
    newton,
    orth_complement,
    singular_values,
    solve_linear,
    sym_eig,
)

from oracles import bisection_eigenvalues, hull_distance, random_rotation


# -- linear solves ----------------------------------------------------------
def test_solve_identity_and_diagonal():
    b = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(solve_linear(np.eye(3), b), b)
    np.testing.assert_allclose(solve_linear([[2, 0], [0, 4]], [2, 8]), [1, 2])


def test_solve_random_residual():
    rng = np.random.default_rng(0)
    for _ in range(20):
        A = rng.standard_normal((10, 10)) + 5 * np.eye(10)
        b = rng.standard_normal(10)
        x = solve_linear(A, b)
        assert np.linalg.norm(A @ x - b) < 1e-10


def test_solve_singular_reports_pivot():
    with pytest.raises(SingularMatrixError) as err:
        solve_linear([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0])
    assert err.value.pivot < 1e-12


def test_solve_shape_checks():
    with pytest.raises(ValueError):
        solve_linear(np.ones((2, 3)), np.ones(2))
    with pytest.raises(ValueError):
        solve_linear(np.eye(2), np.ones(3))


# -- eigenvalues ------------------------------------------------------------
def test_sym_eig_small_cases():
    vals, _ = sym_eig(np.diag([2.0, 1.0]))
    np.testing.assert_allclose(vals, [1.0, 2.0])
    vals, _ = sym_eig([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(vals, [-1.0, 1.0], atol=1e-15)


def test_sym_eig_matches_bisection_oracle():
    rng = np.random.default_rng(3)
    for _ in range(10):
        B = rng.standard_normal((8, 8))
        A = B + B.T
        vals, Q = sym_eig(A)
        np.testing.assert_allclose(vals, bisection_eigenvalues(A), atol=1e-9)
        assert np.linalg.norm(Q @ np.diag(vals) @ Q.T - A) <= 1e-10 * np.linalg.norm(A)
        assert np.allclose(Q.T @ Q, np.eye(8), atol=1e-12)


def test_sym_eig_rejects_nonsymmetric():
    with pytest.raises(NotSymmetricError):
        sym_eig([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        sym_eig(np.eye(65))


def test_inertia_examples():
    assert inertia(np.diag([-1.0, 0.0, 2.0]), 1e-9).as_tuple() == (1, 1, 1)
    assert inertia(np.zeros((4, 4))).as_tuple() == (0, 4, 0)


def test_inertia_orthogonal_invariance():
    rng = np.random.default_rng(5)
    for n in (2, 3, 5, 7):
        B = rng.standard_normal((n, n))
        A = B + B.T
        Q = random_rotation(n, rng)
        assert inertia(A).as_tuple() == inertia(Q @ A @ Q.T).as_tuple()


def test_orth_complement_and_singular_values():
    L = orth_complement([[1.0, 0.0, 0.0]], 3)
    assert L.shape == (3, 2)
    assert np.allclose(L[0], 0.0)
    np.testing.assert_allclose(singular_values(np.diag([3.0, 1.0])), [3.0, 1.0])


# -- barycentric feasibility ------------------------------------------------
def test_barycentric_examples():
    s = barycentric_zero([[1.0, 0.0], [-1.0, 0.0]])
    assert s.feasible
    np.testing.assert_allclose(s.lambdas, [0.5, 0.5])
    assert not barycentric_zero([[1.0, 0.0], [0.0, 1.0]]).feasible
    t = np.deg2rad([0.0, 120.0, 240.0])
    s = barycentric_zero(np.stack([np.cos(t), np.sin(t)], axis=1))
    assert s.feasible
    np.testing.assert_allclose(s.lambdas, [1 / 3] * 3, atol=1e-12)


def test_barycentric_face_case_keeps_zero_weight():
    # origin on the segment between the first two vectors
    s = barycentric_zero([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    assert s.feasible
    assert abs(s.lambdas[2]) < 1e-9


def test_barycentric_dependent_falls_back_to_faces():
    s = barycentric_zero([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    assert s.feasible
    np.testing.assert_allclose(s.lambdas[:2], [0.5, 0.5])


def test_barycentric_too_many_vectors():
    with pytest.raises(ValueError):
        barycentric_zero(np.eye(2).tolist() + [[1.0, 1.0], [2.0, 0.0]])


@settings(max_examples=200, deadline=None)
@given(
    st.integers(min_value=2, max_value=4),
    st.integers(min_value=0, max_value=10**6),
    st.floats(min_value=1e-3, max_value=1e3),
)
def test_barycentric_matches_nnls_oracle(n, seed, c):
    rng = np.random.default_rng(seed)
    k1 = int(rng.integers(1, n + 2))
    V = rng.standard_normal((k1, n))
    d = hull_distance(V)
    if 1e-6 < d < 1e-3:
        return  # too close to the boundary to call
    s = barycentric_zero(V)
    assert s.feasible == (d <= 1e-6)
    # permutation and positive scaling leave the verdict and weights alone
    perm = rng.permutation(k1)
    sp = barycentric_zero(c * V[perm])
    assert sp.feasible == s.feasible
    if s.feasible:
        np.testing.assert_allclose(sp.lambdas, s.lambdas[perm], atol=1e-7)


# -- Newton -----------------------------------------------------------------
def test_newton_scalar():
    r = newton(lambda x: np.array([x[0] ** 2 - 4]), lambda x: np.array([[2 * x[0]]]), [3.0], tol=1e-12)
    assert abs(r.x[0] - 2.0) < 1e-12


def test_newton_linear_one_step():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, -1.0])
    r = newton(lambda x: A @ x - b, lambda x: A, [10.0, 10.0])
    assert r.iterations == 1


def test_newton_circle_line():
    F = lambda z: np.array([z[0] ** 2 + z[1] ** 2 - 1, z[1] - z[0]])
    J = lambda z: np.array([[2 * z[0], 2 * z[1]], [-1.0, 1.0]])
    r = newton(F, J, [1.0, 0.5], tol=1e-14)
    np.testing.assert_allclose(r.x, [np.sqrt(0.5)] * 2, atol=1e-12)
    # restarting from the answer finishes at once
    assert newton(F, J, r.x, tol=1e-14).iterations <= 2


def test_newton_failure():
    with pytest.raises(NewtonError):
        newton(lambda x: np.array([x[0] ** 2 + 1]), lambda x: np.array([[2 * x[0]]]), [0.5], max_iter=10)


# -- finite differences -----------------------------------------------------
def test_fd_oracles():
    x = np.array([0.3, -1.2, 2.0])
    np.testing.assert_allclose(fd_gradient(lambda z: z @ z, x), 2 * x, atol=1e-6)
    H = fd_hessian(lambda z: 3 * z[0] - z[2] + 1, x)
    assert np.abs(H).max() < 1e-6
    assert np.array_equal(H, H.T)
