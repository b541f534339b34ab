import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from sohb import son
from sohb._checks import is_rotation
from sohb.exceptions import DimensionMismatch, NonUniqueProjection, SingularProjection


def test_inner_product_is_trace_form(rng):
    A, B = rng.standard_normal((2, 4, 4))
    assert son.matrix_inner(A, B) == pytest.approx(np.trace(A.T @ B))
    assert son.matrix_inner(np.eye(5), np.eye(5)) == 5.0


def test_inner_product_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        son.matrix_inner(np.eye(3), np.eye(4))


@pytest.mark.parametrize("n", [3, 4, 5, 7])
def test_haar_samples_are_rotations(rng, n):
    A = son.haar_sample(rng, n, 500)
    assert A.shape == (500, n, n)
    assert all(is_rotation(a, 1e-12) for a in A)


def test_haar_trace_moments(rng):
    # E[Tr A] = 0 and E[(Tr A)^2] = 1 for Haar measure on SO(n), n >= 3
    A = son.haar_sample(rng, 4, 200_000)
    t = np.trace(A, axis1=1, axis2=2)
    se1 = t.std() / np.sqrt(len(t))
    se2 = (t**2).std() / np.sqrt(len(t))
    assert abs(t.mean()) < 4 * se1
    assert abs((t**2).mean() - 1.0) < 4 * se2


def test_haar_left_invariance_of_first_column(rng):
    # first column is uniform on the sphere: E[x_1^2] = 1/n
    A = son.haar_sample(rng, 5, 100_000)
    assert np.mean(A[:, 0, 0] ** 2) == pytest.approx(0.2, abs=0.005)


def test_projection_of_rotation_is_identity_map(rng):
    R = son.haar_sample(rng, 4)
    np.testing.assert_allclose(son.project_to_rotation(R), R, atol=1e-13)
    np.testing.assert_allclose(son.project_to_rotation(3.0 * R), R, atol=1e-13)


def test_projection_diagonal_positive_det():
    # det J > 0: the polar factor; diagonal with positive entries projects to Id
    np.testing.assert_allclose(son.project_to_rotation(np.diag([3.0, 2.0, 1.0])), np.eye(3), atol=1e-14)


def test_projection_diagonal_reflection():
    # J = -diag(1, 2, 3) has det < 0. Over the diagonal rotations the scores are
    # diag(1,-1,-1): -1+2+3 = 4, diag(-1,1,-1): 1-2+3 = 2, diag(-1,-1,1): 1+2-3 = 0, Id: -6,
    # so the maximizer flips the two largest axes and keeps the smallest.
    J = -np.diag([1.0, 2.0, 3.0])
    np.testing.assert_allclose(son.project_to_rotation(J), np.diag([1.0, -1.0, -1.0]), atol=1e-14)


def test_projection_ties_raise():
    with pytest.raises(NonUniqueProjection):
        son.project_to_rotation(np.zeros((3, 3)))
    with pytest.raises(NonUniqueProjection):
        son.project_to_rotation(np.diag([1.0, 0.0, 0.0]))
    with pytest.raises(NonUniqueProjection):
        son.project_to_rotation(-np.eye(3))  # det -1, all singular values tied


def test_projection_strict_singular():
    J = np.diag([2.0, 1.0, 0.0])
    np.testing.assert_allclose(son.project_to_rotation(J), np.eye(3), atol=1e-14)
    with pytest.raises(SingularProjection):
        son.project_to_rotation(J, strict=True)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 6), st.integers(0, 2**32 - 1))
def test_projection_optimality_property(n, seed):
    rng = np.random.default_rng(seed)
    J = rng.standard_normal((n, n))
    T = son.project_to_rotation(J)
    assert is_rotation(T, 1e-12)
    S = J @ T.T
    assert np.max(np.abs(S - S.T)) < 1e-10 * max(1.0, np.abs(J).max())
    # no small perturbation along the group improves the objective
    best = son.matrix_inner(T, J)
    K = son.random_skew(rng, n, 20, norm=1e-3)
    assert np.all(son.matrix_inner(son.expm_skew(K) @ T, J) <= best + 1e-12)


def test_wedge_and_skew_helpers():
    X, Y = np.array([1.0, 2.0, 3.0]), np.array([0.0, 1.0, -1.0])
    W = son.wedge_vec(X, Y)
    np.testing.assert_array_equal(W, np.outer(X, Y) - np.outer(Y, X))
    P = son.skew_from_upper([1.0, 2.0, 3.0], 3)
    np.testing.assert_array_equal(P, [[0, 1, 2], [-1, 0, 3], [-2, -3, 0]])


def test_expm_skew_plane_rotation():
    t = 0.7
    K = son.skew_from_upper([1.0, 0.0, 0.0], 3)  # e1 ^ e2 with unit entries
    R = son.expm_skew(t * K)
    expected = np.eye(3)
    expected[:2, :2] = [[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]]
    np.testing.assert_allclose(R, expected, atol=1e-15)


def test_expm_skew_batch_orthogonality(rng):
    R = son.expm_skew(son.random_skew(rng, 6, 100, norm=5.0))
    err = np.abs(np.swapaxes(R, 1, 2) @ R - np.eye(6)).max()
    assert err < 1e-13
    assert np.allclose(np.linalg.det(R), 1.0)


def test_rotation_projector_estimator(rng):
    X = rng.standard_normal((10, 4, 4))
    proj = son.RotationProjector().fit(X)
    out = proj.transform(X)
    for J, T in zip(X, out):
        np.testing.assert_allclose(T, son.project_to_rotation(J))
    assert clone(proj).get_params() == {"strict": False, "tol": son.TIE_TOL}
    with pytest.raises(DimensionMismatch):
        proj.transform(np.eye(3))
