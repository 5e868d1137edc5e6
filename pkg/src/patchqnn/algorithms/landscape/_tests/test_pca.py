import numpy as np
import pytest

from patchqnn._tests.oracles import dense_pca
from patchqnn.algorithms.landscape.pca import (PcaPlane, pca2, project,
                                               project_rows, reconstruct)


def _assert_same_direction(a, b, atol=1e-10):
    sign = 1.0 if np.dot(a, b) >= 0 else -1.0
    np.testing.assert_allclose(a, sign * b, atol=atol)


def test_collinear_rows():
    u = np.array([1.0, 2.0, 2.0]) / 3.0
    Q = np.outer([0.0, 1.0, 2.5, 4.0], u) + np.array([1.0, -1.0, 0.5])
    plane = pca2(Q)
    _assert_same_direction(plane.v1, u)
    assert plane.ratio1 == pytest.approx(1.0)
    assert plane.ratio2 == 0.0
    assert abs(np.dot(plane.v1, plane.v2)) < 1e-12


@pytest.mark.parametrize("shape", [(4, 3), (6, 5), (10, 8)])
def test_matches_dense_covariance(shape):
    rng = np.random.default_rng(sum(shape))
    Q = rng.normal(size=shape) * np.linspace(3.0, 0.5, shape[1])
    plane = pca2(Q)
    lam, V = dense_pca(Q)
    assert plane.variance1 == pytest.approx(lam[0], abs=1e-10)
    assert plane.variance2 == pytest.approx(lam[1], abs=1e-10)
    _assert_same_direction(plane.v1, V[:, 0])
    _assert_same_direction(plane.v2, V[:, 1])
    total = lam[lam > 0].sum()
    assert plane.ratio1 == pytest.approx(lam[0] / total, abs=1e-10)
    assert plane.ratio2 == pytest.approx(lam[1] / total, abs=1e-10)


def test_plane_invariants_and_orientation():
    rng = np.random.default_rng(3)
    Q = np.cumsum(rng.normal(size=(12, 20)), axis=0)
    plane = pca2(Q)
    plane.check()
    assert plane.ratio1 >= plane.ratio2 >= 0
    assert plane.ratio1 + plane.ratio2 <= 1 + 1e-12
    alpha, beta = project(Q[-1], plane)
    assert alpha >= 0 and beta >= 0


def test_identical_rows_fallback():
    Q = np.tile(np.array([0.3, -1.2, 4.0]), (5, 1))
    plane = pca2(Q)
    assert plane.ratio1 == 0.0 and plane.ratio2 == 0.0
    np.testing.assert_allclose(plane.basis.T @ plane.basis, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(plane.mean, Q[0])


def test_project_and_reconstruct():
    rng = np.random.default_rng(4)
    Q = rng.normal(size=(5, 6))
    plane = pca2(Q)
    assert project(plane.mean, plane) == pytest.approx((0.0, 0.0), abs=1e-14)
    assert project(plane.mean + 2 * plane.v1, plane) == pytest.approx((2.0, 0.0), abs=1e-12)
    q = reconstruct(plane, 0.7, -1.3)
    assert project(q, plane) == pytest.approx((0.7, -1.3), abs=1e-12)
    np.testing.assert_allclose(reconstruct(plane, *project(q, plane)), q, atol=1e-12)
    rows = project_rows(Q, plane)
    assert rows.shape == (5, 2)
    assert rows[2].tolist() == pytest.approx(list(project(Q[2], plane)), abs=1e-12)


def test_pca_errors():
    with pytest.raises(ValueError):
        pca2(np.zeros((2, 4)))
    with pytest.raises(ValueError):
        pca2(np.zeros((4, 1)))
    with pytest.raises(ValueError):
        pca2(np.array([[0.0, 1.0], [np.nan, 0.0], [1.0, 1.0]]))
    plane = pca2(np.random.default_rng(0).normal(size=(3, 4)))
    with pytest.raises(ValueError):
        project(np.zeros(5), plane)
    bad = PcaPlane(np.zeros(2), np.array([1.0, 0.0]), np.array([1.0, 0.0]), 0.5, 0.5)
    with pytest.raises(ValueError):
        bad.check()
