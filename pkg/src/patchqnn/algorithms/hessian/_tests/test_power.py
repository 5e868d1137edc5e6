import numpy as np
import pytest

from patchqnn._tests.oracles import dense_hessian_eigs
from patchqnn.algorithms.hessian.power import (HessianConfig, default_eps,
                                               dense_hessian_from_hvp,
                                               dominant_eigenvalue, hvp,
                                               power_iteration)
from patchqnn.algorithms.simulator.base import Observable
from patchqnn.system.data import PatchConfig
from patchqnn.system.model import ModelParams, build_model_config, flat_objective
from patchqnn.utils.exceptions import NumericalError


def _spd(dim, seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(dim, dim))
    return B @ B.T + dim * np.eye(dim)


@pytest.fixture(scope="module")
def tiny_objective():
    rng = np.random.default_rng(42)
    cfg = build_model_config(1, 1, PatchConfig(2, 2, 1), [Observable("X", 0), Observable("Z", 0)],
                             n_class=2, c=1.0, feature_map="cyclic")
    params = ModelParams(rng.uniform(0, np.pi, (1, cfg.template.n_trainable)),
                         rng.normal(scale=0.2, size=(2, 2)))
    images = rng.uniform(0, np.pi / 4, (4, 2, 2))
    labels = np.array([0, 1, 1, 0])
    return flat_objective(params, (images, labels), cfg)


def test_hvp_exact_for_quadratic():
    A = _spd(5, 0)
    theta = np.random.default_rng(1).normal(size=5)
    v = np.random.default_rng(2).normal(size=5)
    np.testing.assert_allclose(hvp(lambda t: A @ t, theta, v), A @ v, atol=1e-8)


def test_hvp_vanishes_for_linear_loss():
    c = np.array([1.0, -2.0, 0.5])
    out = hvp(lambda t: c.copy(), np.zeros(3), np.ones(3))
    np.testing.assert_allclose(out, 0.0, atol=1e-12)


def test_hvp_errors():
    with pytest.raises(ValueError):
        hvp(lambda t: t, np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        hvp(lambda t: t, np.zeros(3), np.ones(2))
    with pytest.raises(NumericalError):
        hvp(lambda t: np.full(3, np.inf), np.zeros(3), np.ones(3))


def test_default_eps_scaling():
    assert default_eps(np.zeros(4)) == pytest.approx(1e-3 / 2)
    assert default_eps(np.full(4, 5.0)) == pytest.approx(1e-3 * 10 / 2)


@pytest.mark.parametrize("matrix", [np.diag([3.0, 1.0]), np.array([[2.0, 1.0], [1.0, 2.0]])])
def test_power_iteration_small_matrices(matrix):
    report = power_iteration(lambda v: matrix @ v, 2, tol=1e-10, max_iter=500)
    assert report.lambda_max == pytest.approx(3.0, rel=1e-6)
    assert report.converged
    assert not report.negative_curvature
    assert report.residual < 1e-10
    assert report.iterations <= 500


def test_power_iteration_negative_dominant():
    A = np.diag([-5.0, 1.0, 0.5])
    report = power_iteration(lambda v: A @ v, 3, tol=1e-12, max_iter=500)
    assert report.lambda_max == pytest.approx(-5.0, rel=1e-6)
    assert report.negative_curvature


def test_power_iteration_reports_non_convergence():
    A = np.diag([1.0, 0.999, 0.998])
    report = power_iteration(lambda v: A @ v, 3, tol=1e-14, max_iter=3)
    assert not report.converged
    assert report.iterations == 3
    assert 0.998 <= report.lambda_max <= 1.0


def test_power_iteration_zero_operator():
    with pytest.raises(NumericalError):
        power_iteration(lambda v: np.zeros_like(v), 4, max_restarts=2)


def test_power_iteration_is_seeded():
    A = _spd(6, 3)
    a = power_iteration(lambda v: A @ v, 6, tol=1e-6, seed=7)
    b = power_iteration(lambda v: A @ v, 6, tol=1e-6, seed=7)
    assert a.lambda_max == b.lambda_max
    assert a.iterations == b.iterations
    assert a.seed == 7


def test_dense_hessian_from_hvp():
    A = _spd(4, 5)
    H = dense_hessian_from_hvp(lambda v: A @ v, 4)
    np.testing.assert_allclose(H, A, atol=1e-12)
    assert dominant_eigenvalue(H) == pytest.approx(np.linalg.eigvalsh(A).max())
    assert dominant_eigenvalue(np.diag([-4.0, 3.0])) == -4.0
    with pytest.raises(ValueError):
        dense_hessian_from_hvp(lambda v: v, 5, max_dim=4)


def test_tiny_model_hvp_symmetry(tiny_objective):
    theta, _, grad_fn = tiny_objective
    rng = np.random.default_rng(0)
    u, v = rng.normal(size=theta.size), rng.normal(size=theta.size)
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    uhv = u @ hvp(grad_fn, theta, v, eps=1e-4)
    vhu = v @ hvp(grad_fn, theta, u, eps=1e-4)
    assert abs(uhv - vhu) <= 1e-6 * max(1.0, abs(uhv))


def test_tiny_model_hvp_is_linear(tiny_objective):
    theta, _, grad_fn = tiny_objective
    rng = np.random.default_rng(1)
    u, v = rng.normal(size=theta.size), rng.normal(size=theta.size)
    a, b = 0.7, -2.5
    combined = hvp(grad_fn, theta, a * v + b * u, eps=1e-4)
    separate = a * hvp(grad_fn, theta, v, eps=1e-4) + b * hvp(grad_fn, theta, u, eps=1e-4)
    np.testing.assert_allclose(combined, separate, atol=1e-6 * max(1.0, np.abs(separate).max()))


def test_tiny_model_matches_dense_oracle(tiny_objective):
    theta, loss_fn, grad_fn = tiny_objective
    assert theta.size <= 40
    eigs = dense_hessian_eigs(loss_fn, theta, 1e-4)
    target = eigs[np.argmax(np.abs(eigs))]

    def op(v):
        return hvp(grad_fn, theta, v)

    dense = dominant_eigenvalue(dense_hessian_from_hvp(op, theta.size))
    assert dense == pytest.approx(target, rel=1e-4)

    report = power_iteration(op, theta.size, tol=1e-10, max_iter=3000, seed=0)
    assert report.lambda_max == pytest.approx(target, rel=1e-3)
    assert report.dim == theta.size


def test_hessian_config_validation():
    assert HessianConfig().scope == "angles_and_bias"
    with pytest.raises(ValueError):
        HessianConfig(scope="bias")
    with pytest.raises(ValueError):
        HessianConfig(max_iter=1)
    with pytest.raises(ValueError):
        HessianConfig(tol=0.0)
    with pytest.raises(ValueError):
        HessianConfig(batch_size=0)
