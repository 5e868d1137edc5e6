import math

import numpy as np
import pytest

from patchqnn._tests.oracles import fd_gradient
from patchqnn.algorithms.simulator.base import Observable
from patchqnn.algorithms.simulator.statevector import (batch_expectations,
                                                       expectations)
from patchqnn.system.data import PatchConfig, zero_bias
from patchqnn.system.model import (ModelConfig, ModelParams, _nll,
                                   build_model_config, encode, evaluate,
                                   flat_objective, forward, forward_batch,
                                   gradient, loss, loss_and_gradient)


def _tiny(n=2, d=1, M=4, P=2, D=2, n_class=3, c=10.0, seed=0):
    rng = np.random.default_rng(seed)
    obs = [Observable(str(rng.choice(["X", "Z"])), int(rng.integers(n))) for _ in range(n_class)]
    cfg = build_model_config(n, d, PatchConfig(M, P, D), obs, n_class=n_class, c=c, feature_map="cyclic")
    params = ModelParams(rng.uniform(0, np.pi, (cfg.n_qc, cfg.template.n_trainable)),
                         rng.normal(scale=0.3, size=(M, M)))
    images = rng.uniform(0, np.pi / 4, (3, M, M))
    labels = rng.integers(0, n_class, 3)
    return cfg, params, images, labels


def _ground_state_model(observables, c=100.0):
    # all angles zero: every patch circuit leaves |0>
    n_class = len(observables)
    cfg = build_model_config(1, 1, PatchConfig(2, 2, 1), observables, n_class=n_class, c=c,
                             feature_map="cyclic")
    params = ModelParams(np.zeros((1, cfg.template.n_trainable)), zero_bias(2))
    return cfg, params


def test_zero_expectations_give_uniform_probs():
    cfg, params = _ground_state_model([Observable("X", 0)] * 10)
    y_bar, probs = forward_batch(params, np.zeros((1, 2, 2)), cfg)
    np.testing.assert_allclose(y_bar, 0.0, atol=1e-15)
    np.testing.assert_allclose(probs, 0.1, atol=1e-14)
    assert loss(params, (np.zeros((1, 2, 2)), [4]), cfg) == pytest.approx(math.log(10), abs=1e-12)


def test_uniform_probs_tie_break():
    cfg, params = _ground_state_model([Observable("X", 0)] * 10)
    value, acc = evaluate(params, (np.zeros((1, 2, 2)), [3]), cfg)
    assert acc == 0.0
    assert value == pytest.approx(math.log(10))
    _, acc = evaluate(params, (np.zeros((2, 2, 2)), [0, 3]), cfg)
    assert acc == 0.5


def test_confident_prediction():
    cfg, params = _ground_state_model([Observable("Z", 0), Observable("X", 0)])
    value, acc = evaluate(params, (np.zeros((1, 2, 2)), [0]), cfg)
    assert acc == 1.0
    assert value == pytest.approx(0.0, abs=1e-40)
    assert forward(params, np.zeros((2, 2)), cfg).label == 0


def test_scaled_softmax_closed_form():
    y_bar = np.zeros((1, 10))
    y_bar[0, 0] = 0.1
    p0 = math.exp(10) / (math.exp(10) + 9)
    assert p0 == pytest.approx(0.9995915, abs=1e-7)
    assert _nll(y_bar, np.array([0]), 100.0)[0] == pytest.approx(-math.log(p0), rel=1e-12)
    # large logits stay finite
    assert np.isfinite(_nll(np.array([[1.0, -1.0]]), np.array([1]), 1e4)).all()


def test_single_patch_average_is_identity():
    cfg, params, images, _ = _tiny(M=2, P=2, D=1)
    assert cfg.n_qc == 1
    pred = forward(params, images[0], cfg)
    enc = (images[0] + params.bias).ravel()[cfg.feature_index]
    np.testing.assert_allclose(pred.y_bar, expectations(cfg.template, params.phis[0], enc, cfg.observables),
                               atol=1e-13)


def test_identical_samples_keep_loss():
    cfg, params, images, labels = _tiny()
    one = loss(params, (images[:1], labels[:1]), cfg)
    two = loss(params, (np.repeat(images[:1], 2, axis=0), np.repeat(labels[:1], 2)), cfg)
    assert two == pytest.approx(one, rel=1e-13)


@pytest.mark.parametrize("seed", range(3))
def test_gradient_matches_finite_differences(seed):
    cfg, params, images, labels = _tiny(seed=seed)
    theta, loss_fn, grad_fn = flat_objective(params, (images, labels), cfg)
    analytic = grad_fn(theta)
    numeric = fd_gradient(loss_fn, theta, 1e-6)
    assert np.linalg.norm(analytic - numeric) <= 1e-5 * np.linalg.norm(numeric)
    # bias block is part of the check
    n_angles = params.n_angles
    assert np.linalg.norm(analytic[n_angles:]) > 0


def test_gradient_split_matches_single_pass():
    cfg, params, images, labels = _tiny(seed=4)
    value, probs, grad = loss_and_gradient(params, (images, labels), cfg)
    d_phis, d_bias = gradient(params, (images, labels), cfg)
    np.testing.assert_array_equal(d_phis, grad.phis)
    np.testing.assert_array_equal(d_bias, grad.bias)
    assert value == pytest.approx(loss(params, (images, labels), cfg), rel=1e-14)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)


def test_batch_gradient_is_sample_mean():
    cfg, params, images, labels = _tiny(seed=5)
    full = gradient(params, (images[:2], labels[:2]), cfg)
    a = gradient(params, (images[:1], labels[:1]), cfg)
    b = gradient(params, (images[1:2], labels[1:2]), cfg)
    np.testing.assert_allclose(full[0], 0.5 * (a[0] + b[0]), atol=1e-13)
    np.testing.assert_allclose(full[1], 0.5 * (a[1] + b[1]), atol=1e-13)


def test_uncovered_pixels_get_zero_bias_gradient():
    cfg, params, images, labels = _tiny(M=5, P=2, D=3, seed=6)
    _, d_bias = gradient(params, (images, labels), cfg)
    assert not np.any(d_bias[2, :])
    assert not np.any(d_bias[:, 2])
    assert np.any(d_bias[0, :])


def test_evaluate_block_size_invariant():
    cfg, params, images, labels = _tiny(seed=7)
    a = evaluate(params, (images, labels), cfg, block=1)
    b = evaluate(params, (images, labels), cfg)
    assert a[0] == pytest.approx(b[0], rel=1e-14)
    assert a[1] == b[1]


def test_angles_only_scope():
    cfg, params, images, labels = _tiny(seed=8)
    theta, loss_fn, grad_fn = flat_objective(params, (images, labels), cfg, scope="angles_only")
    assert theta.size == params.n_angles
    assert loss_fn(theta) == pytest.approx(loss(params, (images, labels), cfg), rel=1e-14)
    assert grad_fn(theta).shape == (params.n_angles,)
    with pytest.raises(ValueError):
        flat_objective(params, (images, labels), cfg, scope="bias_only")


def test_params_layout():
    params = ModelParams(np.arange(6.0).reshape(2, 3), np.full((2, 2), 9.0))
    flat = params.flatten()
    assert flat.tolist() == [0, 1, 2, 3, 4, 5, 9, 9, 9, 9]
    np.testing.assert_array_equal(params.with_flat(flat).phis, params.phis)
    np.testing.assert_array_equal(params.with_angles(np.zeros(6)).bias, params.bias)
    with pytest.raises(ValueError):
        params.with_flat(np.zeros(3))
    with pytest.raises(ValueError):
        ModelParams(np.full((1, 2), np.inf), np.zeros((2, 2)))


def test_model_config_validation():
    patch = PatchConfig(4, 2, 2)
    cfg, *_ = _tiny()
    with pytest.raises(ValueError):
        ModelConfig(cfg.template, patch, cfg.observables, n_class=cfg.n_class)  # strict, 16 != 4
    with pytest.raises(ValueError):
        ModelConfig(cfg.template, patch, cfg.observables, n_class=2, feature_map="cyclic")
    with pytest.raises(ValueError):
        ModelConfig(cfg.template, patch, [Observable("X", 5)] * 3, n_class=3, feature_map="cyclic")
    with pytest.raises(ValueError):
        ModelConfig(cfg.template, PatchConfig(4, 3, 1), cfg.observables, n_class=3, feature_map="cyclic")
    with pytest.raises(ValueError):
        ModelConfig(cfg.template, patch, cfg.observables, n_class=3, c=0.0, feature_map="cyclic")


def test_reference_model_geometry():
    cfg = build_model_config(8, 1, PatchConfig(14, 8, 6))
    assert cfg.n_qc == 4
    assert cfg.template.n_encoding == 64
    assert cfg.n_parameters(include_bias=False) == 4 * cfg.template.n_trainable
    assert cfg.n_parameters() == 4 * cfg.template.n_trainable + 196
    assert [str(o) for o in cfg.observables] == ["X0", "X1", "X2", "X3", "X4", "Z0", "Z1", "Z2", "Z3", "Z4"]


def test_rejects_bad_labels_and_empty_batch():
    cfg, params, images, _ = _tiny()
    with pytest.raises(ValueError):
        loss(params, (images[:1], [5]), cfg)
    with pytest.raises(ValueError):
        loss(params, (images[:0], []), cfg)


def test_patch_order_does_not_change_average():
    cfg, params, images, _ = _tiny(n=3, n_class=4, seed=5)
    y_bar, _ = forward_batch(params, images, cfg)
    enc = encode(params, images, cfg)
    per_patch = batch_expectations(cfg.template, params.phis, enc, cfg.observables)
    for perm in ([3, 2, 1, 0], [1, 3, 0, 2]):
        shuffled = batch_expectations(cfg.template, params.phis[perm], enc[:, perm], cfg.observables)
        np.testing.assert_allclose(shuffled, per_patch[:, perm], atol=1e-14)
        np.testing.assert_allclose(shuffled.mean(axis=1), y_bar, atol=1e-14)
