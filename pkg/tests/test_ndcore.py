"""
Unit tests for the tensor and layer primitives.

Gradient checks run in float64 on inputs kept away from ReLU kinks and max-pool ties.
"""

import numpy as np
import pytest

from ndcore import (
    Conv2d, Dense, Flatten, MaxPool2x2, ReLU, Sequential, as_tensor, build_layer, check_shape, cross_entropy,
    derive_seed, kl_div, layer_forward_backward, make_rng, sgd_step, softmax_t,
)
from utils.exceptions import (
    ConfigurationException, InvalidInputException, LabelIndexException, ShapeMismatchException,
)

INSTANCES = 100
STEP = 1e-6
TOLERANCE = 1e-3


def _distinct(rng, shape, low=0.1):
    """Values with random signs, |v| >= low, and pairwise gaps far above the finite-difference step."""
    size = int(np.prod(shape))
    magnitudes = low + rng.permutation(size) * (1.0 / size)
    return (magnitudes * rng.choice([-1.0, 1.0], size=size)).reshape(shape)


def _case(kind, rng):
    if kind == "dense":
        layer = Dense(5, 3)
        x = rng.standard_normal((4, 5))
    elif kind == "conv2d-3x3":
        layer = Conv2d(2, 3)
        x = rng.standard_normal((2, 2, 4, 4))
    elif kind == "relu":
        layer = ReLU()
        x = _distinct(rng, (3, 6))
    elif kind == "maxpool-2x2":
        layer = MaxPool2x2()
        x = _distinct(rng, (2, 2, 4, 4))
    else:
        layer = Flatten()
        x = rng.standard_normal((3, 2, 2, 2))
    params = {name: rng.standard_normal(value.shape) for name, value in layer.init_params(rng).items()}
    return layer, x, params


def _numeric(fn, tensor, rng, checks=6):
    flat = tensor.reshape(-1)
    picks = rng.choice(flat.size, size=min(checks, flat.size), replace=False)
    estimates = []
    for index in picks:
        original = flat[index]
        flat[index] = original + STEP
        plus = fn()
        flat[index] = original - STEP
        minus = fn()
        flat[index] = original
        estimates.append((plus - minus) / (2 * STEP))
    return picks, np.array(estimates)


def _relative_error(numeric, analytic):
    scale = max(np.linalg.norm(numeric) + np.linalg.norm(analytic), 1e-12)
    return np.linalg.norm(numeric - analytic) / scale


@pytest.mark.parametrize("kind", ["dense", "conv2d-3x3", "relu", "maxpool-2x2", "flatten"])
def test_layer_gradients_match_finite_differences(kind):
    rng = make_rng(derive_seed(7, kind))
    for _ in range(INSTANCES):
        layer, x, params = _case(kind, rng)
        out, _ = layer.forward(x, params)
        weights = rng.standard_normal(out.shape)

        def loss():
            return float(np.sum(layer.forward(x, params)[0] * weights))

        _, grad_x, grads = layer_forward_backward(layer, x, params, weights)
        assert grad_x.dtype == np.float64
        picks, numeric = _numeric(loss, x, rng)
        assert _relative_error(numeric, grad_x.reshape(-1)[picks]) < TOLERANCE
        for name, value in params.items():
            picks, numeric = _numeric(loss, value, rng)
            assert _relative_error(numeric, grads[name].reshape(-1)[picks]) < TOLERANCE


def test_sequential_backward_matches_finite_differences():
    rng = make_rng(5)
    network = Sequential([Conv2d(1, 2), ReLU(), MaxPool2x2(), Flatten(), Dense(8, 3)], (1, 4, 4))
    params = {key: value.astype(np.float64) for key, value in network.init_params(rng).items()}
    x = rng.uniform(0.0, 1.0, (2, 1, 4, 4))
    weights = rng.standard_normal((2, 3))

    def loss():
        return float(np.sum(network.forward(x, params, keep_cache=False)[0] * weights))

    logits, caches, _ = network.forward(x, params)
    _, grads = network.backward(weights, caches, params)
    picks, numeric = _numeric(loss, params["4.weight"], rng)
    assert _relative_error(numeric, grads["4.weight"].reshape(-1)[picks]) < TOLERANCE


def test_backward_with_trainable_subset_only_returns_those_gradients():
    rng = make_rng(1)
    network = Sequential([Flatten(), Dense(4, 3), ReLU(), Dense(3, 2)], (1, 2, 2))
    params = network.init_params(rng)
    logits, caches, _ = network.forward(rng.uniform(size=(2, 1, 2, 2)).astype(np.float32), params)
    grad_x, grads = network.backward(np.ones_like(logits), caches, params, trainable={network.head_index})
    assert grad_x is None
    assert set(grads) == {"3.weight", "3.bias"}


def test_build_layer_round_trips_descriptions():
    for layer in (Dense(3, 2), Conv2d(1, 4), ReLU(), MaxPool2x2(), Flatten()):
        assert build_layer(layer.describe()).describe() == layer.describe()
    with pytest.raises(ConfigurationException):
        build_layer({"kind": "dropout"})


def test_layer_shape_errors():
    with pytest.raises(ShapeMismatchException):
        Dense(3, 2).forward(np.zeros((2, 4)), {"weight": np.zeros((3, 2)), "bias": np.zeros(2)})
    with pytest.raises(ShapeMismatchException):
        MaxPool2x2().forward(np.zeros((1, 1, 3, 3)), {})
    with pytest.raises(ShapeMismatchException):
        Sequential([Flatten(), Dense(5, 2)], (1, 2, 2))


def test_softmax_t_properties():
    logits = np.array([[1.0, 2.0, 3.0], [1000.0, 1000.0, -1000.0]])
    probs = softmax_t(logits, 1.0)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(probs[1], [0.5, 0.5, 0.0], atol=1e-12)
    flat = softmax_t(logits[0], 1e6)
    np.testing.assert_allclose(flat, np.full(3, 1 / 3), atol=1e-5)


def test_softmax_t_errors():
    with pytest.raises(ConfigurationException):
        softmax_t([1.0, 2.0], 0.0)
    with pytest.raises(ShapeMismatchException):
        softmax_t([1.0], 1.0)
    with pytest.raises(InvalidInputException):
        softmax_t([1.0, np.nan], 1.0)


def test_cross_entropy_and_kl():
    assert cross_entropy([0.25, 0.75], 1) == pytest.approx(-np.log(0.75))
    assert cross_entropy([1.0, 0.0], 1) == pytest.approx(-np.log(1e-12))
    with pytest.raises(LabelIndexException):
        cross_entropy([0.5, 0.5], 2)
    p = np.array([0.2, 0.3, 0.5])
    assert kl_div(p, p) == 0.0
    assert kl_div(p, [0.3, 0.3, 0.4]) > 0
    with pytest.raises(ShapeMismatchException):
        kl_div(p, [0.5, 0.5])


def test_sgd_step_with_zero_lr_keeps_parameters():
    params = {"w": np.array([1.0, -2.0], dtype=np.float32)}
    new_params, velocity = sgd_step(params, {"w": np.array([0.5, 0.5], dtype=np.float32)}, {}, 0.0, 0.9)
    assert np.array_equal(new_params["w"], params["w"])
    np.testing.assert_allclose(velocity["w"], [0.5, 0.5])
    with pytest.raises(ConfigurationException):
        sgd_step(params, {}, {}, -1.0, 0.9)


def test_sgd_step_applies_momentum():
    params = {"w": np.zeros(1)}
    grads = {"w": np.ones(1)}
    params, velocity = sgd_step(params, grads, {}, 0.1, 0.5)
    params, velocity = sgd_step(params, grads, velocity, 0.1, 0.5)
    np.testing.assert_allclose(velocity["w"], [1.5])
    np.testing.assert_allclose(params["w"], [-0.25])


def test_sgd_step_clips_the_global_gradient_norm():
    params = {"a": np.zeros(2), "b": np.zeros(1)}
    grads = {"a": np.array([3.0, 0.0]), "b": np.array([4.0])}
    clipped, velocity = sgd_step(params, grads, {}, 1.0, 0.0, clip_norm=1.0)
    np.testing.assert_allclose(clipped["a"], [-0.6, 0.0])
    np.testing.assert_allclose(clipped["b"], [-0.8])
    unclipped, _ = sgd_step(params, grads, {}, 1.0, 0.0, clip_norm=10.0)
    np.testing.assert_allclose(unclipped["b"], [-4.0])
    with pytest.raises(ConfigurationException):
        sgd_step(params, grads, {}, 1.0, 0.0, clip_norm=-1.0)


def test_seeds_are_stable_and_labelled():
    assert derive_seed(1, "a") == derive_seed(1, "a")
    assert derive_seed(1, "a") != derive_seed(1, "b")
    assert derive_seed(1, "a") != derive_seed(2, "a")
    assert np.array_equal(make_rng(9).standard_normal(5), make_rng(9).standard_normal(5))


def test_tensor_validation():
    with pytest.raises(InvalidInputException):
        as_tensor([1.0, np.inf])
    check_shape(np.zeros((2, 3)), (None, 3))
    with pytest.raises(ShapeMismatchException):
        check_shape(np.zeros((2, 3)), (2, 4))
