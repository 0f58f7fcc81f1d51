# SPDX-License-Identifier: Apache-2.0

import math

import numpy as np
import pytest

from fedsfr.exceptions import NonFiniteError, ShapeMismatchError, TapeMismatchError
from fedsfr.tensor import (
    Conv2d,
    Dense,
    FlatParams,
    Network,
    ReLU,
    Reshape,
    Sigmoid,
    TransposeConv2d,
    backward,
    forward,
    init_network,
    mse_loss,
    sgd_step,
)
from fedsfr.tensor.gradcheck import finite_diff_gradient, numerical_gradient, relative_error
from fedsfr.tensor.network import boundaries_for

LAYER_CASES = [
    (Dense(5, 3), (5,)),
    (Conv2d(2, 3, 3, stride=2, padding=1), (2, 5, 5)),
    (Conv2d(1, 2, 2), (1, 4, 3)),
    (TransposeConv2d(2, 3, 4, stride=2, padding=1), (2, 3, 3)),
    (TransposeConv2d(1, 2, 3), (1, 2, 2)),
    (ReLU(), (2, 3, 3)),
    (Sigmoid(), (4,)),
    (Reshape((18,)), (2, 3, 3)),
]


def test_dense_forward_known_values():
    net = Network((2,), [Dense(2, 1)], [np.array([1.0, 2.0, 0.5])])
    output, _ = forward(net, np.array([3.0, 4.0]))
    assert output.tolist() == [11.5]


def test_conv_pair_halves_and_restores_extent():
    down = Conv2d(1, 2, 4, stride=2, padding=1)
    up = TransposeConv2d(2, 1, 4, stride=2, padding=1)
    assert down.output_shape((1, 8, 8)) == (2, 4, 4)
    assert up.output_shape((2, 4, 4)) == (1, 8, 8)


def test_conv_rejects_wrong_channels():
    with pytest.raises(ShapeMismatchError):
        Conv2d(3, 2, 3).output_shape((1, 8, 8))


def test_conv_matches_direct_sum(rng):
    layer = Conv2d(2, 1, 2, stride=1, padding=0)
    net = init_network((2, 3, 3), [layer], rng)
    x = rng.normal(size=(2, 3, 3))
    output, _ = forward(net, x)
    weight = net.params[0][:8].reshape(1, 2, 2, 2)
    expected = np.array([[np.sum(x[:, i : i + 2, j : j + 2] * weight[0]) for j in range(2)] for i in range(2)])
    np.testing.assert_allclose(output[0], expected, rtol=1e-12)


@pytest.mark.parametrize("layer,input_shape", LAYER_CASES)
def test_layer_gradients_match_finite_differences(layer, input_shape, rng):
    net = init_network(input_shape, [layer], rng)
    if net.param_count:
        net = net.with_flat(rng.normal(size=net.param_count))
    x = rng.normal(size=(3,) + input_shape)
    weights = rng.normal(size=(3,) + net.output_shape)

    _, tape = forward(net, x)
    grads, input_grad = backward(net, tape, weights)

    if net.param_count:
        numeric = finite_diff_gradient(net, x, lambda out: float(np.sum(out * weights)))
        assert relative_error(grads.values, numeric.values) < 1e-6
    numeric_input = numerical_gradient(lambda v: float(np.sum(forward(net, v.reshape(x.shape))[0] * weights)), x.ravel())
    assert relative_error(input_grad.ravel(), numeric_input) < 1e-6


def test_relu_subgradient_at_zero_is_zero():
    net = Network((3,), [ReLU()])
    output, tape = forward(net, np.array([0.0, -1.0, 2.0]))
    _, input_grad = backward(net, tape, np.ones(3))
    assert output.tolist() == [0.0, 0.0, 2.0]
    assert input_grad.tolist() == [0.0, 0.0, 1.0]


def test_sigmoid_is_stable_for_large_inputs():
    net = Network((2,), [Sigmoid()])
    output, _ = forward(net, np.array([-800.0, 800.0]))
    assert output.tolist() == [0.0, 1.0]


def test_init_network_kaiming_bounds_and_zero_biases(rng):
    layers = [Conv2d(1, 8, 4, 2, 1), ReLU(), Reshape((128,)), Dense(128, 4)]
    net = init_network((1, 8, 8), layers, rng)
    conv, dense = net.params
    assert np.all(np.abs(conv[:-8]) <= math.sqrt(6.0 / 16))
    assert np.all(conv[-8:] == 0.0)
    assert np.all(np.abs(dense[:-4]) <= math.sqrt(6.0 / 128))
    assert np.all(dense[-4:] == 0.0)


def test_transpose_conv_fan_in_uses_output_channels():
    assert TransposeConv2d(4, 8, 4, 2, 1).fan_in == 8 * 16


def test_flatten_unflatten_and_views(rng):
    net = init_network((5,), [Dense(5, 3), ReLU(), Dense(3, 2)], rng)
    flat = net.flatten()
    assert len(flat) == net.param_count == 18 + 8
    assert flat.boundaries == ((0, 18), (18, 8))
    for original, restored in zip(net.params, net.unflatten(flat)):
        assert np.array_equal(original, restored)

    values = flat.values.copy()
    view = net.with_flat(values)
    assert all(np.shares_memory(p, values) for p in view.params)


def test_flat_params_rejects_bad_boundaries():
    with pytest.raises(ShapeMismatchError):
        FlatParams(values=np.zeros(5), boundaries=((0, 2), (3, 2)))
    with pytest.raises(ShapeMismatchError):
        FlatParams(values=np.zeros(5), boundaries=boundaries_for([2, 2]))


def test_forward_rejects_non_finite_values():
    net = Network((2,), [Dense(2, 1)], [np.array([np.inf, 1.0, 0.0])])
    with pytest.raises(NonFiniteError):
        forward(net, np.array([1.0, 1.0]))


def test_forward_rejects_wrong_input_shape(rng):
    net = init_network((5,), [Dense(5, 3)], rng)
    with pytest.raises(ShapeMismatchError):
        forward(net, np.zeros(4))


def test_backward_rejects_foreign_tape(rng):
    first = init_network((5,), [Dense(5, 3)], rng)
    second = init_network((5,), [Dense(5, 2)], rng)
    _, tape = forward(first, np.zeros(5))
    with pytest.raises(TapeMismatchError):
        backward(second, tape, np.zeros(2))


def test_batched_gradient_is_sum_of_samples(rng):
    net = init_network((4,), [Dense(4, 3), Sigmoid()], rng)
    x = rng.normal(size=(2, 4))
    g = rng.normal(size=(2, 3))
    _, tape = forward(net, x)
    batched, _ = backward(net, tape, g)
    singles = []
    for i in range(2):
        _, tape_i = forward(net, x[i])
        singles.append(backward(net, tape_i, g[i])[0].values)
    np.testing.assert_allclose(batched.values, singles[0] + singles[1], rtol=1e-12)


def test_mse_loss_value_and_gradient():
    loss, grad = mse_loss(np.array([1.0, 2.0]), np.array([0.0, 0.0]))
    assert loss == 2.5
    assert grad.tolist() == [1.0, 2.0]
    with pytest.raises(ShapeMismatchError):
        mse_loss(np.zeros(2), np.zeros(3))


def test_sgd_step():
    params = FlatParams(values=np.array([1.0, 2.0]), boundaries=boundaries_for([2]))
    grads = params.replace(np.array([0.5, -1.0]))
    assert sgd_step(params, grads, 0.1).values.tolist() == [1.0 - 0.1 * 0.5, 2.0 + 0.1]
    assert sgd_step(params, grads, 0.0).values.tolist() == [1.0, 2.0]
    with pytest.raises(ValueError):
        sgd_step(params, grads, -0.1)


def test_relative_error_of_zero_vectors_is_zero():
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0


def test_identity_dense_and_unit_conv_examples():
    identity = Network((2,), [Dense(2, 2)], [np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])])
    assert forward(identity, np.array([1.0, 2.0]))[0].tolist() == [1.0, 2.0]

    conv = Network((1, 2, 2), [Conv2d(1, 1, 1)], [np.array([2.0, 1.0])])
    assert np.array_equal(forward(conv, np.ones((1, 2, 2)))[0], np.full((1, 2, 2), 3.0))


def test_dense_weight_gradient_by_hand():
    net = Network((2,), [Dense(2, 2)], [np.array([1.0, 2.0, 3.0, 4.0, 0.0, 0.0])])
    _, tape = forward(net, np.array([1.0, 0.0]))
    grads, _ = backward(net, tape, np.array([1.0, 0.0]))
    assert grads.values.tolist() == [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]


def test_numerical_gradient_of_quadratic_and_constant():
    w = np.array([3.0, -1.0])
    assert np.allclose(numerical_gradient(lambda v: 0.5 * float(v @ v), w), [3.0, -1.0])
    assert not np.any(numerical_gradient(lambda v: 4.0, w))


def test_sgd_and_mse_direct_formulas():
    params = FlatParams(values=np.array([1.0, 1.0]), boundaries=boundaries_for([2]))
    assert sgd_step(params, params.replace(np.array([1.0, -1.0])), 0.5).values.tolist() == [0.5, 1.5]

    loss, grad = mse_loss(np.array([1.0, 1.0]), np.array([0.0, 0.0]))
    assert (loss, grad.tolist()) == (1.0, [1.0, 1.0])
    loss, grad = mse_loss(np.ones(3), np.ones(3))
    assert loss == 0.0 and not np.any(grad)


def test_mse_matches_elementwise_loop(rng):
    pred, target = rng.uniform(size=(3, 32, 32)), rng.uniform(size=(3, 32, 32))
    total = 0.0
    for value, reference in zip(pred.ravel(), target.ravel()):
        total += (value - reference) ** 2
    assert mse_loss(pred, target)[0] == pytest.approx(total / pred.size, rel=1e-12)


def test_forward_is_deterministic(desk_model, rng):
    image = rng.uniform(size=(1, 8, 8))
    first, _ = forward(desk_model.encoder, image)
    second, _ = forward(desk_model.encoder, image)
    assert first.tobytes() == second.tobytes()
