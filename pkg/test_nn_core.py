#!/usr/bin/env python3
"""
Tests for the tape, the primitives, backward and Adam.
"""
import sys

import numpy as np
import pytest

from rlstate import nn_core as nn
from rlstate.errors import DivergenceError, InvalidInputError, ShapeError


@pytest.mark.parametrize("case", [
    {"name": "identity", "w": [[1, 0], [0, 1]], "b": [0, 0], "x": [1, 2], "expected": [1, 2]},
    {"name": "hand matrix multiply", "w": [[1, 1], [1, -1]], "b": [0, 0], "x": [3, 4], "expected": [7, -1]},
    {"name": "constant", "w": [[0, 0, 0]], "b": [5], "x": [9, -2, 4], "expected": [5]},
], ids=lambda c: c["name"])
def test_dense_forward(case):
    w = nn.ParamTensor("w", np.array(case["w"], dtype=float))
    b = nn.ParamTensor("b", np.array(case["b"], dtype=float))
    out = nn.dense_forward(np.array(case["x"], dtype=float), w, b)
    assert out.value.tolist() == pytest.approx(case["expected"])


def test_dense_forward_shape_mismatch():
    w = nn.ParamTensor("w", np.zeros((2, 3)))
    with pytest.raises(ShapeError) as info:
        nn.dense_forward(np.ones(2), w)
    assert info.value.data["weights"] == [2, 3]


def test_activations():
    assert float(nn.activations(np.array([0.0]), "sigmoid").value[0]) == 0.5
    assert nn.activations(np.zeros(5), "softmax").value.tolist() == pytest.approx([0.2] * 5)
    assert float(nn.activations(np.array([1000.0, 1000.0]), "log_sum_exp").value) == pytest.approx(1000.693147,
                                                                                                  abs=1e-6)
    assert nn.activations(np.array([-2.0, 0.5]), "rectifier").value.tolist() == [0.0, 0.5]
    assert float(nn.activations(np.array([0.0]), "softplus").value[0]) == pytest.approx(np.log(2.0))


def test_activations_reject_unknown_kind_and_empty_input():
    with pytest.raises(InvalidInputError):
        nn.activations(np.ones(2), "tanh")
    with pytest.raises(InvalidInputError):
        nn.activations(np.array([]), "softmax")


def test_backward_square():
    x = nn.ParamTensor("x", np.array([3.0]))
    with nn.Tape() as tape:
        loss = nn.reduce_sum(nn.square(x))
    nn.backward(tape, loss, [x])
    assert x.grad.tolist() == pytest.approx([6.0])


def test_backward_sigmoid():
    x = nn.ParamTensor("x", np.array([0.0]))
    with nn.Tape() as tape:
        loss = nn.reduce_sum(nn.sigmoid(x))
    nn.backward(tape, loss, [x])
    assert x.grad.tolist() == pytest.approx([0.25])


def test_backward_zeroes_disconnected_params():
    x = nn.ParamTensor("x", np.array([2.0]))
    unused = nn.ParamTensor("unused", np.array([1.0, 1.0]))
    unused.grad = np.array([4.0, 4.0])
    with nn.Tape() as tape:
        loss = nn.reduce_sum(nn.multiply(x, 5.0))
    nn.backward(tape, loss, [x, unused])
    assert x.grad.tolist() == [5.0]
    assert unused.grad.tolist() == [0.0, 0.0]


def test_backward_rejects_non_scalar_loss():
    x = nn.ParamTensor("x", np.array([1.0, 2.0]))
    with nn.Tape() as tape:
        out = nn.square(x)
    with pytest.raises(ShapeError):
        nn.backward(tape, out, [x])


def test_primitives_do_not_record_without_tape():
    x = nn.ParamTensor("x", np.array([1.0]))
    out = nn.exp(x)
    assert out.tape is None
    assert out.value.tolist() == pytest.approx([np.e])


def test_composite_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    w = nn.ParamTensor("w", rng.normal(size=(3, 4)))
    b = nn.ParamTensor("b", rng.normal(size=3))
    x = rng.normal(size=(5, 4))

    def loss_value():
        return float(nn.mean(nn.log_sum_exp(nn.log_softmax(nn.softplus(nn.dense_forward(x, w, b))))).value)

    with nn.Tape() as tape:
        loss = nn.mean(nn.log_sum_exp(nn.log_softmax(nn.softplus(nn.dense_forward(x, w, b)))))
    nn.backward(tape, loss, [w, b])

    step = 1e-5
    for p in (w, b):
        analytic = p.grad.copy()
        flat = p.values.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            up = loss_value()
            flat[i] = original - step
            down = loss_value()
            flat[i] = original
            numeric = (up - down) / (2 * step)
            assert analytic.reshape(-1)[i] == pytest.approx(numeric, rel=1e-4, abs=1e-8)


def test_adam_zero_gradient_is_fixed_point():
    p = nn.ParamTensor("p", np.array([1.0, -2.0]))
    state = nn.AdamState(learning_rate=0.1)
    for _ in range(5):
        nn.adam_step({"p": p}, state)
    assert p.values.tolist() == [1.0, -2.0]
    assert state.step == 5


def test_adam_moves_against_constant_gradient():
    p = nn.ParamTensor("p", np.array([0.0, 0.0]))
    state = nn.AdamState(learning_rate=0.01)
    for _ in range(20):
        p.grad = np.array([2.0, -3.0])
        nn.adam_step({"p": p}, state)
    assert p.values[0] < 0 < p.values[1]
    assert p.grad.tolist() == [0.0, 0.0]


def test_adam_decreases_quadratic_bowl():
    p = nn.ParamTensor("p", np.array([5.0, -3.0]))
    state = nn.AdamState(learning_rate=1e-2)
    losses = []
    for _ in range(100):
        with nn.Tape() as tape:
            loss = nn.reduce_sum(nn.square(p))
        losses.append(float(loss.value))
        nn.backward(tape, loss, [p])
        nn.adam_step({"p": p}, state)
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_adam_rejects_non_finite_gradient():
    p = nn.ParamTensor("p", np.array([1.0]))
    p.grad = np.array([np.nan])
    with pytest.raises(DivergenceError):
        nn.adam_step({"p": p}, nn.AdamState())
    assert p.values.tolist() == [1.0]


def test_glorot_uniform_bounds_and_clone():
    values = nn.glorot_uniform((50, 10), np.random.default_rng(1))
    assert np.all(np.abs(values) <= np.sqrt(6.0 / 60))
    params = {"w": nn.ParamTensor("w", values)}
    copied = nn.clone_params(params)
    copied["w"].values[0, 0] = 99.0
    assert params["w"].values[0, 0] != 99.0
    assert nn.parameter_count(params) == 500


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
