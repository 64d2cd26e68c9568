import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedpmg import model
from fedpmg.errors import InvalidInput, ShapeError
from oracles import gradient_check_errors


def test_param_counts():
    assert model.param_count(2) == 2 * 16 * 9 + 16 + 16 * 16 * 9 + 16 + 16 * 9 + 1 == 2769
    assert model.param_count(1) == 2625
    with pytest.raises(InvalidInput):
        model.param_count(3)


def test_untrained_net_is_identity(rng):
    p = model.init_params(2, seed=0)
    x = rng.random((3, 2, 8, 8)).astype(np.float32)
    np.testing.assert_array_equal(model.forward(p, x)[:, 0], x[:, 0])


def test_zero_params_identity(rng):
    p = model.ModelParams(np.zeros(model.param_count(1)), 1)
    x = rng.random((2, 1, 5, 6))
    np.testing.assert_array_equal(model.forward(p, x), x)


def test_forward_hand_computed():
    # conv1 passes the input through a centre tap on unit 0; conv2 copies it;
    # conv3 sums the 3x3 neighbourhood of unit 0 with bias 0.5
    p = model.ModelParams(np.zeros(model.param_count(1)), 1)
    w = p.unpack()
    w["conv1.weight"][0, 0, 1, 1] = 1.0
    w["conv2.weight"][0, 0, 1, 1] = 1.0
    w["conv3.weight"][0, 0] = 1.0
    w["conv3.bias"][0] = 0.5
    x = np.arange(9, dtype=float).reshape(1, 1, 3, 3) - 4  # ReLU clips negatives
    out = model.forward(p, x)[0, 0]
    relu = np.maximum(x[0, 0], 0)
    padded = np.pad(relu, 1)
    box = sum(padded[i:i + 3, j:j + 3] for i in range(3) for j in range(3))
    np.testing.assert_allclose(out, box + 0.5 + x[0, 0], atol=1e-12)


def test_l1_loss_cases():
    loss, g = model.l1_loss(np.array([1.0, 2.0, 3.0, 4.0]), np.array([0.0, 2.0, 5.0, 4.5]))
    assert loss == pytest.approx((1 + 0 + 2 + 0.5) / 4)
    np.testing.assert_array_equal(g, [0.25, 0.0, -0.25, -0.25])
    with pytest.raises(ShapeError):
        model.l1_loss(np.zeros(3), np.zeros(4))


def test_shape_errors(rng):
    p = model.init_params(2, 0)
    with pytest.raises(ShapeError):
        model.forward(p, rng.random((1, 1, 8, 8)))
    with pytest.raises(ShapeError):
        model.forward(p, rng.random((2, 8, 8)))
    with pytest.raises(ShapeError):
        model.ModelParams(np.zeros(5), 2)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    errs = gradient_check_errors(seed)
    assert len(errs) >= 10
    assert max(errs) <= 1e-4


def test_conv3_bias_gradient_is_sum(rng):
    p = model.init_params(2, 3, dtype=np.float64)
    x = rng.random((2, 2, 6, 6))
    gp = rng.standard_normal((2, 1, 6, 6))
    g = model.backward(p, x, gp)
    assert g[-1] == pytest.approx(gp.sum(), rel=1e-12)


def test_adam_first_step_is_signed_lr():
    p = model.ModelParams(np.ones(model.param_count(1)), 1)
    g = np.linspace(-1, 1, p.vector.size)
    g[g == 0] = 0.5
    st_ = model.AdamState.fresh(p.vector.size, lr=1e-3, dtype=np.float64)
    p2, st2 = model.adam_step(p, g, st_)
    np.testing.assert_allclose(p2.vector - p.vector, -1e-3 * np.sign(g), rtol=1e-4)
    assert st2.t == 1 and st_.t == 0


def test_adam_minimises_quadratic():
    # fit a constant output of 3 with the conv3 bias; the net starts at identity on zeros
    p = model.init_params(1, 0, dtype=np.float64)
    x = np.zeros((4, 1, 4, 4))
    y = np.full((4, 1, 4, 4), 3.0)
    state = model.AdamState.fresh(p.vector.size, lr=0.05, dtype=np.float64)
    for _ in range(400):
        loss, g = model.loss_and_grad(p, x, y)
        p, state = model.adam_step(p, g, state)
    assert loss < 0.05
    assert np.max(np.abs(model.forward(p, x) - 3)) < 0.1


def test_float32_training_dtype(rng):
    p = model.init_params(2, 1)
    x = rng.random((2, 2, 8, 8)).astype(np.float32)
    loss, g = model.loss_and_grad(p, x, x[:, :1] * 0.5)
    assert g.dtype == np.float32 and np.isfinite(loss)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(3, 9), st.integers(3, 9), st.sampled_from([1, 2]))
def test_forward_shape_and_residual(n, h, w, c):
    rng = np.random.default_rng(n * h * w)
    p = model.init_params(c, h)
    x = rng.random((n, c, h, w)).astype(np.float32)
    out = model.forward(p, x)
    assert out.shape == (n, 1, h, w)
    # conv3 at zero means the output is exactly channel 0
    np.testing.assert_array_equal(out[:, 0], x[:, 0])


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000))
def test_backward_is_linear_in_grad_pred(seed):
    rng = np.random.default_rng(seed)
    p = model.init_params(1, seed, dtype=np.float64)
    p.vector[:] += rng.normal(0, 0.1, p.vector.size)
    x = rng.random((1, 1, 5, 5))
    a, b = rng.standard_normal((2, 1, 1, 5, 5))
    lhs = model.backward(p, x, 2 * a - b)
    rhs = 2 * model.backward(p, x, a) - model.backward(p, x, b)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)
