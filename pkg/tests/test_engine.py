import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ntlgen.engine import (
    AdamState,
    GradientTape,
    Tensor,
    activation,
    adam_step,
    backward,
    batch_norm,
    concat_channels,
    conv2d,
    conv_transpose2d,
    dropout,
    grad,
    grad_check,
    relu,
    sigmoid,
    tanh,
)
from ntlgen.engine.ops import RunningStats
from ntlgen.errors import ConfigError, DegenerateBatchError, NumericError, ShapeError

from oracles import conv2d_loops, conv_transpose2d_loops


def T(a, rg=False):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=rg)


# conv2d ---------------------------------------------------------------------


def test_conv2d_single_dot_product():
    out = conv2d(T([[[[1, 2], [3, 4]]]]), T([[[[1, 0], [0, 1]]]]), T([0.0]))
    assert out.shape == (1, 1, 1, 1)
    assert out.data[0, 0, 0, 0] == 5.0


def test_conv2d_zero_kernel_gives_zeros():
    rng = np.random.default_rng(1)
    out = conv2d(T(rng.standard_normal((2, 3, 7, 5))), T(np.zeros((4, 3, 3, 3))), T(np.zeros(4)), 2, 1)
    assert out.shape == (2, 4, 4, 3)
    assert not out.data.any()


def test_conv2d_matches_loop_oracle():
    rng = np.random.default_rng(2)
    x, k, b = rng.standard_normal((1, 2, 8, 8)), rng.standard_normal((3, 2, 3, 3)), rng.standard_normal(3)
    out = conv2d(T(x), T(k), T(b), stride=2, padding=1)
    assert out.shape == (1, 3, 4, 4)
    np.testing.assert_allclose(out.data, conv2d_loops(x, k, b, 2, 1), rtol=0, atol=1e-12)


def test_conv2d_errors():
    with pytest.raises(ShapeError):
        conv2d(T(np.zeros((1, 2, 4, 4))), T(np.zeros((1, 3, 3, 3))))
    with pytest.raises(ShapeError):
        conv2d(T(np.zeros((1, 1, 2, 2))), T(np.zeros((1, 1, 3, 3))))
    with pytest.raises(NumericError):
        conv2d(T([[[[np.nan, 0], [0, 0]]]]), T(np.ones((1, 1, 2, 2))))


# conv_transpose2d -----------------------------------------------------------


def test_conv_transpose_scales_kernel():
    out = conv_transpose2d(T([[[[2.0]]]]), T([[[[1, 2], [3, 4]]]]), T([0.0]), stride=2)
    np.testing.assert_array_equal(out.data, [[[[2, 4], [6, 8]]]])


def test_conv_transpose_zero_input_is_bias():
    out = conv_transpose2d(T(np.zeros((1, 2, 3, 3))), T(np.ones((2, 3, 4, 4))), T([1.0, -2.0, 0.5]), 2, 1)
    assert out.shape == (1, 3, 6, 6)
    np.testing.assert_array_equal(out.data, np.broadcast_to(np.array([1.0, -2.0, 0.5])[None, :, None, None], out.shape))


def test_conv_transpose_matches_loop_oracle():
    rng = np.random.default_rng(3)
    x, k, b = rng.standard_normal((2, 3, 4, 5)), rng.standard_normal((3, 2, 4, 4)), rng.standard_normal(2)
    out = conv_transpose2d(T(x), T(k), T(b), 2, 1)
    np.testing.assert_allclose(out.data, conv_transpose2d_loops(x, k, b, 2, 1), atol=1e-12)


def test_conv_transpose_input_gradient_is_forward_conv():
    rng = np.random.default_rng(4)
    k = rng.standard_normal((1, 1, 3, 3))
    x = T(rng.standard_normal((1, 1, 4, 4)), rg=True)
    out = conv_transpose2d(x, T(k), None, 1, 0)
    upstream = rng.standard_normal(out.shape)
    backward((out * T(upstream)).sum())
    np.testing.assert_allclose(x.grad, conv2d_loops(upstream, k, None, 1, 0), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    stride=st.integers(1, 3),
    pad=st.integers(0, 2),
    k=st.integers(1, 4),
    cin=st.integers(1, 3),
    cout=st.integers(1, 3),
    ho=st.integers(1, 4),
)
def test_conv_adjoint_identity(seed, stride, pad, k, cin, cout, ho):
    # choose H so that conv_transpose maps the conv output back onto H exactly
    h = (ho - 1) * stride - 2 * pad + k
    if h < 1:
        return
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, cin, h, h))
    kern = rng.standard_normal((cout, cin, k, k))
    y = rng.standard_normal((2, cout, ho, ho))
    lhs = np.sum(conv2d(T(x), T(kern), None, stride, pad).data * y)
    rhs = np.sum(x * conv_transpose2d(T(y), T(kern), None, stride, pad).data)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


# batch_norm -----------------------------------------------------------------


def test_batch_norm_two_values():
    x = T(np.array([1.0, 3.0]).reshape(1, 1, 1, 2))
    out = batch_norm(x, T([1.0]), T([0.0]), eps=1e-5)
    expected = 1 / math.sqrt(1 + 1e-5)
    np.testing.assert_allclose(out.data.ravel(), [-expected, expected], rtol=1e-15)


def test_batch_norm_standardized_input_is_nearly_unchanged():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((4, 2, 5, 5))
    x = (x - x.mean(axis=(0, 2, 3), keepdims=True)) / x.std(axis=(0, 2, 3), keepdims=True)
    out = batch_norm(T(x), T(np.ones(2)), T(np.zeros(2)), eps=1e-5)
    np.testing.assert_allclose(out.data, x / math.sqrt(1 + 1e-5), rtol=1e-12)


def test_batch_norm_zero_gamma_gives_beta():
    rng = np.random.default_rng(6)
    out = batch_norm(T(rng.standard_normal((2, 3, 4, 4))), T(np.zeros(3)), T([0.5, -1.0, 2.0]))
    np.testing.assert_array_equal(out.data, np.broadcast_to(np.array([0.5, -1.0, 2.0])[None, :, None, None], out.shape))


def test_batch_norm_output_moments():
    rng = np.random.default_rng(7)
    x = 3.0 * rng.standard_normal((2, 3, 6, 6)) + 1.5
    eps = 1e-5
    out = batch_norm(T(x), T(np.ones(3)), T(np.zeros(3)), eps=eps).data
    var = x.var(axis=(0, 2, 3))
    np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0.0, atol=1e-6)
    np.testing.assert_allclose(out.var(axis=(0, 2, 3)), 1.0 / (1.0 + eps / var), atol=1e-6)


def test_batch_norm_running_stats_and_eval():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((2, 2, 3, 3)) + 4.0
    stats = RunningStats.init(2, np.float64)
    batch_norm(T(x), T(np.ones(2)), T(np.zeros(2)), mode="train", running_stats=stats)
    np.testing.assert_allclose(stats.mean, 0.1 * x.mean(axis=(0, 2, 3)))
    np.testing.assert_allclose(stats.var, 0.9 + 0.1 * x.var(axis=(0, 2, 3)))
    out = batch_norm(T(x), T(np.ones(2)), T(np.zeros(2)), mode="eval", running_stats=stats)
    ref = (x - stats.mean[None, :, None, None]) / np.sqrt(stats.var[None, :, None, None] + 1e-5)
    np.testing.assert_allclose(out.data, ref)


def test_batch_norm_degenerate_batch():
    with pytest.raises(DegenerateBatchError):
        batch_norm(T(np.ones((1, 2, 1, 1))), T(np.ones(2)), T(np.zeros(2)))


# activations ----------------------------------------------------------------


def test_activation_values():
    np.testing.assert_allclose(activation(T([-1.0, 3.0]), "leaky_relu", 0.2).data, [-0.2, 3.0])
    assert activation(T([0.0]), "tanh").data[0] == 0.0
    assert activation(T([0.0]), "sigmoid").data[0] == 0.5
    np.testing.assert_array_equal(activation(T([-2.0, 0.0, 2.0]), "relu").data, [0.0, 0.0, 2.0])
    with pytest.raises(ConfigError):
        activation(T([0.0]), "gelu")


def test_sigmoid_symmetry():
    x = np.random.default_rng(9).normal(0, 5, 1000)
    np.testing.assert_allclose(sigmoid(T(x)).data + sigmoid(T(-x)).data, 1.0, atol=1e-12)


def test_sigmoid_extreme_inputs_are_finite():
    y = sigmoid(T([-1000.0, 1000.0])).data
    assert np.all(np.isfinite(y))
    assert y[0] == 0.0 and y[1] == 1.0


def test_relu_subgradient_at_zero_is_zero():
    x = T([0.0, 1.0], rg=True)
    backward(relu(x).sum())
    np.testing.assert_array_equal(x.grad, [0.0, 1.0])


# dropout --------------------------------------------------------------------


def test_dropout_rate_zero_is_identity():
    x = T(np.arange(6.0))
    assert dropout(x, 0.0, seed=1) is x


def test_dropout_is_reproducible():
    x = T(np.ones((3, 4, 5)))
    a = dropout(x, 0.5, seed=42).data
    b = dropout(x, 0.5, seed=42).data
    np.testing.assert_array_equal(a, b)
    assert set(np.unique(a)) <= {0.0, 2.0}
    assert not np.array_equal(a, dropout(x, 0.5, seed=43).data)


def test_dropout_preserves_expectation():
    out = dropout(T(np.ones(100_000)), 0.5, seed=0).data
    assert abs(out.mean() - 1.0) < 0.01


def test_dropout_modes():
    x = T(np.ones(50))
    np.testing.assert_array_equal(dropout(x, 0.5, 3, "eval").data, dropout(x, 0.5, 3, "train").data)
    assert dropout(x, 0.5, 3, "off") is x
    with pytest.raises(ConfigError):
        dropout(x, 1.0, 0)


# concat ---------------------------------------------------------------------


def test_concat_shape_and_roundtrip():
    rng = np.random.default_rng(10)
    a = rng.standard_normal((1, 2, 4, 4))
    out = concat_channels(T(a), T(np.zeros((1, 3, 4, 4))))
    assert out.shape == (1, 5, 4, 4)
    np.testing.assert_array_equal(out[:, :2].data, a)


def test_concat_gradient_splits():
    a, b = T(np.ones((1, 2, 3, 3)), rg=True), T(np.ones((1, 1, 3, 3)), rg=True)
    backward(concat_channels(a, b).sum())
    np.testing.assert_array_equal(a.grad, np.ones(a.shape))
    np.testing.assert_array_equal(b.grad, np.ones(b.shape))


def test_concat_spatial_mismatch():
    with pytest.raises(ShapeError):
        concat_channels(T(np.zeros((1, 1, 4, 4))), T(np.zeros((1, 1, 4, 3))))


# backward -------------------------------------------------------------------


def test_backward_square():
    x = T(3.0, rg=True)
    backward(x * x)
    assert x.grad == 6.0


def test_backward_constant_gives_zero_gradient():
    x = T(np.ones(3), rg=True)
    (g,) = grad((x * 0.0).sum() + 5.0, [x])
    np.testing.assert_array_equal(g, 0.0)


def test_backward_requires_scalar():
    with pytest.raises(ShapeError):
        backward(T(np.ones(3), rg=True) * 2.0)


def test_backward_overwrites_instead_of_accumulating():
    x = T(2.0, rg=True)
    loss = x * x
    backward(loss)
    backward(loss)
    assert x.grad == 4.0


def test_tape_is_topologically_ordered():
    x = T(np.ones(2), rg=True)
    y = tanh(x) * x
    loss = (y + x).sum()
    tape = GradientTape.record(loss)
    position = {id(n): i for i, n in enumerate(tape.nodes)}
    for node in tape.nodes:
        for parent in node._parents:
            assert position[id(parent)] < position[id(node)]
    assert tape.nodes[-1] is loss


def test_mean_tanh_conv_matches_finite_differences():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((1, 1, 5, 5))
    k = rng.standard_normal((1, 1, 3, 3))
    report = grad_check(lambda x, k: tanh(conv2d(x, k)).mean(), [x, k], tolerance=1e-6)
    assert report.passed, report


def test_deep_graph_does_not_hit_recursion_limit():
    x = T(1.0, rg=True)
    y = x
    for _ in range(5000):
        y = y * 1.0
    backward(y)
    assert x.grad == 1.0


# adam -----------------------------------------------------------------------


def test_adam_first_step():
    p = {"w": T([1.0])}
    state = AdamState(lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8)
    adam_step(p, {"w": np.array([1.0])}, state)
    assert state.step == 1
    np.testing.assert_allclose(p["w"].data, [1.0 - 0.001], atol=1e-10)


def test_adam_zero_gradient_keeps_parameter():
    p = {"w": T([0.3, -0.2])}
    state = AdamState()
    adam_step(p, {"w": np.zeros(2)}, state)
    np.testing.assert_array_equal(p["w"].data, [0.3, -0.2])


def test_adam_symmetric_parameters_move_identically():
    p = {"a": T([0.5]), "b": T([0.5])}
    state = AdamState()
    for g in (0.3, -1.0, 2.0):
        adam_step(p, {"a": np.array([g]), "b": np.array([g])}, state)
    np.testing.assert_array_equal(p["a"].data, p["b"].data)
    assert state.step == 3


def test_adam_shape_mismatch():
    with pytest.raises(ShapeError):
        adam_step({"w": T(np.zeros(2))}, {"w": np.zeros(3)}, AdamState())


def test_adam_defaults():
    s = AdamState()
    assert (s.lr, s.beta1, s.beta2, s.eps) == (2e-4, 0.5, 0.999, 1e-8)


# grad_check -----------------------------------------------------------------


def test_grad_check_linear_is_exact():
    report = grad_check(lambda x: x * 2.0, [np.random.default_rng(0).standard_normal(5)], 1e-6)
    assert report.passed and report.max_rel_error < 1e-9


def test_grad_check_batch_norm():
    rng = np.random.default_rng(12)
    report = grad_check(
        lambda x, g, b: batch_norm(x, g, b),
        [rng.standard_normal((2, 2, 3, 3)), rng.standard_normal(2), rng.standard_normal(2)],
        1e-4,
    )
    assert report.passed, report


def test_grad_check_relu_kink_is_excluded():
    report = grad_check(relu, [np.array([0.0, 1.0, -2.0])], 1e-6, kinks=[0.0])
    assert report.passed
    assert report.kink_excluded and report.n_kink_excluded == 1


@pytest.mark.parametrize(
    "op",
    [
        lambda x: conv2d(x, Tensor(np.linspace(-1, 1, 18, dtype=np.float32).reshape(2, 1, 3, 3)), None, 1, 1),
        lambda x: tanh(x),
        lambda x: sigmoid(x),
        lambda x: batch_norm(x, Tensor(np.float32([1.2])), Tensor(np.float32([0.1]))),
    ],
)
def test_float32_gradients_within_1e_2(op):
    x = np.random.default_rng(13).standard_normal((1, 1, 4, 4)).astype(np.float32)
    report = grad_check(op, [x], 1e-2)
    assert report.passed, report
