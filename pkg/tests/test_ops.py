import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from samba_seg import ops
from samba_seg.errors import ShapeError
from samba_seg.gradcheck import finite_difference_check
from samba_seg.tensor import Tensor, default_dtype

from op_cases import OP_NAMES, cases, weighted


def T(x):
    return Tensor(np.asarray(x, dtype=np.float64), dtype=np.float64)


# -- examples ---------------------------------------------------------------

def test_matmul_examples(f64):
    b = T([[3, 4], [5, 6]])
    np.testing.assert_array_equal(ops.matmul(T(np.eye(2)), b).data, b.data)
    np.testing.assert_array_equal(ops.matmul(T([[1, 2]]), T([[3], [4]])).data, [[11]])
    np.testing.assert_array_equal(ops.matmul(T(np.zeros((2, 2))), b).data, np.zeros((2, 2)))


def test_matmul_shape_error_names_both_shapes(f64):
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
        ops.matmul(T(np.ones((2, 3))), T(np.ones((2, 2))))


def test_conv2d_examples(f64, rng):
    x = T(rng.normal(size=(1, 1, 3, 3)))
    np.testing.assert_array_equal(ops.conv2d(x, T([[[[1.0]]]])).data, x.data)
    out = ops.conv2d(T(np.ones((1, 1, 3, 3))), T(np.ones((1, 1, 3, 3))))
    np.testing.assert_array_equal(out.data, [[[[9.0]]]])
    out = ops.conv2d(T(np.ones((1, 1, 4, 4))), T(np.ones((1, 1, 3, 3))), stride=2, pad=1)
    assert out.shape == (1, 1, 2, 2)


def test_conv2d_is_cross_correlation(f64):
    x = T(np.arange(9.0).reshape(1, 1, 3, 3))
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 0, 0] = 1.0   # top-left tap picks the top-left pixel
    assert ops.conv2d(x, T(w)).data.item() == 0.0


def test_conv2d_kernel_larger_than_input(f64):
    with pytest.raises(ShapeError):
        ops.conv2d(T(np.ones((1, 1, 2, 2))), T(np.ones((1, 1, 3, 3))))


def test_conv2d_matches_direct_loop(f64, rng):
    x = rng.normal(size=(2, 3, 6, 5))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)
    out = ops.conv2d(T(x), T(w), T(b), stride=2, pad=1).data
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.zeros_like(out)
    for i in range(out.shape[2]):
        for j in range(out.shape[3]):
            patch = xp[:, :, 2 * i:2 * i + 3, 2 * j:2 * j + 3]
            ref[:, :, i, j] = np.einsum("bchw,ochw->bo", patch, w) + b
    np.testing.assert_allclose(out, ref, atol=1e-12)


def test_depthwise_conv1d_examples(f64, rng):
    x = T(rng.normal(size=(2, 3, 5)))
    w = np.zeros((3, 4))
    w[:, 0] = 1.0
    np.testing.assert_array_equal(ops.depthwise_conv1d(x, T(w)).data, x.data)
    out = ops.depthwise_conv1d(T([[[1, 2, 3]]]), T([[0, 1]]))
    np.testing.assert_array_equal(out.data, [[[0, 1, 2]]])
    np.testing.assert_array_equal(ops.depthwise_conv1d(x, T(np.zeros((3, 4)))).data, 0.0)


def test_layer_norm_examples(f64, rng):
    d = 4
    one, zero = T(np.ones(d)), T(np.zeros(d))
    np.testing.assert_array_equal(ops.layer_norm(T(np.full((2, d), 3.0)), one, zero).data, 0.0)
    out = ops.layer_norm(T([1.0, -1.0]), T([1.0, 1.0]), T([0.0, 0.0]), eps=1e-12)
    np.testing.assert_allclose(out.data, [1.0, -1.0], atol=1e-9)
    out = ops.layer_norm(T(rng.normal(size=(3, d))), zero, T(np.full(d, 5.0)))
    np.testing.assert_array_equal(out.data, 5.0)
    with pytest.raises(ShapeError):
        ops.layer_norm(T(np.ones((2, 0))), T(np.ones(0)), T(np.ones(0)))


def test_activation_values(f64):
    assert ops.softplus(T([0.0])).item() == pytest.approx(math.log(2.0), abs=1e-15)
    assert ops.silu(T([0.0])).item() == 0.0
    assert ops.sigmoid(T([0.0])).item() == 0.5
    x = T([0.0])
    x.requires_grad = True
    g = finite_difference_check(lambda: ops.softplus(x).sum(), [x])
    assert g < 1e-9
    from samba_seg.gradcheck import analytic_gradients
    assert analytic_gradients(lambda: ops.softplus(x).sum(), [x])[0].item() == 0.5


def test_softplus_saturates_without_overflow(f64):
    out = ops.softplus(T([-800.0, 800.0])).data
    np.testing.assert_allclose(out, [0.0, 800.0])


def test_bilinear_resize_examples(f64, rng):
    x = T(rng.normal(size=(1, 2, 3, 5)))
    np.testing.assert_array_equal(ops.bilinear_resize(x, 3, 5).data, x.data)
    const = ops.bilinear_resize(T(np.full((1, 1, 3, 3), 2.5)), 7, 4).data
    np.testing.assert_allclose(const, 2.5, atol=1e-12)
    up = ops.bilinear_resize(T([[[[0.0, 1.0], [0.0, 1.0]]]]), 2, 4).data[0, 0]
    assert np.all(np.diff(up, axis=1) >= 0)
    # half-pixel grid: [0, 0.25, 0.75, 1]
    np.testing.assert_allclose(up[0], [0.0, 0.25, 0.75, 1.0])


def test_adaptive_pool_examples(f64):
    out = ops.adaptive_avg_pool2d(T([[[[1.0, 3.0], [5.0, 7.0]]]]), 1)
    assert out.data.item() == 4.0
    with pytest.raises(ShapeError):
        ops.adaptive_avg_pool2d(T(np.ones((1, 1, 2, 2))), 3)


def test_adaptive_pool_overlapping_bins(f64):
    x = np.arange(5.0).reshape(1, 1, 1, 5)
    out = ops.adaptive_avg_pool2d(T(x), 1, 2).data[0, 0, 0]
    # bins [0, 3) and [2, 5)
    np.testing.assert_allclose(out, [1.0, 3.0])


def test_dropout_train_and_eval(rng):
    x = Tensor(np.ones((100, 100)))
    assert ops.dropout(x, 0.1, rng, training=False) is x
    y = ops.dropout(x, 0.5, rng).data
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert abs(y.mean() - 1.0) < 0.05


def test_concat_and_getitem(f64):
    a, b = T([[1.0, 2.0]]), T([[3.0, 4.0]])
    np.testing.assert_array_equal(ops.concat([a, b], axis=0).data, [[1, 2], [3, 4]])
    np.testing.assert_array_equal(ops.concat([a, b], axis=0)[:, 1].data, [2, 4])


# -- gradient checks ------------------------------------------------------------

@pytest.mark.parametrize("name", OP_NAMES)
def test_gradient_64bit(name):
    rng = np.random.default_rng(7)
    with default_dtype(np.float64):
        fn, params = cases(rng)[name]
        assert sum(p.size for p in params) <= 64
        err = finite_difference_check(weighted(fn, rng), params)
    assert err <= 1e-5, f"{name}: {err}"


@pytest.mark.parametrize("name", OP_NAMES)
def test_gradient_32bit(name):
    rng = np.random.default_rng(7)
    with default_dtype(np.float32):
        fn, params = cases(rng)[name]
        err = finite_difference_check(weighted(fn, rng), params)
    assert err <= 1e-2, f"{name}: {err}"


def test_relu_gradient_away_from_kink(f64):
    x = Tensor(np.array([-1.0, -0.3, 0.4, 2.0]), requires_grad=True)
    assert finite_difference_check(lambda: ops.sum(ops.mul(ops.relu(x), x)), [x]) < 1e-9


# -- linearity -----------------------------------------------------------------

LINEAR = {
    "matmul": (lambda x: ops.matmul(x, Tensor(np.arange(12.0).reshape(4, 3) / 7)), (2, 4)),
    "conv2d": (lambda x: ops.conv2d(x, Tensor(np.linspace(-1, 1, 18).reshape(1, 2, 3, 3)), pad=1),
               (1, 2, 4, 4)),
    "depthwise_conv1d": (lambda x: ops.depthwise_conv1d(x, Tensor([[0.5, -1.0, 2.0]])), (2, 1, 6)),
    "bilinear_resize": (lambda x: ops.bilinear_resize(x, 7, 3), (1, 2, 4, 5)),
}


@pytest.mark.parametrize("name", list(LINEAR))
@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(-3, 3), beta=st.floats(-3, 3), seed=st.integers(0, 2**31))
def test_linearity(name, alpha, beta, seed):
    fn, shape = LINEAR[name]
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64):
        x, y = rng.normal(size=shape), rng.normal(size=shape)
        lhs = fn(Tensor(alpha * x + beta * y)).data
        rhs = alpha * fn(Tensor(x)).data + beta * fn(Tensor(y)).data
    scale = max(1.0, np.abs(rhs).max())
    assert np.abs(lhs - rhs).max() <= 1e-5 * scale


def test_determinism(rng):
    x = Tensor(rng.normal(size=(1, 3, 8, 8)))
    w = Tensor(rng.normal(size=(4, 3, 3, 3)))
    a = ops.silu(ops.conv2d(x, w, pad=1)).data
    b = ops.silu(ops.conv2d(x, w, pad=1)).data
    assert np.array_equal(a, b)


def test_flop_counter_counts_multiply_adds(f64):
    with ops.flop_counter() as box:
        ops.matmul(T(np.ones((2, 3))), T(np.ones((3, 4))))
    assert box[0] == 2 * 2 * 3 * 4
    with ops.flop_counter() as box:
        ops.conv2d(T(np.ones((1, 2, 4, 4))), T(np.ones((3, 2, 3, 3))), pad=1)
    assert box[0] == 2 * 16 * 3 * 2 * 9
