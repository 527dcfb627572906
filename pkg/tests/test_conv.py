import numpy as np
import pytest

from vinp.errors import ContractError
from vinp.grad import ops
from vinp.grad.check import grad_check
from vinp.grad.conv import conv_nd, conv_transpose_nd, out_extent
from vinp.grad.tensor import Tensor


def rand(shape, seed, requires_grad=False):
    return Tensor(np.random.default_rng(seed).normal(size=shape), requires_grad=requires_grad)


@pytest.mark.parametrize("n,expected", [(4, 2), (5, 3), (8, 4), (16, 8), (32, 16)])
def test_out_extent_halves_rounding_up(n, expected):
    assert out_extent(n, 5, 2, 2) == expected


def test_conv_shapes_2d_and_3d():
    x3 = rand((2, 3, 8, 8, 8), 0)
    w3 = rand((4, 3, 5, 5, 5), 1)
    assert conv_nd(x3, w3, None).shape == (2, 4, 4, 4, 4)
    x2 = rand((1, 2, 6, 6), 2)
    w2 = rand((5, 2, 5, 5), 3)
    assert conv_nd(x2, w2, rand((5,), 4)).shape == (1, 5, 3, 3)


def test_conv_matches_direct_sum():
    x = rand((1, 1, 4, 4), 0)
    w = rand((1, 1, 5, 5), 1)
    y = conv_nd(x, w, None).data
    xp = np.pad(x.data[0, 0], 2)
    for i in range(2):
        for j in range(2):
            expected = np.sum(xp[2 * i:2 * i + 5, 2 * j:2 * j + 5] * w.data[0, 0])
            assert y[0, 0, i, j] == pytest.approx(expected)


def test_transpose_doubles_extent():
    x = rand((2, 4, 3, 3, 3), 0)
    w = rand((4, 2, 5, 5, 5), 1)
    assert conv_transpose_nd(x, w, rand((2,), 2)).shape == (2, 2, 6, 6, 6)


def test_transpose_is_adjoint_of_conv():
    # <conv(x), y> == <x, conv_t(y)> for the same weight
    x = rand((2, 3, 4, 4, 4), 0)
    w = rand((2, 3, 5, 5, 5), 1)
    y = rand((2, 2, 2, 2, 2), 2)
    lhs = np.sum(conv_nd(x, w, None).data * y.data)
    rhs = np.sum(x.data * conv_transpose_nd(y, w, None).data)
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_channel_mismatch_raises():
    with pytest.raises(ContractError):
        conv_nd(rand((1, 2, 4, 4), 0), rand((3, 4, 5, 5), 1), None)
    with pytest.raises(ContractError):
        conv_transpose_nd(rand((1, 2, 2, 2), 0), rand((3, 4, 5, 5), 1), None)


def test_rank_mismatch_raises():
    with pytest.raises(ContractError):
        conv_nd(rand((1, 2, 4), 0), rand((3, 2, 5), 1), None)


def test_float32_input_keeps_float32():
    x = Tensor(np.ones((1, 1, 4, 4), dtype=np.float32))
    w = Tensor(np.ones((1, 1, 5, 5), dtype=np.float32))
    assert conv_nd(x, w, None).dtype == np.float32


def test_conv_gradients():
    x = rand((2, 2, 4, 4, 4), 0, True)
    w = rand((3, 2, 5, 5, 5), 1, True)
    b = rand((3,), 2, True)
    r = rand((2, 3, 2, 2, 2), 3)
    report = grad_check(lambda: ops.sum(conv_nd(x, w, b) * r), {"x": x, "w": w, "b": b},
                        1e-4, h=1e-6, sample=20)
    assert report.passed(), report.per_input


def test_conv_transpose_gradients():
    x = rand((2, 3, 2, 2, 2), 0, True)
    w = rand((3, 2, 5, 5, 5), 1, True)
    b = rand((2,), 2, True)
    r = rand((2, 2, 4, 4, 4), 3)
    report = grad_check(lambda: ops.sum(conv_transpose_nd(x, w, b) * r), {"x": x, "w": w, "b": b},
                        1e-4, h=1e-6, sample=20)
    assert report.passed(), report.per_input
