"""Convolution kernel vs the naive direct-summation reference."""

import numpy as np
import pytest

from solarsr.errors import ShapeMismatch
from solarsr.sr_engine import conv2d, leaky_relu, upsample_nearest2x

from oracle_net import conv2d_naive


def test_1x1_identity_kernel():
    rng = np.random.default_rng(0)
    x = rng.normal(0, 1, (1, 1, 5, 5)).astype(np.float32)
    w = np.ones((1, 1, 1, 1), dtype=np.float32)
    b = np.zeros(1, dtype=np.float32)
    assert np.array_equal(conv2d(x, w, b, padding=0), x)


def test_3x3_box_sum_on_ones():
    x = np.ones((1, 1, 4, 4), dtype=np.float32)
    w = np.ones((1, 1, 3, 3), dtype=np.float32)
    out = conv2d(x, w, None, padding=1)
    assert out.shape == (1, 1, 4, 4)
    # hand-computed: corners see a 2x2 neighborhood, interior a full 3x3
    assert out[0, 0, 0, 0] == 4.0
    assert out[0, 0, 1, 1] == 9.0
    assert out[0, 0, 0, 1] == 6.0


def test_channel_mismatch():
    x = np.zeros((1, 3, 4, 4), dtype=np.float32)
    w = np.zeros((2, 4, 3, 3), dtype=np.float32)
    with pytest.raises(ShapeMismatch):
        conv2d(x, w, None, padding=1)


@pytest.mark.parametrize("seed", range(4))
def test_conv_matches_naive_reference(seed):
    rng = np.random.default_rng(seed)
    n, ci, co, h, w, k = 2, 3, 4, 6, 5, 3
    x = rng.normal(0, 1, (n, ci, h, w)).astype(np.float32)
    wt = rng.normal(0, 0.5, (co, ci, k, k)).astype(np.float32)
    b = rng.normal(0, 0.1, co).astype(np.float32)
    fast = conv2d(x, wt, b, padding=1)
    ref = conv2d_naive(x, wt, b, 1)
    assert np.max(np.abs(fast - ref)) < 1e-5 * max(1.0, np.max(np.abs(ref)))


def test_padding_zero_shrinks_output():
    x = np.zeros((1, 1, 8, 8), dtype=np.float32)
    w = np.zeros((1, 1, 3, 3), dtype=np.float32)
    assert conv2d(x, w, None, padding=0).shape == (1, 1, 6, 6)


def test_leaky_relu_slope():
    x = np.array([[[[-1.0, 2.0]]]], dtype=np.float32)
    out = leaky_relu(x, 0.2)
    assert out[0, 0, 0, 0] == pytest.approx(-0.2)
    assert out[0, 0, 0, 1] == 2.0


def test_upsample_nearest():
    x = np.arange(4, dtype=np.float32).reshape(1, 1, 2, 2)
    out = upsample_nearest2x(x)
    assert out.shape == (1, 1, 4, 4)
    assert out[0, 0, 0, 0] == out[0, 0, 1, 1] == 0.0
    assert out[0, 0, 2, 3] == 3.0
