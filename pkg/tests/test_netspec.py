from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from qsdse.errors import InvalidShape, NonIntegerChannels
from qsdse.netspec import (
    DEFAULT_CONVENTIONS,
    DesignPoint,
    ShapeConventions,
    analytics,
    build_network,
    count_macs,
    largest_fmap_bits,
    mac_polynomial,
    model_size_bits,
)

SCALES = [Fraction(n, 2) for n in range(1, 17)]  # 0.5, 1, ..., 8
CONVENTIONS = [ShapeConventions("same", "floor"), ShapeConventions("same", "ceil")]


def _window_positions(n, k, stride, pad_total, ceil_mode=False):
    """Count window placements by walking the padded axis."""
    count = 0
    start = -(pad_total // 2)
    while start + k <= n + pad_total - pad_total // 2:
        count += 1
        start += stride
    if ceil_mode and start < n:
        count += 1  # partial trailing window
    return count


def oracle(s, conv):
    """Independent per-layer enumeration: (macs, weights, max activation elements)."""
    s = Fraction(s)
    h, w, c = 44, 13, 1
    macs = weights = 0
    largest = h * w * c
    for f_mult in (64, 32, 32):
        f = int(f_mult * s)
        pad = 2 if conv.conv_padding == "same" else 0
        h, w = _window_positions(h, 3, 1, pad), _window_positions(w, 3, 1, pad)
        macs += h * w * f * c * 9
        weights += 9 * c * f
        c = f
        largest = max(largest, h * w * c)
        ceil = conv.pool_rounding == "ceil"
        h, w = _window_positions(h, 2, 2, 0, ceil), _window_positions(w, 2, 2, 0, ceil)
        largest = max(largest, h * w * c)
    flat = h * w * c
    for width in (int(64 * s), 30):
        macs += flat * width
        weights += flat * width
        flat = width
    return macs, weights, largest


def test_filter_widths_s1():
    net = build_network(1)
    assert [l.filters for l in net.layers if l.kind == "conv2d"] == [64, 32, 32]
    assert [l.filters for l in net.layers if l.kind == "fully_connected"] == [64, 30]


def test_filter_widths_half_scale():
    net = build_network(0.5)
    assert [l.filters for l in net.layers if l.kind == "conv2d"] == [32, 16, 16]
    assert [l.filters for l in net.layers if l.kind == "fully_connected"] == [32, 30]


def test_non_integer_channels():
    with pytest.raises(NonIntegerChannels):
        build_network(0.3)


def test_valid_padding_collapses_width():
    # 13 -> 11 -> 5 -> 3 -> 1 -> -1 with unpadded 3x3 convolutions
    with pytest.raises(InvalidShape):
        build_network(1, ShapeConventions("valid", "floor"))


def test_layer_sequence_and_shapes():
    net = build_network(1)
    assert [l.kind for l in net.layers] == ["conv2d", "maxpool2d"] * 3 + ["fully_connected"] * 2
    assert [l.out_shape for l in net.layers] == [
        (44, 13, 64), (22, 6, 64), (22, 6, 32), (11, 3, 32),
        (11, 3, 32), (5, 1, 32), (1, 1, 64), (1, 1, 30),
    ]
    for a, b in zip(net.layers, net.layers[1:]):
        assert a.out_shape == b.in_shape
    assert net.layers[6].in_channels == 160


def test_mac_count_s1():
    assert [l.macs for l in build_network(1).layers if l.macs] == [329472, 2433024, 304128, 10240, 1920]
    assert count_macs(build_network(1)) == 3_078_784


def test_model_size_s1():
    net = build_network(1)
    assert model_size_bits(net, 4) == 40_384 * 4 == 161_536
    assert model_size_bits(net, 8) == 323_072
    assert round(161_536 / 8192, 1) == 19.7


def test_biases_optional():
    net = build_network(1, ShapeConventions(count_biases=True))
    assert model_size_bits(net, 1) == 40_384 + 64 + 32 + 32 + 64 + 30


def test_largest_fmap_s1():
    assert largest_fmap_bits(build_network(1), 4) == 44 * 13 * 64 * 4 == 146_432


@pytest.mark.parametrize("conv", CONVENTIONS)
@pytest.mark.parametrize("s", SCALES)
def test_counts_match_enumeration(s, conv):
    net = build_network(s, conv)
    macs, weights, largest = oracle(s, conv)
    assert count_macs(net) == macs
    assert model_size_bits(net, 3) == 3 * weights
    assert largest_fmap_bits(net, 5) == 5 * largest


@pytest.mark.parametrize("conv", CONVENTIONS)
def test_mac_polynomial_exact(conv):
    c2, c1 = mac_polynomial(conv)
    assert c2 > 0 and c1 > 0
    for s in SCALES:
        assert count_macs(build_network(s, conv)) == c2 * s**2 + c1 * s


def test_mac_polynomial_default_terms():
    # conv1 (C=1) and the classifier (fixed 30 outputs) are the linear terms
    assert mac_polynomial() == (2_433_024 + 304_128 + 10_240, 329_472 + 1_920)


def test_quadratic_ratio():
    r = count_macs(build_network(4)) / count_macs(build_network(2))
    assert 3.5 <= r <= 4.0


def test_published_constants_within_quarter():
    a = analytics(build_network(1), 4)
    assert abs(a.c_comp - 3.06) / 3.06 <= 0.25
    assert abs(a.c_size - 4.20) / 4.20 <= 0.25
    assert abs(a.c_fmap - 3.70) / 3.70 <= 0.25
    c2, _ = mac_polynomial()
    assert abs(c2 / 1e6 - 3.06) / 3.06 <= 0.25


def test_proxies_scale():
    base = analytics(build_network(2), 4)
    dq = analytics(build_network(2), 8)
    assert dq.model_size_bits == 2 * base.model_size_bits
    assert dq.total_macs == base.total_macs
    assert dq.mult_op_cost_proxy == 4 * base.mult_op_cost_proxy
    assert dq.add_op_cost_proxy == 2 * base.add_op_cost_proxy
    ds = analytics(build_network(4), 4)
    assert ds.add_op_cost_proxy == 4 * base.add_op_cost_proxy
    assert ds.largest_fmap_bits == 2 * base.largest_fmap_bits


@given(st.integers(1, 128), st.integers(1, 16))
def test_linear_in_q_and_fmap_linear_in_s(n, q):
    s = Fraction(n, 16)
    try:
        net = build_network(s)
    except NonIntegerChannels:
        return
    assert model_size_bits(net, 2 * q) == 2 * model_size_bits(net, q)
    assert largest_fmap_bits(net, q) == 44 * 13 * int(64 * s) * q


def test_deterministic():
    a = analytics(build_network(1.5, DEFAULT_CONVENTIONS), 6)
    b = analytics(build_network(1.5, DEFAULT_CONVENTIONS), 6)
    assert a == b


def test_design_point():
    assert DesignPoint(4, 4.5).hardware_friendly
    assert not DesignPoint(4, 0.3).hardware_friendly
    with pytest.raises(ValueError):
        DesignPoint(0, 1.0)
    with pytest.raises(ValueError):
        DesignPoint(4, -1.0)
