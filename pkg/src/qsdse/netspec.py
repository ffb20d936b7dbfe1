"""Keyword-spotting CNN template and its analytical footprint.

The network is a fixed stack of three conv/maxpool pairs followed by two
fully connected layers. Every layer width is a multiple of the scale ``s``
(64s, 32s, 32s filters, 64s hidden units); the bit width ``q`` is applied
uniformly to weights and activations. Nothing here touches tensors: only
shapes and counts are produced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Tuple, Union

from .errors import InvalidShape, NonIntegerChannels

Scale = Union[int, float, str, Fraction]
Shape = Tuple[int, int, int]

INPUT_SHAPE: Shape = (44, 13, 1)
DEFAULT_NUM_CLASSES = 30
BITS_PER_KB = 8 * 1024

CONV, POOL, FC = "conv2d", "maxpool2d", "fully_connected"

# (kind, channel multiplier of s); the last FC width is num_classes
_TEMPLATE = (
    (CONV, 64),
    (POOL, None),
    (CONV, 32),
    (POOL, None),
    (CONV, 32),
    (POOL, None),
    (FC, 64),
    (FC, None),
)


def as_fraction(s: Scale) -> Fraction:
    """Exact rational value of a scale; floats are read by their repr (0.3 -> 3/10)."""
    if isinstance(s, Fraction):
        return s
    if isinstance(s, float):
        if not math.isfinite(s):
            raise ValueError(f"scale must be finite, got {s!r}")
        return Fraction(repr(s))
    return Fraction(s)


@dataclass(frozen=True)
class DesignPoint:
    q: int
    s: float

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"q must be a positive integer, got {self.q!r}")
        if not self.s > 0:
            raise ValueError(f"s must be positive, got {self.s!r}")
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "s", float(self.s))

    @property
    def hardware_friendly(self) -> bool:
        """True when 16*s is a natural number (P = 16s engines exist)."""
        return (16 * as_fraction(self.s)).denominator == 1


@dataclass(frozen=True)
class ShapeConventions:
    conv_padding: str = "same"
    pool_rounding: str = "floor"
    count_biases: bool = False

    def __post_init__(self):
        if self.conv_padding not in ("same", "valid"):
            raise ValueError(f"conv_padding must be 'same' or 'valid', got {self.conv_padding!r}")
        if self.pool_rounding not in ("floor", "ceil"):
            raise ValueError(f"pool_rounding must be 'floor' or 'ceil', got {self.pool_rounding!r}")


DEFAULT_CONVENTIONS = ShapeConventions()


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    kernel: Tuple[int, int]
    filters: int
    in_channels: int
    stride: int
    in_shape: Shape
    out_shape: Shape

    @property
    def macs(self) -> int:
        if self.kind == POOL:
            return 0
        oh, ow, _ = self.out_shape
        kh, kw = self.kernel
        return oh * ow * self.filters * self.in_channels * kh * kw

    @property
    def weights(self) -> int:
        if self.kind == POOL:
            return 0
        kh, kw = self.kernel
        return kh * kw * self.in_channels * self.filters

    @property
    def biases(self) -> int:
        return 0 if self.kind == POOL else self.filters

    @property
    def out_elements(self) -> int:
        h, w, c = self.out_shape
        return h * w * c


@dataclass(frozen=True)
class NetworkSpec:
    layers: Tuple[LayerSpec, ...]
    scale: Fraction
    num_classes: int = DEFAULT_NUM_CLASSES
    conventions: ShapeConventions = field(default=DEFAULT_CONVENTIONS)
    input_shape: Shape = INPUT_SHAPE

    @property
    def compute_layers(self) -> Tuple[LayerSpec, ...]:
        return tuple(l for l in self.layers if l.kind != POOL)


@dataclass(frozen=True)
class ModelAnalytics:
    total_macs: int
    weight_count: int
    model_size_bits: int
    largest_fmap_bits: int
    c_comp: float  # million MACs per s^2
    c_size: float  # KB per q*s^2
    c_fmap: float  # KB per q*s
    mult_op_cost_proxy: float  # q^2 s^2
    add_op_cost_proxy: float  # q s^2


def _channels(mult: int, s: Fraction, what: str) -> int:
    value = mult * s
    if value.denominator != 1 or value <= 0:
        raise NonIntegerChannels(f"{what}: {mult}*s = {float(value):g} is not a positive integer (s={s})")
    return int(value)


def _conv_out(n: int, k: int, padding: str) -> int:
    return n if padding == "same" else n - k + 1


def _pool_out(n: int, k: int, stride: int, rounding: str) -> int:
    if n < k:
        return 0
    span = n - k
    steps = span // stride if rounding == "floor" else -(-span // stride)
    return steps + 1


def build_network(
    s: Scale,
    conventions: ShapeConventions = DEFAULT_CONVENTIONS,
    num_classes: int = DEFAULT_NUM_CLASSES,
) -> NetworkSpec:
    """Instantiate the eight-layer template at scale ``s``.

    Raises NonIntegerChannels if 64s, 32s or 16s is not a positive integer,
    and InvalidShape if a spatial dimension collapses before the FC layers.
    """
    return _build(as_fraction(s), conventions, int(num_classes))


@lru_cache(maxsize=512)
def _build(s: Fraction, conventions: ShapeConventions, num_classes: int) -> NetworkSpec:
    if s <= 0:
        raise ValueError(f"scale must be positive, got {s}")
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")
    _channels(16, s, "16s")

    layers = []
    h, w, c = INPUT_SHAPE
    n_conv = n_pool = n_fc = 0
    for kind, mult in _TEMPLATE:
        in_shape = (h, w, c)
        if kind == CONV:
            n_conv += 1
            f = _channels(mult, s, f"conv{n_conv} filters")
            h = _conv_out(h, 3, conventions.conv_padding)
            w = _conv_out(w, 3, conventions.conv_padding)
            name, kernel, stride, cin = f"conv{n_conv}", (3, 3), 1, c
        elif kind == POOL:
            n_pool += 1
            f = c
            h = _pool_out(h, 2, 2, conventions.pool_rounding)
            w = _pool_out(w, 2, 2, conventions.pool_rounding)
            name, kernel, stride, cin = f"pool{n_pool}", (2, 2), 2, c
        else:
            n_fc += 1
            f = _channels(mult, s, f"fc{n_fc} width") if mult else num_classes
            cin = h * w * c
            h = w = 1
            name, kernel, stride = f"fc{n_fc}", (1, 1), 1
        if h <= 0 or w <= 0:
            raise InvalidShape(
                f"{name}: output {h}x{w} from input {in_shape[0]}x{in_shape[1]} "
                f"under padding={conventions.conv_padding}, pooling={conventions.pool_rounding}"
            )
        c = f
        layers.append(LayerSpec(name, kind, kernel, f, cin, stride, in_shape, (h, w, c)))

    return NetworkSpec(tuple(layers), s, num_classes, conventions)


def count_macs(net: NetworkSpec) -> int:
    return sum(l.macs for l in net.layers)


def weight_count(net: NetworkSpec) -> int:
    n = sum(l.weights for l in net.layers)
    if net.conventions.count_biases:
        n += sum(l.biases for l in net.layers)
    return n


def model_size_bits(net: NetworkSpec, q: int) -> int:
    _check_q(q)
    return weight_count(net) * q


def largest_fmap_bits(net: NetworkSpec, q: int) -> int:
    """Largest activation map (input map included) in bits."""
    _check_q(q)
    h, w, c = net.input_shape
    return max([h * w * c] + [l.out_elements for l in net.layers]) * q


def analytics(net: NetworkSpec, q: int) -> ModelAnalytics:
    s = float(net.scale)
    macs = count_macs(net)
    size = model_size_bits(net, q)
    fmap = largest_fmap_bits(net, q)
    return ModelAnalytics(
        total_macs=macs,
        weight_count=weight_count(net),
        model_size_bits=size,
        largest_fmap_bits=fmap,
        c_comp=macs / s**2 / 1e6,
        c_size=size / BITS_PER_KB / (q * s**2),
        c_fmap=fmap / BITS_PER_KB / (q * s),
        mult_op_cost_proxy=q**2 * s**2,
        add_op_cost_proxy=q * s**2,
    )


def mac_polynomial(
    conventions: ShapeConventions = DEFAULT_CONVENTIONS,
    num_classes: int = DEFAULT_NUM_CLASSES,
) -> Tuple[int, int]:
    """Integer coefficients (c2, c1) with count_macs(s) == c2*s**2 + c1*s.

    Layer shapes do not depend on s, so the count is an exact quadratic with
    no constant term; two evaluations pin it down.
    """
    m1 = count_macs(build_network(1, conventions, num_classes))
    m2 = count_macs(build_network(2, conventions, num_classes))
    c2 = (m2 - 2 * m1) // 2
    return c2, m1 - c2


def _check_q(q: int) -> None:
    if int(q) != q or q < 1:
        raise ValueError(f"q must be a positive integer, got {q!r}")
