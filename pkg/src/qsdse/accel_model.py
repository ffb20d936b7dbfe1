"""Analytical model of the output-channel-tiled FPGA accelerator.

P processing engines each own one output channel at a time and carry M
multipliers that consume M input channels per cycle. Convolution and FC
layers share the same pipeline; max pooling runs on one comparator per PE.
No fill/drain, stall or control overhead is modeled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .errors import NonPositiveEnergy, NotHardwareFriendly, UnsupportedLayer
from .netspec import (
    POOL,
    DesignPoint,
    LayerSpec,
    NetworkSpec,
    as_fraction,
    largest_fmap_bits,
    model_size_bits,
)

DEFAULT_FREQ_HZ = 100e6
DEFAULT_MULTIPLIERS = 8
PES_PER_SCALE = 16
BRAM36_BITS = 36 * 1024
DEFAULT_C_COMP = 3.06e6  # MACs per s^2


@dataclass(frozen=True)
class AcceleratorConfig:
    P: int
    M: int = DEFAULT_MULTIPLIERS
    freq_hz: float = DEFAULT_FREQ_HZ
    q: int = 8

    def __post_init__(self):
        if self.P < 1 or self.M < 1:
            raise ValueError(f"P and M must be >= 1, got P={self.P}, M={self.M}")
        if not self.freq_hz > 0:
            raise ValueError(f"frequency must be positive, got {self.freq_hz}")


@dataclass(frozen=True)
class LayerCost:
    name: str
    cycles: int
    macs: int
    macs_per_cycle: float
    utilization: float


@dataclass(frozen=True)
class LatencyBreakdown:
    layers: Tuple[LayerCost, ...]
    total_cycles: int
    first_layer_cycles: int
    remaining_cycles: int
    seconds: float

    @property
    def ms(self) -> float:
        return self.seconds * 1e3


@dataclass(frozen=True)
class MemoryPlan:
    width_bits: int
    fmap_depth: int
    out_depth: int
    weight_depth: int
    fmap_bits: int
    out_bits: int
    weight_bits: int
    bram36_estimate: int


def derive_config(point: DesignPoint, freq_hz: float = DEFAULT_FREQ_HZ) -> AcceleratorConfig:
    """P = 16s engines of M = 8 multipliers at the point's bit width."""
    p = PES_PER_SCALE * as_fraction(point.s)
    if p.denominator != 1 or p < 1:
        raise NotHardwareFriendly(f"16*s = {float(p):g} is not a natural number (s={point.s})")
    return AcceleratorConfig(P=int(p), M=DEFAULT_MULTIPLIERS, freq_hz=freq_hz, q=point.q)


def _cost(layer: LayerSpec, cycles: int, cfg: AcceleratorConfig) -> LayerCost:
    macs = layer.macs
    rate = macs / cycles if cycles else 0.0
    util = macs / (cycles * cfg.P * cfg.M) if cycles else 0.0
    return LayerCost(layer.name, cycles, macs, rate, util)


def layer_cycles(layer: LayerSpec, cfg: AcceleratorConfig) -> LayerCost:
    """Cycles for a conv or FC layer: ceil(F/P)*ceil(C/M)*outH*outW*kh*kw."""
    if layer.kind == POOL:
        raise UnsupportedLayer(f"{layer.name} is a pooling layer; use pool_cycles")
    oh, ow, _ = layer.out_shape
    kh, kw = layer.kernel
    cycles = (
        math.ceil(layer.filters / cfg.P)
        * math.ceil(layer.in_channels / cfg.M)
        * oh * ow * kh * kw
    )
    return _cost(layer, cycles, cfg)


def pool_cycles(
    layer: LayerSpec,
    cfg: AcceleratorConfig,
    compares_per_window: Optional[int] = None,
) -> LayerCost:
    """Max pooling on one comparator per PE, kh*kw-1 sequential compares per window."""
    if layer.kind != POOL:
        raise UnsupportedLayer(f"{layer.name} is not a pooling layer")
    kh, kw = layer.kernel
    if compares_per_window is None:
        compares_per_window = kh * kw - 1
    oh, ow, _ = layer.out_shape
    cycles = math.ceil(layer.in_channels / cfg.P) * oh * ow * compares_per_window
    return _cost(layer, cycles, cfg)


def network_latency(
    net: NetworkSpec,
    cfg: AcceleratorConfig,
    compares_per_window: Optional[int] = None,
) -> LatencyBreakdown:
    costs = tuple(
        pool_cycles(l, cfg, compares_per_window) if l.kind == POOL else layer_cycles(l, cfg)
        for l in net.layers
    )
    total = sum(c.cycles for c in costs)
    first = costs[0].cycles
    return LatencyBreakdown(costs, total, first, total - first, total / cfg.freq_hz)


def peak_performance(cfg: AcceleratorConfig, layer: LayerSpec) -> float:
    """Peak ops/s for a layer: 2*min(F, P)*min(C, M)*frequency."""
    return 2 * min(layer.filters, cfg.P) * min(layer.in_channels, cfg.M) * cfg.freq_hz


def memory_plan(net: NetworkSpec, cfg: AcceleratorConfig) -> MemoryPlan:
    """Feature-map, output and weight memories, one bank of width M*q per PE.

    The BRAM figure is a capacity-only estimate: each memory's total bits
    packed into 36 Kb blocks, at least one block per memory.
    """
    width = cfg.M * cfg.q
    bank = cfg.P * width
    fmap_depth = -(-largest_fmap_bits(net, cfg.q) // bank)
    weight_depth = -(-model_size_bits(net, cfg.q) // bank)
    fmap_bits = bank * fmap_depth
    weight_bits = bank * weight_depth
    bram = sum(max(1, -(-bits // BRAM36_BITS)) for bits in (fmap_bits, fmap_bits, weight_bits))
    return MemoryPlan(
        width_bits=width,
        fmap_depth=fmap_depth,
        out_depth=fmap_depth,
        weight_depth=weight_depth,
        fmap_bits=fmap_bits,
        out_bits=fmap_bits,
        weight_bits=weight_bits,
        bram36_estimate=bram,
    )


def gopj(point: DesignPoint, energy_mj: float, c_comp: float = DEFAULT_C_COMP) -> float:
    """Giga-operations per joule with one op per MAC and c_comp*s^2 MACs per inference."""
    if not energy_mj > 0:
        raise NonPositiveEnergy(f"energy must be positive, got {energy_mj}")
    ops = c_comp * point.s**2
    return ops / (energy_mj * 1e-3) / 1e9
