"""Grid exploration of hardware-friendly (q, s) points under an accuracy target."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from . import accel_model as am
from .errors import EmptyGrid, EmptyInput, PoleAtPoint, QsdseError
from .netspec import (
    DEFAULT_CONVENTIONS,
    DesignPoint,
    ShapeConventions,
    as_fraction,
    build_network,
    model_size_bits,
)
from .surrogates import AccuracyModel, LatencyModel, PowerModel


@dataclass(frozen=True)
class SurrogateModels:
    accuracy: AccuracyModel
    power: PowerModel
    latency: LatencyModel


@dataclass(frozen=True)
class ExplorationRequest:
    target_accuracy_pct: float
    q_range: Tuple[int, int] = (2, 8)
    s_range: Tuple[float, float] = (0.5, 8.0)
    freq_hz: float = am.DEFAULT_FREQ_HZ

    def __post_init__(self):
        if not 0 <= self.target_accuracy_pct <= 100:
            raise ValueError(f"target accuracy must be in [0, 100], got {self.target_accuracy_pct}")
        if self.q_range[0] > self.q_range[1] or self.q_range[0] < 1:
            raise ValueError(f"bad q range {self.q_range}")
        if self.s_range[0] > self.s_range[1] or self.s_range[1] <= 0:
            raise ValueError(f"bad s range {self.s_range}")


@dataclass(frozen=True)
class Candidate:
    point: DesignPoint
    P: int
    M: int
    pred_accuracy_pct: float
    pred_power_w: float
    pred_latency_ms: float
    pred_energy_mj: float
    model_size_bits: int
    bram36_estimate: int
    gopj_estimate: float
    feasible: bool
    extrapolated: bool
    reason: Optional[str] = None

    @property
    def scored(self) -> bool:
        return math.isfinite(self.pred_accuracy_pct) and math.isfinite(self.pred_energy_mj)


@dataclass(frozen=True)
class ExplorationResult:
    request: ExplorationRequest
    evaluated: Tuple[Candidate, ...]
    ranked: Tuple[Candidate, ...]
    pareto: Tuple[Candidate, ...]

    @property
    def chosen(self) -> Optional[Candidate]:
        return self.ranked[0] if self.ranked else None


def enumerate_grid(req: ExplorationRequest) -> List[DesignPoint]:
    """All integer q and s = n/16 inside the request's closed ranges, sorted by (q, s)."""
    lo, hi = as_fraction(req.s_range[0]), as_fraction(req.s_range[1])
    n_lo = max(1, math.ceil(16 * lo))
    n_hi = math.floor(16 * hi)
    q_lo, q_hi = math.ceil(req.q_range[0]), math.floor(req.q_range[1])
    points = [
        DesignPoint(q, float(Fraction(n, 16)))
        for q in range(q_lo, q_hi + 1)
        for n in range(n_lo, n_hi + 1)
    ]
    if not points:
        raise EmptyGrid(f"no hardware-friendly points in q {req.q_range}, s {req.s_range}")
    return points


def evaluate(
    point: DesignPoint,
    models: SurrogateModels,
    target_accuracy_pct: float,
    conventions: ShapeConventions = DEFAULT_CONVENTIONS,
    freq_hz: float = am.DEFAULT_FREQ_HZ,
) -> Candidate:
    """Predict accuracy, power, latency and energy at one point plus its hardware footprint.

    Surrogate failures (e.g. a pole in the accuracy model) mark the candidate
    infeasible with a reason instead of raising.
    """
    cfg = am.derive_config(point, freq_hz)
    net = build_network(point.s, conventions)
    mem = am.memory_plan(net, cfg)
    q, s = point.q, point.s

    reason = None
    try:
        acc = float(models.accuracy.value(q, s))
    except PoleAtPoint as exc:
        acc, reason = math.nan, str(exc)
    pw = float(models.power.value(q, s))
    lat = float(models.latency.value(q, s))
    energy = pw * lat
    if energy <= 0 and reason is None:
        reason = f"non-positive predicted energy {energy:.6g} mJ"
    try:
        eff = am.gopj(point, energy)
    except QsdseError:
        eff = math.nan

    extrapolated = not all(m.in_domain(q, s) for m in (models.accuracy, models.power, models.latency))
    feasible = reason is None and acc >= target_accuracy_pct
    return Candidate(
        point=point,
        P=cfg.P,
        M=cfg.M,
        pred_accuracy_pct=acc,
        pred_power_w=pw,
        pred_latency_ms=lat,
        pred_energy_mj=energy,
        model_size_bits=model_size_bits(net, q),
        bram36_estimate=mem.bram36_estimate,
        gopj_estimate=eff,
        feasible=feasible,
        extrapolated=extrapolated,
        reason=reason,
    )


def _rank_key(c: Candidate):
    return (c.pred_energy_mj, c.point.q, c.point.s)


def pareto_front(candidates: Sequence[Candidate]) -> List[Candidate]:
    """Candidates not dominated under (accuracy up, energy down), by ascending energy.

    Candidates with identical (accuracy, energy) are all kept. Candidates
    without a finite accuracy and energy are ignored.
    """
    if not candidates:
        raise EmptyInput("pareto_front needs at least one candidate")
    pool = sorted((c for c in candidates if c.scored), key=lambda c: (c.pred_energy_mj, -c.pred_accuracy_pct, c.point.q, c.point.s))
    front: List[Candidate] = []
    best_acc = -math.inf
    i = 0
    while i < len(pool):
        j = i
        while j < len(pool) and pool[j].pred_energy_mj == pool[i].pred_energy_mj:
            j += 1
        top = pool[i].pred_accuracy_pct
        if top > best_acc:
            front.extend(c for c in pool[i:j] if c.pred_accuracy_pct == top)
            best_acc = top
        i = j
    return front


def explore(
    req: ExplorationRequest,
    models: SurrogateModels,
    conventions: ShapeConventions = DEFAULT_CONVENTIONS,
) -> ExplorationResult:
    """Evaluate the whole grid, keep points meeting the target, rank by energy.

    An empty ``ranked`` tuple means no grid point meets the target.
    """
    evaluated = tuple(
        evaluate(p, models, req.target_accuracy_pct, conventions, req.freq_hz)
        for p in enumerate_grid(req)
    )
    ranked = tuple(sorted((c for c in evaluated if c.feasible), key=_rank_key))
    scored = [c for c in evaluated if c.scored]
    pareto = tuple(pareto_front(scored)) if scored else ()
    return ExplorationResult(req, evaluated, ranked, pareto)
