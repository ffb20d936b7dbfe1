"""Regression surrogates for accuracy, power, latency and energy.

Accuracy follows a bilinear-over-bilinear rational surface in (q, s)::

    acc(q, s) = (a6*q*s + a5*s + a4*q + a3) / (q*s + a2*s + a1*q + a0)

Power is a polynomial in (q, s) with terms q^2 s^2, q s^2, q s and a static
constant; latency is affine in s and independent of q. Energy is the product
of the power and latency predictions, so W * ms = mJ throughout.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DenominatorVanishes,
    EmptyContour,
    EmptySamples,
    ExtrapolationWarning,
    Infeasible,
    PoleAtPoint,
    RankDeficient,
    SingularInversion,
    TooFewPoints,
)
from .netspec import DesignPoint

Domain = Tuple[float, float, float, float]  # q_min, q_max, s_min, s_max

MIN_ACCURACY_POINTS = 7
MIN_POWER_POINTS = 4
_RANK_TOL = 1e-10
_POLE_TOL = 1e-12


# ---------------------------------------------------------------------------
# samples and model records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AccuracySample:
    q: float
    s: float
    accuracy_pct: float


@dataclass(frozen=True)
class HwSample:
    q: float
    s: float
    power_w: float
    latency_ms: float
    energy_mj: Optional[float] = None

    def __post_init__(self):
        if self.energy_mj is None:
            object.__setattr__(self, "energy_mj", self.power_w * self.latency_ms)


@dataclass(frozen=True)
class FitReport:
    rmse: float
    n_points: int
    max_abs_residual: float
    condition_indicator: Optional[float] = None
    diagnostics: Dict[str, float] = field(default_factory=dict)


def _domain_of(qs: Iterable[float], ss: Iterable[float]) -> Domain:
    qs, ss = list(qs), list(ss)
    return (float(min(qs)), float(max(qs)), float(min(ss)), float(max(ss)))


def _in_domain(domain: Optional[Domain], q: float, s: float) -> bool:
    if domain is None:
        return True
    q0, q1, s0, s1 = domain
    return q0 <= q <= q1 and s0 <= s <= s1


class _Serializable:
    def to_dict(self) -> dict:
        d = asdict(self)
        if d.get("domain") is not None:
            d["domain"] = dict(zip(("q_min", "q_max", "s_min", "s_max"), d["domain"]))
        return d

    @classmethod
    def from_dict(cls, d: dict):
        d = dict(d)
        dom = d.get("domain")
        if isinstance(dom, dict):
            d["domain"] = (dom["q_min"], dom["q_max"], dom["s_min"], dom["s_max"])
        elif dom is not None:
            d["domain"] = tuple(dom)
        return cls(**d)

    def in_domain(self, q: float, s: float) -> bool:
        return _in_domain(self.domain, q, s)


@dataclass(frozen=True)
class AccuracyModel(_Serializable):
    a0: float
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    a6: float
    form: str = "full"
    rmse: Optional[float] = None
    n_points: Optional[int] = None
    domain: Optional[Domain] = None

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.a0, self.a1, self.a2, self.a3, self.a4, self.a5, self.a6])

    def numerator(self, q, s):
        return self.a6 * q * s + self.a5 * s + self.a4 * q + self.a3

    def denominator(self, q, s):
        return q * s + self.a2 * s + self.a1 * q + self.a0

    def value(self, q: float, s: float) -> float:
        den = self.denominator(q, s)
        scale = abs(q * s) + abs(self.a2 * s) + abs(self.a1 * q) + abs(self.a0)
        if np.any(np.abs(den) <= _POLE_TOL * scale):
            raise PoleAtPoint(f"accuracy model has a pole at q={q}, s={s}")
        return self.numerator(q, s) / den


@dataclass(frozen=True)
class PowerModel(_Serializable):
    b0: float  # W, static
    b1: float  # W per q*s
    b2: float  # W per q*s^2
    b3: float  # W per q^2*s^2
    rmse: Optional[float] = None
    n_points: Optional[int] = None
    domain: Optional[Domain] = None

    def value(self, q, s):
        return self.b3 * q * q * s * s + self.b2 * q * s * s + self.b1 * q * s + self.b0


@dataclass(frozen=True)
class LatencyModel(_Serializable):
    d: float  # ms per unit scale
    e: float  # ms, first-layer latency
    rmse: Optional[float] = None
    n_points: Optional[int] = None
    domain: Optional[Domain] = None

    def value(self, q, s):
        return self.d * s + self.e


def _report(residuals: np.ndarray, cond: Optional[float] = None, **diag) -> FitReport:
    r = np.asarray(residuals, dtype=float)
    return FitReport(
        rmse=float(np.sqrt(np.mean(r**2))),
        n_points=int(r.size),
        max_abs_residual=float(np.max(np.abs(r))),
        condition_indicator=cond,
        diagnostics=dict(diag),
    )


# ---------------------------------------------------------------------------
# linear algebra helpers
# ---------------------------------------------------------------------------

def _qr_lstsq(X: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, float]:
    """Least squares via Householder QR on column-normalized X.

    Returns the solution and the condition number of the normalized R.
    Raises RankDeficient when R has a negligible diagonal entry.
    """
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise RankDeficient("design matrix has an all-zero column")
    Q, R = np.linalg.qr(X / norms)
    diag = np.abs(np.diag(R))
    if diag.min() <= _RANK_TOL * diag.max():
        raise RankDeficient(
            f"design matrix is rank deficient (|R| diagonal ratio {diag.min() / diag.max():.3g})"
        )
    z = np.linalg.solve(R, Q.T @ y)
    return z / norms, float(np.linalg.cond(R))


def _levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    admissible: Callable[[np.ndarray], bool] = lambda x: True,
    max_iter: int = 200,
) -> np.ndarray:
    """Damped Gauss-Newton; a step is kept only if it lowers the residual norm."""
    x = np.asarray(x0, dtype=float)
    r = residual(x)
    cost = float(r @ r)
    lam = 1e-3
    for _ in range(max_iter):
        J = jacobian(x)
        scale = np.sqrt(np.sum(J**2, axis=0))
        scale[scale == 0] = 1.0
        A = np.vstack([J, np.sqrt(lam) * np.diag(scale)])
        b = np.concatenate([-r, np.zeros(x.size)])
        step = np.linalg.lstsq(A, b, rcond=None)[0]
        cand = x + step
        if admissible(cand):
            rc = residual(cand)
            cc = float(rc @ rc)
            if np.isfinite(cc) and cc < cost:
                converged = cost - cc <= 1e-14 * cost + 1e-300
                x, r, cost = cand, rc, cc
                lam = max(lam / 10, 1e-12)
                if converged:
                    break
                continue
        lam *= 10
        if lam > 1e12:
            break
    return x


# ---------------------------------------------------------------------------
# accuracy surrogate
# ---------------------------------------------------------------------------

def _check_accuracy_samples(samples: Sequence[AccuracySample]) -> None:
    if len(samples) < MIN_ACCURACY_POINTS:
        raise TooFewPoints(
            f"accuracy fit needs at least {MIN_ACCURACY_POINTS} samples, got {len(samples)}"
        )
    if len({x.q for x in samples}) < 2 or len({x.s for x in samples}) < 2:
        raise TooFewPoints("accuracy fit needs at least two distinct q and two distinct s values")


def _pole_free(model: AccuracyModel, qs: np.ndarray, ss: np.ndarray, domain: Domain) -> bool:
    """Denominator keeps one strict sign on the samples and the box corners.

    The denominator is bilinear, so a constant sign on the corners of the
    sample bounding box implies a constant sign on the whole box.
    """
    q0, q1, s0, s1 = domain
    cq = np.concatenate([qs, [q0, q0, q1, q1]])
    cs = np.concatenate([ss, [s0, s1, s0, s1]])
    den = model.denominator(cq, cs)
    scale = np.abs(cq * cs) + abs(model.a2) * np.abs(cs) + abs(model.a1) * np.abs(cq) + abs(model.a0)
    if np.any(np.abs(den) <= 1e-9 * scale):
        return False
    return bool(np.all(den > 0) or np.all(den < 0))


def _model_from(coef: Sequence[float], form: str) -> AccuracyModel:
    return AccuracyModel(*map(float, coef), form=form)


def _separable_to_full(theta: np.ndarray) -> np.ndarray:
    """(a6, K, alpha, beta) of a6 - K/((q+alpha)(s+beta)) -> a0..a6."""
    a6, k, al, be = theta
    return np.array([al * be, be, al, a6 * al * be - k, a6 * be, a6 * al, a6])


def _fit_separable(qs, ss, acc, domain) -> np.ndarray:
    q0, _, s0, _ = domain
    grid = np.linspace(-4.0, 6.0, 41)
    best = None
    for u in grid:
        al = -q0 + math.exp(u)
        for v in grid:
            be = -s0 + math.exp(v)
            X = np.column_stack([np.ones_like(qs), -1.0 / ((qs + al) * (ss + be))])
            lin, *_ = np.linalg.lstsq(X, acc, rcond=None)
            rss = float(np.sum((X @ lin - acc) ** 2))
            if best is None or rss < best[0]:
                best = (rss, np.array([lin[0], lin[1], al, be]))
    theta0 = best[1]

    def residual(t):
        a6, k, al, be = t
        return a6 - k / ((qs + al) * (ss + be)) - acc

    def jac(t):
        _, k, al, be = t
        g = (qs + al) * (ss + be)
        return np.column_stack([np.ones_like(qs), -1.0 / g, k * (ss + be) / g**2, k * (qs + al) / g**2])

    def admissible(t):
        return t[2] + q0 > 0 and t[3] + s0 > 0

    return _separable_to_full(_levenberg_marquardt(residual, jac, theta0, admissible))


def fit_accuracy(
    samples: Sequence[AccuracySample],
    refine: bool = False,
    form: str = "full",
) -> Tuple[AccuracyModel, FitReport]:
    """Fit the rational accuracy surface.

    ``form="full"`` solves the linearization
    ``acc*(qs + a2 s + a1 q + a0) = a6 qs + a5 s + a4 q + a3`` by QR least
    squares, then (with ``refine``) runs damped Gauss-Newton on the true
    residual starting from that solution.

    ``form="separable"`` restricts the surface to
    ``a6 - K/((q + alpha)(s + beta))``, a four-parameter member of the same
    family that stays well posed when the samples cover only two q values.
    It is always fitted on the true residual.
    """
    if form not in ("full", "separable"):
        raise ValueError(f"form must be 'full' or 'separable', got {form!r}")
    _check_accuracy_samples(samples)
    qs = np.array([x.q for x in samples], dtype=float)
    ss = np.array([x.s for x in samples], dtype=float)
    acc = np.array([x.accuracy_pct for x in samples], dtype=float)
    domain = _domain_of(qs, ss)
    cond = None

    if form == "full":
        X = np.column_stack([acc, acc * qs, acc * ss, -np.ones_like(qs), -qs, -ss, -qs * ss])
        y = -acc * qs * ss
        coef, cond = _qr_lstsq(X, y)
        model = _model_from(coef, form)
        if not _pole_free(model, qs, ss, domain):
            raise DenominatorVanishes(
                "linearized accuracy fit places a pole inside the sample domain "
                f"(q in [{domain[0]:g}, {domain[1]:g}], s in [{domain[2]:g}, {domain[3]:g}])"
            )
        if refine:
            coef = _levenberg_marquardt(
                lambda c: _model_from(c, form).value(qs, ss) - acc,
                lambda c: _accuracy_jacobian(c, qs, ss),
                coef,
                lambda c: _pole_free(_model_from(c, form), qs, ss, domain),
            )
            model = _model_from(coef, form)
    else:
        coef = _fit_separable(qs, ss, acc, domain)
        model = _model_from(coef, form)
        if not _pole_free(model, qs, ss, domain):
            raise DenominatorVanishes("separable accuracy fit degenerated to a pole in the sample domain")

    resid = model.value(qs, ss) - acc
    report = _report(resid, cond)
    model = AccuracyModel(
        *map(float, coef), form=form, rmse=report.rmse, n_points=len(samples), domain=domain
    )
    return model, report


def _accuracy_jacobian(c: np.ndarray, qs: np.ndarray, ss: np.ndarray) -> np.ndarray:
    m = _model_from(c, "full")
    num, den = m.numerator(qs, ss), m.denominator(qs, ss)
    f = -num / den**2
    return np.column_stack([f, f * qs, f * ss, 1 / den, qs / den, ss / den, qs * ss / den])


def predict_accuracy(model: AccuracyModel, point: DesignPoint) -> float:
    return model.value(point.q, point.s)


def invert_scale(model: AccuracyModel, q: float, accuracy: float) -> float:
    """Scale at which the model reaches ``accuracy`` for bit width ``q``.

    Solves the rational surface for s in closed form. Raises SingularInversion
    when ``accuracy`` is the model's asymptote at this q, and Infeasible when
    the solution is non-positive or lies on the far branch of the pole.
    """
    a0, a1, a2, a3, a4, a5, a6 = model.coefficients
    A = accuracy
    num = a4 * q + a3 - A * (a1 * q + a0)
    den = A * (q + a2) - a6 * q - a5
    if abs(den) <= _POLE_TOL * (abs(A * (q + a2)) + abs(a6 * q) + abs(a5)):
        raise SingularInversion(f"accuracy {A} is the asymptote of the model at q={q}")
    s = num / den
    if not s > 0:
        raise Infeasible(f"accuracy {A} needs s={s:.6g} at q={q}")
    d = model.denominator(q, s)
    if abs(d) <= _POLE_TOL * (abs(q * s) + abs(a2 * s) + abs(a1 * q) + abs(a0)):
        raise SingularInversion(f"inversion lands on the model pole at q={q}")
    if model.domain is not None:
        q0, q1, s0, s1 = model.domain
        ref = model.denominator((q0 + q1) / 2, (s0 + s1) / 2)
        if (d > 0) != (ref > 0):
            raise Infeasible(f"accuracy {A} is only reached beyond the model pole at q={q}")
    return float(s)


def accuracy_contour(
    model: AccuracyModel, level: float, q_values: Iterable[float]
) -> List[Tuple[float, float]]:
    out = []
    for q in q_values:
        try:
            out.append((q, invert_scale(model, q, level)))
        except (Infeasible, SingularInversion):
            continue
    if not out:
        raise EmptyContour(f"no q reaches accuracy {level}")
    return out


def heldout_rmse(model: AccuracyModel, samples: Sequence[AccuracySample]) -> float:
    if not samples:
        raise EmptySamples("no held-out samples")
    r = [model.value(x.q, x.s) - x.accuracy_pct for x in samples]
    return float(np.sqrt(np.mean(np.square(r))))


# ---------------------------------------------------------------------------
# hardware surrogates
# ---------------------------------------------------------------------------

def _power_basis(qs, ss) -> np.ndarray:
    return np.column_stack([qs**2 * ss**2, qs * ss**2, qs * ss, np.ones_like(qs)])


def fit_power(samples: Sequence[HwSample]) -> Tuple[PowerModel, FitReport]:
    """Linear least squares of power on [q^2 s^2, q s^2, q s, 1]."""
    if len(samples) < MIN_POWER_POINTS:
        raise TooFewPoints(f"power fit needs at least {MIN_POWER_POINTS} samples, got {len(samples)}")
    if len({x.q for x in samples}) < 2 or len({x.s for x in samples}) < 2:
        raise TooFewPoints("power fit needs at least two distinct q and two distinct s values")
    qs = np.array([x.q for x in samples], dtype=float)
    ss = np.array([x.s for x in samples], dtype=float)
    pw = np.array([x.power_w for x in samples], dtype=float)
    (b3, b2, b1, b0), cond = _qr_lstsq(_power_basis(qs, ss), pw)
    domain = _domain_of(qs, ss)
    model = PowerModel(float(b0), float(b1), float(b2), float(b3))
    report = _report(model.value(qs, ss) - pw, cond)
    q0, q1, s0, s1 = domain
    corners = [model.value(q, s) for q in (q0, q1) for s in (s0, s1)]
    if min(corners) <= 0 or np.any(model.value(qs, ss) <= 0):
        warnings.warn("fitted power is non-positive inside the sample domain", ExtrapolationWarning)
    return (
        PowerModel(float(b0), float(b1), float(b2), float(b3), report.rmse, len(samples), domain),
        report,
    )


def fit_latency(samples: Sequence[HwSample]) -> Tuple[LatencyModel, FitReport]:
    """Ordinary least squares of latency on s; q never enters the fit.

    The report's ``q_spread_ms`` diagnostic is the largest latency spread
    across q among samples sharing the same s.
    """
    if len({x.s for x in samples}) < 2:
        raise TooFewPoints("latency fit needs at least two distinct s values")
    ss = np.array([x.s for x in samples], dtype=float)
    lat = np.array([x.latency_ms for x in samples], dtype=float)
    (d, e), cond = _qr_lstsq(np.column_stack([ss, np.ones_like(ss)]), lat)
    by_s: Dict[float, List[float]] = {}
    for x in samples:
        by_s.setdefault(x.s, []).append(x.latency_ms)
    spread = max(max(v) - min(v) for v in by_s.values())
    model = LatencyModel(float(d), float(e))
    report = _report(model.value(None, ss) - lat, cond, q_spread_ms=float(spread))
    if d <= 0 or e < 0:
        warnings.warn(f"fitted latency line has d={d:.4g}, e={e:.4g}", ExtrapolationWarning)
    qs = [x.q for x in samples]
    return LatencyModel(float(d), float(e), report.rmse, len(samples), _domain_of(qs, ss)), report


def predict_power(model: PowerModel, point: DesignPoint) -> float:
    return float(model.value(point.q, point.s))


def predict_latency(model: LatencyModel, point: DesignPoint) -> float:
    return float(model.value(point.q, point.s))


def predict_energy(power: PowerModel, latency: LatencyModel, point: DesignPoint) -> float:
    """Energy in mJ as predicted power (W) times predicted latency (ms)."""
    e = predict_power(power, point) * predict_latency(latency, point)
    if e <= 0:
        warnings.warn(
            f"non-positive energy prediction {e:.6g} mJ at q={point.q}, s={point.s}",
            ExtrapolationWarning,
        )
    return e


def energy_rmse(power: PowerModel, latency: LatencyModel, samples: Sequence[HwSample]) -> FitReport:
    if not samples:
        raise EmptySamples("no hardware samples")
    r = np.array([power.value(x.q, x.s) * latency.value(x.q, x.s) - x.energy_mj for x in samples])
    return _report(r)


def fit_energy(
    samples: Sequence[HwSample], joint: bool = False, max_rounds: int = 50
) -> Tuple[PowerModel, LatencyModel, FitReport]:
    """Fit power and latency separately; optionally polish them jointly on energy.

    The joint pass alternates two linear solves against the energy column
    (power coefficients with latency fixed, then latency with power fixed)
    and keeps a round only if energy RMSE drops.
    """
    power, _ = fit_power(samples)
    latency, _ = fit_latency(samples)
    report = energy_rmse(power, latency, samples)
    if not joint:
        return power, latency, report

    qs = np.array([x.q for x in samples], dtype=float)
    ss = np.array([x.s for x in samples], dtype=float)
    en = np.array([x.energy_mj for x in samples], dtype=float)
    basis = _power_basis(qs, ss)
    b = np.array([power.b3, power.b2, power.b1, power.b0])
    de = np.array([latency.d, latency.e])
    best = report.rmse
    for _ in range(max_rounds):
        lat = de[0] * ss + de[1]
        nb, _ = _qr_lstsq(basis * lat[:, None], en)
        pw = basis @ nb
        nde, _ = _qr_lstsq(np.column_stack([pw * ss, pw]), en)
        rmse = float(np.sqrt(np.mean((pw * (nde[0] * ss + nde[1]) - en) ** 2)))
        if not rmse < best * (1 - 1e-12):
            break
        b, de, best = nb, nde, rmse
    power = PowerModel(float(b[3]), float(b[2]), float(b[1]), float(b[0]), None, len(samples), power.domain)
    latency = LatencyModel(float(de[0]), float(de[1]), None, len(samples), latency.domain)
    return power, latency, energy_rmse(power, latency, samples)


# ---------------------------------------------------------------------------
# energy along an accuracy contour
# ---------------------------------------------------------------------------

def energy_curve(
    acc: AccuracyModel,
    power: PowerModel,
    latency: LatencyModel,
    level: float,
    q_values: Iterable[int],
) -> List[Tuple[int, float, float]]:
    """(q, s(q), energy) along the ``level`` accuracy contour; unreachable q skipped."""
    out = []
    for q, s in accuracy_contour(acc, level, q_values):
        out.append((q, s, float(power.value(q, s) * latency.value(q, s))))
    return out


def min_energy_at_accuracy(
    acc: AccuracyModel,
    power: PowerModel,
    latency: LatencyModel,
    level: float,
    q_candidates: Iterable[int],
) -> Tuple[int, float, float]:
    """Integer q minimizing energy on the ``level`` contour; ties go to lower q."""
    best = None
    for q, s, e in energy_curve(acc, power, latency, level, sorted(q_candidates)):
        if best is None or e < best[2]:
            best = (q, s, e)
    return best
