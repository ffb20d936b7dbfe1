import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import ENERGY_ROWS
from qsdse.errors import (
    DenominatorVanishes,
    EmptyContour,
    EmptySamples,
    ExtrapolationWarning,
    Infeasible,
    PoleAtPoint,
    SingularInversion,
    TooFewPoints,
)
from qsdse.netspec import DesignPoint
from qsdse.surrogates import (
    AccuracyModel,
    AccuracySample,
    HwSample,
    LatencyModel,
    PowerModel,
    accuracy_contour,
    energy_curve,
    energy_rmse,
    fit_accuracy,
    fit_energy,
    fit_latency,
    fit_power,
    heldout_rmse,
    invert_scale,
    min_energy_at_accuracy,
    predict_accuracy,
    predict_energy,
    predict_latency,
    predict_power,
)

# Generator for synthetic recovery: rises with q and s, denominator > 0 on [2, 8] x [0.5, 4].
TRUE_ACC = AccuracyModel(a0=-0.2, a1=0.2, a2=-1.0, a3=-70.0, a4=16.0, a5=-90.0, a6=93.0)
TRAIN_GRID = [(q, s) for q in (2, 4, 6, 8) for s in (0.5, 2, 4)]
HELDOUT_GRID = [(q, s) for q in np.linspace(2, 8, 5) for s in np.linspace(0.5, 4, 5)]

# normal-equations solution of power on the seven published hardware rows
POWER_ORACLE = (0.17721427053555178, 0.024445162101231967, 0.001443393747091452, 0.0003170875519680752)


def _synthetic(noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    return [AccuracySample(q, s, TRUE_ACC.value(q, s) + (rng.normal(0, noise) if noise else 0.0)) for q, s in TRAIN_GRID]


def _linear_system(samples):
    q = np.array([x.q for x in samples], float)
    s = np.array([x.s for x in samples], float)
    a = np.array([x.accuracy_pct for x in samples], float)
    X = np.column_stack([a, a * q, a * s, -np.ones_like(q), -q, -s, -q * s])
    return X, -a * q * s


def test_generator_is_sane():
    vals = [[TRUE_ACC.value(q, s) for s in (0.5, 2, 4)] for q in (2, 4, 6, 8)]
    for row in vals:
        assert row == sorted(row)
    for col in zip(*vals):
        assert list(col) == sorted(col)
    assert min(TRUE_ACC.denominator(q, s) for q, s in HELDOUT_GRID) > 0


# ---------------------------------------------------------------------------
# accuracy fit

def test_noise_free_recovery():
    model, report = fit_accuracy(_synthetic())
    assert report.rmse < 1e-9
    for q, s in HELDOUT_GRID:
        assert model.value(q, s) == pytest.approx(TRUE_ACC.value(q, s), rel=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_noisy_recovery(seed):
    model, _ = fit_accuracy(_synthetic(0.2, seed))
    held = [AccuracySample(q, s, TRUE_ACC.value(q, s)) for q, s in HELDOUT_GRID]
    assert heldout_rmse(model, held) <= 0.5


def test_normal_equations_identity():
    samples = _synthetic(0.2, 3)
    model, _ = fit_accuracy(samples)
    X, y = _linear_system(samples)
    g = X.T @ (y - X @ model.coefficients)
    assert np.all(np.abs(g) <= 1e-8 * np.abs(X).T @ np.abs(y))


@pytest.mark.parametrize("seed", range(5))
def test_refine_never_worse(seed):
    samples = _synthetic(0.3, seed)
    _, plain = fit_accuracy(samples)
    _, refined = fit_accuracy(samples, refine=True)
    assert refined.rmse <= plain.rmse


def test_fit_deterministic():
    a = fit_accuracy(_synthetic(0.2, 1), refine=True)
    b = fit_accuracy(_synthetic(0.2, 1), refine=True)
    assert a == b


def test_too_few_points():
    with pytest.raises(TooFewPoints):
        fit_accuracy(_synthetic()[:6])
    with pytest.raises(TooFewPoints):
        fit_accuracy([AccuracySample(4, s, 80 + s) for s in range(1, 9)])


def test_two_q_published_points_degenerate(accuracy_samples):
    # two bit widths plus a duplicated point: the full linear solve interpolates
    # through a pole along q=4
    with pytest.raises(DenominatorVanishes):
        fit_accuracy(accuracy_samples)


def test_separable_fit_published(accuracy_samples):
    model, report = fit_accuracy(accuracy_samples, form="separable")
    assert model.form == "separable"
    assert report.rmse < 0.2
    assert 89.5 <= predict_accuracy(model, DesignPoint(4, 4.5)) <= 91.0
    assert predict_accuracy(model, DesignPoint(8, 3.5)) == pytest.approx(90.0, abs=0.5)
    assert invert_scale(model, 4, 90.1) == pytest.approx(4.5, abs=0.3)
    for x in accuracy_samples:
        assert abs(model.value(x.q, x.s) - x.accuracy_pct) <= report.max_abs_residual + 1e-12


def test_separable_recovers_separable_truth():
    a6, k, al, be = 92.0, 40.0, -1.0, 0.3
    truth = AccuracyModel(al * be, be, al, a6 * al * be - k, a6 * be, a6 * al, a6)
    samples = [AccuracySample(q, s, truth.value(q, s)) for q, s in TRAIN_GRID]
    model, _ = fit_accuracy(samples, form="separable")
    for q, s in HELDOUT_GRID:
        assert model.value(q, s) == pytest.approx(truth.value(q, s), rel=1e-6)


def test_pole_at_point():
    m = AccuracyModel(a0=-8.0, a1=0.0, a2=0.0, a3=0.0, a4=0.0, a5=0.0, a6=90.0)
    with pytest.raises(PoleAtPoint):
        predict_accuracy(m, DesignPoint(4, 2.0))


# ---------------------------------------------------------------------------
# inversion and contours

@settings(max_examples=200, deadline=None)
@given(st.integers(2, 8), st.floats(40.0, 88.0))
def test_inversion_round_trip(q, level):
    try:
        s = invert_scale(TRUE_ACC, q, level)
    except (Infeasible, SingularInversion):
        return
    assert TRUE_ACC.value(q, s) == pytest.approx(level, rel=1e-9)


def test_inversion_above_asymptote():
    model, _ = fit_accuracy(_synthetic())
    for q in range(2, 9):
        with pytest.raises((Infeasible, SingularInversion)):
            invert_scale(model, q, 99.5)


def test_inversion_at_asymptote_is_singular():
    m = AccuracyModel(a0=1.0, a1=0.0, a2=0.0, a3=0.0, a4=0.0, a5=0.0, a6=90.0)
    with pytest.raises(SingularInversion):
        invert_scale(m, 4, 90.0)


def test_contour(cal_models):
    pts = accuracy_contour(cal_models.accuracy, 90, range(2, 9))
    assert [q for q, _ in pts] == list(range(2, 9))
    ss = [s for _, s in pts]
    assert ss == sorted(ss, reverse=True)
    for q, s in pts:
        assert cal_models.accuracy.value(q, s) == pytest.approx(90, rel=1e-9)
    with pytest.raises(EmptyContour):
        accuracy_contour(cal_models.accuracy, 100, range(2, 9))


# ---------------------------------------------------------------------------
# hardware fits

def test_power_fit_matches_oracle(hw_samples):
    model, report = fit_power(hw_samples)
    got = (model.b0, model.b1, model.b2, model.b3)
    assert got == pytest.approx(POWER_ORACLE, rel=1e-8)
    assert report.rmse <= 0.05
    assert 1.37 <= predict_power(model, DesignPoint(8, 4)) <= 1.57
    assert model.b0 > 0


def test_latency_fit_matches_closed_form(hw_samples):
    model, report = fit_latency(hw_samples)
    slope = (7 * 10.65 - 18.5 * 3.46) / (7 * 62.25 - 18.5**2)
    assert model.d == pytest.approx(slope, rel=1e-9)
    assert model.e == pytest.approx((3.46 - slope * 18.5) / 7, rel=1e-9)
    assert predict_latency(model, DesignPoint(4, 4.5)) == pytest.approx(0.70, abs=0.02)
    assert report.diagnostics["q_spread_ms"] == 0


def test_latency_fit_ignores_q(hw_samples):
    shuffled = [HwSample(q, x.s, x.power_w, x.latency_ms) for q, x in zip([2, 7, 3, 5, 6, 2, 8], hw_samples)]
    a, _ = fit_latency(hw_samples)
    b, _ = fit_latency(shuffled)
    assert (a.d, a.e) == (b.d, b.e)


def test_hw_fit_minimums(hw_samples):
    with pytest.raises(TooFewPoints):
        fit_power(hw_samples[:3])
    with pytest.raises(TooFewPoints):
        fit_latency([hw_samples[0], hw_samples[4]])


def test_noise_free_hw_recovery():
    pw = PowerModel(b0=0.15, b1=0.02, b2=0.003, b3=0.0004)
    lat = LatencyModel(d=0.12, e=0.2)
    pts = [(q, s) for q in (2, 4, 8) for s in (0.5, 1, 2, 4)]
    samples = [HwSample(q, s, pw.value(q, s), lat.value(q, s)) for q, s in pts]
    p, _ = fit_power(samples)
    l, _ = fit_latency(samples)
    for q, s in [(3, 0.75), (5, 3.0), (7, 1.5)]:
        pt = DesignPoint(q, s)
        assert predict_energy(p, l, pt) == pytest.approx(pw.value(q, s) * lat.value(q, s), rel=1e-6)


@pytest.mark.parametrize("q, s, actual", [(r[0], r[1], r[2]) for r in ENERGY_ROWS])
def test_energy_vs_table3(hw_samples, q, s, actual):
    power, latency, _ = fit_energy(hw_samples)
    assert abs(predict_energy(power, latency, DesignPoint(q, s)) - actual) / actual <= 0.15


def test_energy_is_product(hw_samples):
    power, latency, _ = fit_energy(hw_samples)
    pt = DesignPoint(5, 3.0)
    assert predict_energy(power, latency, pt) == predict_power(power, pt) * predict_latency(latency, pt)


def test_energy_rmse(hw_samples):
    power, latency, report = fit_energy(hw_samples)
    assert report.rmse <= 0.03
    assert energy_rmse(power, latency, list(reversed(hw_samples))).rmse == pytest.approx(report.rmse, rel=1e-12)
    x = hw_samples[0]
    exact = HwSample(x.q, x.s, power.value(x.q, x.s), latency.value(x.q, x.s))
    assert energy_rmse(power, latency, [exact]).rmse == 0
    with pytest.raises(EmptySamples):
        energy_rmse(power, latency, [])


def test_joint_energy_not_worse(hw_samples):
    _, _, two_stage = fit_energy(hw_samples)
    _, _, joint = fit_energy(hw_samples, joint=True)
    assert joint.rmse <= two_stage.rmse


def test_negative_energy_warns():
    power = PowerModel(b0=-1.0, b1=0.0, b2=0.0, b3=0.0)
    latency = LatencyModel(d=0.1, e=0.2)
    with pytest.warns(ExtrapolationWarning):
        e = predict_energy(power, latency, DesignPoint(4, 1.0))
    assert e < 0


# ---------------------------------------------------------------------------
# energy along the accuracy contour

def test_min_energy_skips_unreachable_q():
    # s -> inf ceiling is 95 - 300/q, so only q >= 7 reaches 50
    acc = AccuracyModel(a0=1.0, a1=0.0, a2=0.0, a3=0.0, a4=0.0, a5=-300.0, a6=95.0)
    power = PowerModel(b0=0.1, b1=0.01, b2=0.0, b3=0.0)
    latency = LatencyModel(d=0.1, e=0.2)
    curve = energy_curve(acc, power, latency, 50, range(2, 9))
    assert [q for q, _, _ in curve] == [7, 8]
    assert all(acc.value(q, s) == pytest.approx(50) for q, s, _ in curve)
    q, s, e = min_energy_at_accuracy(acc, power, latency, 50, range(2, 9))
    assert q in (7, 8) and math.isfinite(e) and e > 0


def test_min_energy_tie_goes_to_lower_q():
    # (90 s - 10) / (s + 1): the same s(q) for every q, hence equal energies
    acc = AccuracyModel(a0=0.0, a1=1.0, a2=0.0, a3=0.0, a4=-10.0, a5=0.0, a6=90.0)
    power = PowerModel(b0=0.5, b1=0.0, b2=0.0, b3=0.0)
    latency = LatencyModel(d=0.1, e=0.2)
    q, _, _ = min_energy_at_accuracy(acc, power, latency, 80, [6, 3, 5])
    assert q == 3


def test_serialization_round_trip(hw_samples):
    import json

    power, latency, _ = fit_energy(hw_samples)
    for m in (power, latency, _synthetic_model()):
        d = json.loads(json.dumps(m.to_dict()))
        assert type(m).from_dict(d) == m


def _synthetic_model():
    return fit_accuracy(_synthetic(0.2, 0))[0]
