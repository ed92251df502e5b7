import csv
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from crimefront.kinetics import KineticsParams, classify, potential_F
from crimefront.pde_solver import FieldState, GapLayout, SolverConfig, Trajectory, make_front_initial, simulate
from crimefront.wave_analysis import (
    BLOCKED,
    PROPAGATED,
    UNDECIDED,
    BracketError,
    FrontDiagnostics,
    NoCrossing,
    ShootingBracketError,
    bisect_numerical_lstar,
    characteristic_poly,
    classify_outcome,
    decay_rates,
    estimate_speed,
    fit_tail_exponent,
    format_summary,
    front_position,
    gap_config,
    measure_gapless_speed,
    run_gap_trial,
    scalar_wave_speed,
    wave_profile,
)

from conftest import PARAM_SETS, oracle


# front position


def test_front_position_step():
    dx = 0.01
    x = np.arange(0, 10 + dx / 2, dx)
    s = np.where(x < 3, 1.0, 0.0)
    assert abs(front_position(s, 0.5, x) - 3.0) <= dx


def test_front_position_constant_and_errors():
    x = np.linspace(0, 1, 11)
    assert isinstance(front_position(np.zeros(11), 0.5, x), NoCrossing)
    assert isinstance(front_position(np.ones(11), 0.5, x), NoCrossing)
    with pytest.raises(ValueError):
        front_position(np.zeros(11), 1.5, x)


def test_front_position_translation():
    dx = 0.01
    x = np.arange(-20, 20 + dx / 2, dx)
    base = 1 / (1 + np.exp(x / 0.7))
    moved = 1 / (1 + np.exp((x - 2.0) / 0.7))
    assert front_position(moved, 0.4, x) - front_position(base, 0.4, x) == pytest.approx(2.0, abs=dx)


def test_front_position_field_state(params):
    cfg = SolverConfig(dx=0.01, x_min=-20, x_max=20)
    st = make_front_initial(cfg, params, -4.0)
    assert front_position(st, classify(params).a) == pytest.approx(-4.0, abs=1e-3)


# speed fits


def test_estimate_speed_stationary_and_linear():
    t = np.linspace(0, 10, 21)
    assert estimate_speed(t, np.full_like(t, 4.0)) == pytest.approx((0.0, 0.0), abs=1e-12)
    c, res = estimate_speed(t, 3 + 0.7 * t)
    assert c == pytest.approx(0.7, abs=1e-12) and res < 1e-12


def test_estimate_speed_window_and_errors():
    t = np.linspace(0, 10, 101)
    pos = np.where(t < 5, 0.0, 2.0 * (t - 5))
    assert estimate_speed(t, pos, window=(5, 10))[0] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        estimate_speed(t, pos, window=(20, 30))
    with pytest.raises(ValueError):
        estimate_speed(t[:5], pos[:5])


# scalar shooting


@pytest.mark.parametrize("beta,s_b", PARAM_SETS)
def test_scalar_speed_against_bvp_oracle(beta, s_b):
    p = KineticsParams.normalized(beta, s_b)
    c = scalar_wave_speed(p)
    assert c > 0
    assert c == pytest.approx(oracle(beta, s_b)["c_scalar_bvp"], abs=1e-6)


def test_scalar_speed_vanishes_with_F1():
    sb0 = brentq(lambda sb: potential_F(1.0, KineticsParams.normalized(3.0, sb)), 0.2, 0.3, xtol=1e-15)
    assert abs(scalar_wave_speed(KineticsParams.normalized(3.0, sb0))) < 1e-6
    assert scalar_wave_speed(KineticsParams.normalized(3.0, sb0 + 0.02)) < 0


def test_scalar_speed_rejects_bad_input():
    with pytest.raises(ValueError):
        scalar_wave_speed(KineticsParams.normalized(3.0, 0.0))
    with pytest.raises(ShootingBracketError):
        scalar_wave_speed(KineticsParams.normalized(3.0, 0.2), bracket=(0.5, 1.0))


# decay rates


def test_decay_rates_golden_ratio(params):
    r = decay_rates(1.0, params)
    assert r.lam == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-14)


def test_decay_rates_closed_form(params):
    r = decay_rates(2.0, params)
    assert sorted(r.roots_zero) == pytest.approx(sorted([-1 - math.sqrt(2), -1 + math.sqrt(2), 0.5]), abs=1e-14)


@pytest.mark.parametrize("beta,s_b", PARAM_SETS)
@pytest.mark.parametrize("c", [0.05, 0.1, 0.5, 2.0])
def test_decay_rate_invariants(beta, s_b, c):
    p = KineticsParams.normalized(beta, s_b)
    r = decay_rates(c, p)
    assert r.lam > r.mu > 0
    assert np.max(np.abs(characteristic_poly(r.roots_one, c, r.k))) < 1e-10
    assert np.max(np.abs(characteristic_poly(r.roots_zero, c, 0.0))) < 1e-10
    # k from the linearization at the hotspot: alpha g'(1) / c
    assert r.k == pytest.approx(p.alpha * p.beta * math.exp(-p.beta * (1 - p.s_b)) / c, rel=1e-14)


def test_decay_rates_reject_nonpositive_speed(params):
    with pytest.raises(ValueError):
        decay_rates(0.0, params)


def test_fit_tail_exponent_exact():
    x = np.linspace(0, 30, 3001)
    assert fit_tail_exponent(x, 0.3 * np.exp(-1.3 * x)) == pytest.approx(1.3, rel=1e-10)
    assert math.isnan(fit_tail_exponent(x[:3], np.array([1e-4, 1e-5, 1e-5])))


# gapless system runs


@pytest.fixture(scope="module")
def gapless(params):
    return measure_gapless_speed(params, dx=0.02, t_end=200.0, length=140.0)


def test_gapless_speed_and_tails(params, gapless):
    diag, traj = gapless
    assert diag.speed > 0
    rates = decay_rates(diag.speed, params)
    assert diag.lambda_fit == pytest.approx(rates.lam, rel=0.05)
    assert diag.mu_fit == pytest.approx(rates.mu, rel=0.05)


def test_gapless_profile_monotone(params, gapless):
    _, traj = gapless
    z, s, u = wave_profile(traj.final, params)
    core = (s > 1e-6) & (s < 1 - 1e-6)
    assert np.all(np.diff(s)[core[:-1]] < 0)
    assert np.all(np.diff(u)[core[:-1] & (s[:-1] > params.s_b)] < 0)
    assert np.interp(0.0, z, s) == pytest.approx(0.5 * params.s_b, abs=1e-9)


def test_moving_frame_profiles_stabilize(params):
    cfg = SolverConfig(dx=0.02, x_min=-60, x_max=60, t_end=160, sample_dt=40)
    profiles = []

    def grab(state):
        if state.t >= 119:
            z, s, _ = wave_profile(state, params)
            profiles.append(np.interp(np.linspace(-15, 15, 601), z, s))

    simulate(make_front_initial(cfg, params, -40.0), cfg, params, GapLayout.none(), on_sample=grab)
    assert len(profiles) == 2
    assert np.max(np.abs(profiles[0] - profiles[1])) < 1e-3


def test_system_speed_sign_follows_F1():
    for s_b in (0.15, 0.22, 0.3):
        p = KineticsParams.normalized(3.0, s_b)
        diag, _ = measure_gapless_speed(p, dx=0.04, t_end=120.0, length=100.0)
        assert np.sign(diag.speed) == np.sign(classify(p).F1)


def test_diagnostics_export(tmp_path, gapless):
    diag, _ = gapless
    diag.write_csv(tmp_path / "d.csv")
    rows = list(csv.reader((tmp_path / "d.csv").open()))
    assert rows[0] == ["t", "front_x"]
    assert len(rows) == diag.times.size + 1
    text = diag.summary_lines()
    keys = [line.split("=")[0] for line in text.strip().splitlines()]
    assert keys == ["c", "residual", "lambda_fit", "mu_fit", "verdict"]
    assert format_summary({"x": 0.5, "v": "Blocked"}) == "x=0.5\nv=Blocked\n"


# verdicts


def _fake(params, sup_right, s_probe=None, change=0.0, fronts=None):
    n = len(sup_right)
    x = np.linspace(-5, 5, 11)
    final = FieldState(x, np.zeros(11), np.zeros(11), float(n - 1))
    window = FieldState(x, np.full(11, change), np.zeros(11), 0.75 * (n - 1))
    return Trajectory(
        times=np.arange(n, dtype=float),
        front_x=np.full(n, -3.0) if fronts is None else np.asarray(fronts, dtype=float),
        s_probe=np.zeros(n) if s_probe is None else np.asarray(s_probe, dtype=float),
        u_probe=np.zeros(n), sup_right=np.asarray(sup_right, dtype=float),
        final=final, x_probe=10.0, level=0.3, window_state=window,
    )


def test_classify_outcome_rules(params):
    lay = GapLayout.single(1.0)
    b = classify(params).b
    assert classify_outcome(_fake(params, [0.1] * 8, s_probe=[0] * 7 + [0.96]), lay, params) == PROPAGATED
    assert classify_outcome(_fake(params, [0.1] * 8), lay, params) == BLOCKED
    assert classify_outcome(_fake(params, [0.1] * 8, change=1e-3), lay, params) == UNDECIDED
    assert classify_outcome(_fake(params, [b + 0.05] * 8), lay, params) == UNDECIDED
    assert classify_outcome(_fake(params, [0.1] * 8, fronts=[-3] * 7 + [7.0]), lay, params) == UNDECIDED


def _trial(params, L, dx=0.02):
    layout = GapLayout.single(L)
    return run_gap_trial(params, layout, gap_config(layout, dx=dx))


def test_long_gap_blocks(params, ref):
    trial = _trial(params, 1.2 * ref["Lstar"])
    assert trial.verdict == BLOCKED
    assert np.max(trial.trajectory.sup_right) < ref["b"] + 0.02


def test_short_gap_propagates(params, ref):
    trial = _trial(params, 0.8 * ref["L_fold"])
    assert trial.verdict == PROPAGATED


def test_monostable_gapless_propagates():
    p = KineticsParams.normalized(3.0, 0.0)
    trial = _trial(p, 0.0)
    assert trial.verdict == PROPAGATED


def test_bisection_probes_are_monotone(params, ref):
    res = bisect_numerical_lstar(params, (0.5 * ref["L_fold"], 1.5 * ref["Lstar"]), dx=0.05, tol=0.05)
    assert res.hi - res.lo <= 0.05
    for L, verdict, _ in res.probes:
        if L <= res.lo:
            assert verdict == PROPAGATED
        if L >= res.hi:
            assert verdict == BLOCKED
    assert res.lo <= res.L_num <= res.hi


def test_bisection_rejects_inverted_bracket(params, ref):
    with pytest.raises(BracketError):
        bisect_numerical_lstar(params, (1.5 * ref["Lstar"], 2.0 * ref["Lstar"]), dx=0.05, tol=0.05)


def test_monostable_has_no_blocking_bracket():
    p = KineticsParams.normalized(3.0, 0.0)
    with pytest.raises(BracketError):
        bisect_numerical_lstar(p, (0.5, 1.5), dx=0.05, tol=0.05)
