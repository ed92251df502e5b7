"""One test (or parametrized group) per acceptance criterion, at the stated tolerances.

The terminal summary prints ``criterion N: PASS/FAIL`` per criterion.
"""

import math
import time
from functools import lru_cache

import numpy as np
import pytest
from scipy.optimize import brentq

from crimefront.cli import main, parse_key_values
from crimefront.kinetics import KineticsParams, classify, potential_F
from crimefront.pde_solver import GapLayout, Probes, SolverConfig, make_front_initial, make_state, simulate
from crimefront.steady_state import (
    build_blocking_profile,
    critical_length,
    double_gap_subsolution_check,
    gap_geometry,
    lemma_residual,
    symmetric_profile,
)
from crimefront.wave_analysis import (
    PROPAGATED,
    classify_outcome,
    decay_rates,
    gap_config,
    measure_gapless_speed,
    post_gap_speed,
    scalar_wave_speed,
)

from conftest import PARAM_SETS

pytestmark = pytest.mark.slow


def _params(beta, s_b):
    return KineticsParams.normalized(beta, s_b)


def _cli(tmp_path, experiment, text, name):
    cfg = tmp_path / f"{name}.cfg"
    cfg.write_text(text)
    out = tmp_path / name
    t0 = time.perf_counter()
    code = main([experiment, "--config", str(cfg), "--out", str(out)])
    elapsed = time.perf_counter() - t0
    assert code == 0
    summary = {k: v for k, (v, _) in parse_key_values((out / "summary.txt").read_text()).items()}
    return summary, out, elapsed


@lru_cache(maxsize=None)
def _gapless_speed(beta, s_b, dx=0.01, mode="system"):
    p = _params(beta, s_b)
    # horizon sized so the scalar front (faster than the system one) moves about 40 units
    c_guess = abs(scalar_wave_speed(p)) if classify(p).is_bistable else 1.0
    t_end = float(np.clip(40.0 / max(c_guess, 1e-3), 100.0, 400.0))
    diag, _ = measure_gapless_speed(p, dx=dx, mode=mode, t_end=t_end, length=120.0)
    return diag


# 1. analytic vs PDE critical length


@pytest.mark.parametrize("beta,s_b", PARAM_SETS)
def test_criterion_1_bisect_matches_analytic(tmp_path, beta, s_b):
    p = _params(beta, s_b)
    assert potential_F(1.0, p) > 0
    Lstar = critical_length(p)
    assert abs(lemma_residual(Lstar, p)) < 1e-10
    rec, _, elapsed = _cli(tmp_path, "bisect-gap", f"beta={beta}\ns_b={s_b}\ndx=0.01\n", "bisect")
    L_num = float(rec["L_num"])
    print(f"beta={beta} s_b={s_b}: L_num={L_num:.4f} L*={Lstar:.4f} L_fold={float(rec['L_fold']):.4f} ({elapsed:.0f} s)")
    assert elapsed <= 120.0
    assert abs(L_num - Lstar) <= 0.03


# 2. blocking certificate


def _drift(params, L, branch):
    prof = build_blocking_profile(L, params, branch=branch)
    cfg = SolverConfig(dx=0.0005, dt=0.05, x_min=-25.0, x_max=L + 25.0, t_end=50.0, sample_dt=1.0)
    start = make_state(cfg, prof, params=params)
    worst = [0.0]

    def watch(state):
        worst[0] = max(worst[0], float(np.max(np.abs(state.s - start.s))))

    simulate(start, cfg, params, GapLayout.single(L), on_sample=watch)
    return prof, worst[0]


@pytest.mark.parametrize("which", ["Lstar", "1.1Lstar", "L0"])
def test_criterion_2_blocking_certificate(params, ref, which):
    L, branch = {
        "Lstar": (ref["Lstar"], "upper"),
        "1.1Lstar": (1.1 * ref["Lstar"], "lower"),
        "L0": (ref["L0"], "lower"),
    }[which]
    prof, drift = _drift(params, L, branch)
    assert prof.max_residual() < 1e-6
    if which == "Lstar":
        assert prof(L) == pytest.approx(ref["b"], abs=1e-12)
        assert abs(prof.derivative(L)) < 1e-8
    print(f"L={L:.5f} branch={branch}: residual={prof.max_residual():.2e} drift={drift:.2e}")
    assert drift < 1e-6


# 3. propagation below threshold


@pytest.mark.parametrize("beta,s_b", PARAM_SETS)
def test_criterion_3_propagation_below_threshold(beta, s_b):
    p = _params(beta, s_b)
    L = 0.8 * critical_length(p)
    layout = GapLayout.single(L)
    c_free = _gapless_speed(beta, s_b).speed
    cfg = gap_config(layout, dx=0.01, ahead=60.0)
    need = (abs(cfg.x_min + 20.0) + L + 60.0) / c_free
    t_end = float(np.ceil(1.5 * need / 100.0) * 100.0)
    cfg = SolverConfig(**{**cfg.__dict__, "t_end": t_end})
    # stop once the re-formed front is 16 units from the right end
    i_stop = cfg.n_nodes - 1 - int(round(16.0 / cfg.dx))
    stop = lambda st: st.s[i_stop] > classify(p).a
    traj = simulate(
        make_front_initial(cfg, p, -12.0, layout=layout), cfg, p, layout,
        Probes(x_probe=L + 10.0, window_start=0.75 * t_end), stop=stop,
    )
    verdict = classify_outcome(traj, layout, p)
    fl = gap_geometry(p).L_fold
    print(f"beta={beta}: L={L:.4f} (L_fold={fl:.4f}) verdict={verdict} at t={traj.final.t:.0f}")
    assert verdict == PROPAGATED
    c_post, _ = post_gap_speed(traj, layout, x_max=cfg.x_max)
    print(f"  post-gap c={c_post:.5f} gapless c={c_free:.5f}")
    assert c_post == pytest.approx(c_free, rel=0.05)


# 4. speed-sign criterion


def test_criterion_4_speed_sign():
    beta = 3.0
    sb_zero = brentq(lambda sb: potential_F(1.0, _params(beta, sb)), 0.2, 0.3, xtol=1e-14)
    sweep = np.round(np.arange(0.14, 0.36 + 1e-9, 0.02), 2)
    nearest = sweep[np.argmin(np.abs(sweep - sb_zero))]
    ok = True
    for s_b in sweep:
        p = _params(beta, s_b)
        F1 = classify(p).F1
        c = _gapless_speed(beta, float(s_b)).speed
        print(f"s_b={s_b:.2f} F1={F1:+.5f} c={c:+.5f}")
        ok &= np.sign(c) == np.sign(F1)
        if s_b == nearest:
            ok &= abs(c) < 0.02
    assert ok


# 5. scalar equation consistency


def test_criterion_5_scalar_speed(params):
    c_shoot = scalar_wave_speed(params)
    c_pde = _gapless_speed(3.0, 0.2, dx=0.005, mode="scalar").speed
    print(f"shooting c={c_shoot:.6f} PDE c={c_pde:.6f}")
    assert c_pde == pytest.approx(c_shoot, rel=0.02)


def test_criterion_5_scalar_bisection(tmp_path, params):
    Lstar = critical_length(params)
    rec, _, elapsed = _cli(tmp_path, "bisect-gap", "beta=3\ns_b=0.2\ndx=0.01\nmode=scalar\n", "scalar")
    L_num = float(rec["L_num"])
    print(f"scalar L_num={L_num:.4f} L*={Lstar:.4f} ({elapsed:.0f} s)")
    assert abs(L_num - Lstar) <= 0.03


# 6. splitting futility


def test_criterion_6_split_gap(tmp_path, params):
    Lstar = critical_length(params)
    text = (
        "beta=3\ns_b=0.2\ngap.kind=double\ngap.units=lstar\n"
        "gap.L1=0.45\ngap.L2=0.45\ngap.d=0\nsweep.d_max=5\nsweep.d_step=0.1\n"
    )
    rec, out, _ = _cli(tmp_path, "split-gap", text, "split")
    rows = [line.split(",") for line in (out / "split_gap.csv").read_text().splitlines()[1:]]
    assert len(rows) == 51
    total = 0.9 * Lstar
    analytic_ok = all(
        double_gap_subsolution_check(0.45 * Lstar, 0.45 * Lstar, d, params).kind == "PropagationForced"
        for d in np.linspace(0.0, Lstar - total, 20, endpoint=False)
    )
    blocked = [r[0] for r in rows if r[1] != PROPAGATED]
    print(f"non-propagated d values: {blocked}")
    assert analytic_ok
    assert not blocked


# 7. monostable non-blockability


@pytest.mark.parametrize("L", [1.0, 3.0, 10.0])
def test_criterion_7_monostable(tmp_path, L):
    p = _params(3.0, 0.0)
    assert p.alpha * p.beta > 1 and classify(p).kind == "monostable"
    rec, _, _ = _cli(tmp_path, "simulate", f"beta=3\ns_b=0\ngap.kind=single\ngap.L={L}\n", f"mono{L}")
    print(f"L={L}: {rec['verdict']} at t={rec['t_final']}")
    assert rec["verdict"] == PROPAGATED


# 8. decay rates


@pytest.mark.parametrize("beta,s_b", PARAM_SETS)
def test_criterion_8_decay_rates(beta, s_b):
    p = _params(beta, s_b)
    diag = _gapless_speed(beta, s_b)
    rates = decay_rates(diag.speed, p)
    print(f"beta={beta}: c={diag.speed:.5f} lambda={rates.lam:.5f} fit={diag.lambda_fit:.5f} mu={rates.mu:.5f}")
    assert rates.lam > rates.mu
    assert diag.lambda_fit == pytest.approx(rates.lam, rel=0.05)
    assert decay_rates(1.0, p).lam == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-12)


# 9. comparison principle


def test_criterion_9_comparison(params):
    cfg = SolverConfig(dx=0.02, x_min=-25.0, x_max=25.0, t_end=30.0, sample_dt=1.0)
    x = cfg.grid()
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        layout = [GapLayout.none(), GapLayout.single(rng.uniform(0.1, 1.0)),
                  GapLayout.double(*rng.uniform(0.05, 0.5, 3))][seed % 3]
        lo = np.clip(rng.uniform(0.0, 1.0) / (1 + np.exp((x - rng.uniform(-8, 2)) / rng.uniform(0.2, 2.0))), 0, 1)
        hi = np.clip(lo + rng.uniform(0, 0.3) * np.exp(-((x - rng.uniform(-5, 5)) ** 2) / rng.uniform(0.5, 8)), 0, 1)
        u_lo = rng.uniform(0.5, 1.0) * params.g1 * lo
        u_hi = np.minimum(u_lo + rng.uniform(0, 0.2) * np.exp(-(x**2) / 4), params.g1)
        probes = Probes(snapshot_dt=1.0)
        a = simulate(make_state(cfg, hi, u_hi), cfg, params, layout, probes)
        b = simulate(make_state(cfg, lo, u_lo), cfg, params, layout, probes)
        for (_, s1, u1), (_, s2, u2) in zip(a.snapshots, b.snapshots):
            worst = max(worst, float(np.max(s2 - s1)), float(np.max(u2 - u1)))
    assert worst <= 1e-9


# 10. symmetric steady state


@pytest.mark.parametrize("L", [0.0, 0.5, 1.0, 2.0])
def test_criterion_10_symmetric(params, L):
    prof = symmetric_profile(L, params)
    if L == 0.0:
        assert np.all(prof(np.linspace(-20, 20, 101)) == 1.0)
        return
    assert prof.max_residual() < 1e-6
    t = np.linspace(0, 30, 3001)
    assert np.max(np.abs(prof(0.5 * L + t) - prof(0.5 * L - t))) < 1e-10
    assert prof(-40.0) > 1 - 1e-9 and prof(L + 40.0) > 1 - 1e-9
