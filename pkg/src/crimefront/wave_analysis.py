"""Front tracking, wave speeds, tail decay rates and blocked/propagated verdicts."""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .kinetics import classify, g_prime, reaction_f, reaction_f_prime
from .pde_solver import (
    FieldState,
    GapLayout,
    Probes,
    SolverConfig,
    level_crossing,
    make_front_initial,
    simulate,
)

PROPAGATED = "Propagated"
BLOCKED = "Blocked"
UNDECIDED = "Undecided"


@dataclass(frozen=True)
class NoCrossing:
    level: float
    reason: str


def front_position(profile, level=None, x=None):
    """Rightmost crossing of ``level`` from above, or ``NoCrossing``.

    ``profile`` is a ``FieldState`` or an array of ``s`` values on the grid ``x``.
    """
    if isinstance(profile, FieldState):
        x, s = profile.x, profile.s
    else:
        s = np.asarray(profile, dtype=float)
        if x is None:
            raise ValueError("grid x is required for raw arrays")
        x = np.asarray(x, dtype=float)
    level = 0.5 if level is None else level
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    xf = level_crossing(x, s, level)
    if xf is None:
        where = "above" if np.all(s >= level) else "below" if np.all(s < level) else "not crossing downward"
        return NoCrossing(level, f"profile is entirely {where} the level")
    return xf


def estimate_speed(times, positions, window=None, min_samples=10):
    """Least-squares slope of ``positions(times)`` on ``window``; returns ``(c, max_deviation)``."""
    times = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float)
    mask = np.isfinite(positions)
    if window is not None:
        mask &= (times >= window[0]) & (times <= window[1])
    if mask.sum() < min_samples:
        raise ValueError(f"speed window holds {mask.sum()} samples, need at least {min_samples}")
    t, p = times[mask], positions[mask]
    c, c0 = np.polyfit(t, p, 1)
    residual = float(np.max(np.abs(p - (c * t + c0))))
    return float(c), residual


# --------------------------------------------------------------------------
# scalar traveling wave by shooting


class ShootingBracketError(RuntimeError):
    pass


def _shoot(c, params, eps=1e-7, z_max=400.0):
    """+1 if the orbit from 1 turns back above 0 (c too large), -1 if it crosses 0."""
    fp1 = reaction_f_prime(1.0, params)
    nu = 0.5 * (-c + np.sqrt(c * c - 4.0 * fp1))
    y0 = [1.0 - eps, -eps * nu]

    def rhs(z, y):
        return [y[1], -c * y[1] - reaction_f(y[0], params)]

    def turned(z, y):
        return y[1]

    turned.terminal, turned.direction = True, 1

    def crossed(z, y):
        return y[0]

    crossed.terminal, crossed.direction = True, -1

    sol = solve_ivp(rhs, (0.0, z_max), y0, method="DOP853", rtol=1e-12, atol=1e-14, events=(turned, crossed))
    if sol.t_events[0].size:
        return 1
    if sol.t_events[1].size:
        return -1
    # overdamped orbits creep into the middle zero without turning
    return 1 if sol.y[0, -1] > 0 else -1


def scalar_wave_speed(params, bracket=(-10.0, 10.0), tol=1e-8):
    """Speed of the monotone front of ``S'' + c S' + f(S) = 0`` joining 1 to 0."""
    cls = classify(params)
    if not cls.is_bistable:
        raise ValueError(f"scalar wave speed needs bistable kinetics ({cls.kind}: {cls.reason})")
    lo, hi = bracket
    if not (_shoot(lo, params) < 0 < _shoot(hi, params)):
        raise ShootingBracketError(f"no sign change of the shooting outcome on c in [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _shoot(mid, params) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# tail decay rates


@dataclass(frozen=True)
class DecayRates:
    c: float
    lam: float
    mu: float
    k: float
    roots_zero: np.ndarray
    roots_one: np.ndarray

    def characteristic(self, lam, k):
        return characteristic_poly(lam, self.c, k)


def characteristic_poly(lam, c, k):
    """``(lam - 1/c)(lam^2 + c lam - 1) - k``."""
    return (lam - 1.0 / c) * (lam * lam + c * lam - 1.0) - k


def _cubic_roots(c, k):
    return np.roots([1.0, c - 1.0 / c, -2.0, 1.0 / c - k])


def decay_rates(c, params):
    """Exponential rates of a system front moving at speed ``c``.

    ``lam`` is the decay rate of ``s`` ahead of the front (at the zero
    state); ``mu`` the rate at which ``1 - s`` decays behind it, the smallest
    positive real part among the roots at the hotspot state.
    """
    if not c > 0:
        raise ValueError(f"decay rates need c > 0, got {c}")
    disc = np.sqrt(c * c + 4.0)
    lam_plus, lam_minus = 0.5 * (-c + disc), 0.5 * (-c - disc)
    roots_zero = np.array([1.0 / c, lam_plus, lam_minus])
    k = params.alpha * g_prime(1.0, params) / c
    roots_one = _cubic_roots(c, k)
    pos = roots_one[roots_one.real > 0]
    if pos.size == 0:
        raise ArithmeticError("no root with positive real part at the hotspot state")
    mu = float(np.min(pos.real))
    lam = float(-lam_minus)
    if not lam > mu:
        raise ArithmeticError(f"decay rates out of order: lambda = {lam} <= mu = {mu}")
    return DecayRates(c=float(c), lam=lam, mu=mu, k=float(k), roots_zero=roots_zero, roots_one=roots_one)


def fit_tail_exponent(x, values, lo=1e-6, hi=1e-3):
    """Log-linear fit of ``values ~ C exp(-rate x)`` on the samples in ``[lo, hi]``.

    Returns the decay rate in the direction of increasing ``values`` decay
    (positive for a right tail), or ``nan`` with fewer than 5 samples.
    """
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = (values >= lo) & (values <= hi)
    if mask.sum() < 5:
        return np.nan
    slope = np.polyfit(x[mask], np.log(values[mask]), 1)[0]
    return float(-slope)


def tail_fits(state, level):
    """Right-tail rate of ``s`` and left-tail rate of ``1 - s`` around the front."""
    xf = level_crossing(state.x, state.s, level)
    if xf is None:
        return np.nan, np.nan
    right = state.x > xf
    left = state.x < xf
    lam_fit = fit_tail_exponent(state.x[right], state.s[right])
    mu_fit = -fit_tail_exponent(state.x[left], 1.0 - state.s[left])
    return lam_fit, mu_fit


def wave_profile(state, params):
    """Fields re-centred so that ``s(0) = s_b / 2`` (1/2 when ``s_b = 0``)."""
    level = 0.5 * params.s_b if params.s_b > 0 else 0.5
    x0 = level_crossing(state.x, state.s, level)
    if x0 is None:
        raise ValueError("profile does not cross the alignment level")
    return state.x - x0, state.s.copy(), state.u.copy()


# --------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class VerdictThresholds:
    eps: float = 0.05
    sentinel_offset: float = 10.0
    quiescence: float = 1e-5
    b_margin: float = 0.02
    formed_offset: float = 5.0


@dataclass
class FrontDiagnostics:
    times: np.ndarray
    positions: np.ndarray
    speed: float = np.nan
    residual: float = np.nan
    lambda_fit: float = np.nan
    mu_fit: float = np.nan
    verdict: str = UNDECIDED

    def summary(self):
        return {
            "c": self.speed,
            "residual": self.residual,
            "lambda_fit": self.lambda_fit,
            "mu_fit": self.mu_fit,
            "verdict": self.verdict,
        }

    def summary_lines(self):
        return format_summary(self.summary())

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,front_x\n")
            for t, xf in zip(self.times, self.positions):
                fh.write(f"{t:.12g},{xf:.12g}\n")


def format_summary(record):
    lines = []
    for key, value in record.items():
        if isinstance(value, (float, np.floating)):
            value = f"{float(value):.12g}"
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def _blocking_ceiling(params):
    cls = classify(params)
    if cls.b is not None:
        return cls.b
    if cls.a is not None:
        return cls.a
    return -np.inf  # monostable: nothing short of the hotspot is stable


def classify_outcome(trajectory, layout, params, thresholds=None):
    """``Propagated``, ``Blocked`` or ``Undecided`` for a run started from a front.

    Propagated: ``s`` at ``right_edge + sentinel_offset`` exceeded ``1 - eps``.
    Blocked: no front ever formed beyond ``right_edge + formed_offset``,
    ``max s`` right of the gap stayed below ``b + b_margin`` over the last
    quarter of the run, and the fields changed by less than ``quiescence``
    over that quarter.
    """
    th = thresholds or VerdictThresholds()
    if np.any(trajectory.s_probe > 1.0 - th.eps):
        return PROPAGATED
    times = trajectory.times
    if times.size < 2:
        return UNDECIDED
    t0, t1 = times[0], times[-1]
    quarter = times >= t0 + 0.75 * (t1 - t0) - 1e-9
    edge = layout.right_edge
    fronts = trajectory.front_x[np.isfinite(trajectory.front_x)]
    formed = fronts.size and np.max(fronts) > edge + th.formed_offset
    low = np.all(trajectory.sup_right[quarter] < _blocking_ceiling(params) + th.b_margin)
    win = trajectory.window_state
    if win is None or formed or not low:
        return UNDECIDED
    change = max(np.max(np.abs(trajectory.final.s - win.s)), np.max(np.abs(trajectory.final.u - win.u)))
    return BLOCKED if change < th.quiescence else UNDECIDED


@dataclass
class GapTrial:
    L: float
    verdict: str
    trajectory: object
    t_final: float
    layout: GapLayout


def gap_config(layout, dx=0.01, dt=None, mode="system", front_x=-12.0, behind=20.0, ahead=30.0, t_end=100.0, boundary="neumann"):
    """Domain sized for a gap trial: ``behind`` units left of the front, ``ahead`` right of the gap."""
    return SolverConfig(
        dx=dx, dt=dt, x_min=front_x - behind, x_max=layout.right_edge + ahead,
        t_end=t_end, mode=mode, boundary=boundary,
    )


def run_gap_trial(params, layout, config, front_x=-12.0, t_cap=3200.0, thresholds=None, stop_on_propagation=True, backend=None):
    """Simulate a front hitting ``layout`` until a verdict, doubling the horizon up to ``t_cap``.

    Each extension continues from the previous final state; the quiescence
    window is always the last quarter of the accumulated run.
    """
    th = thresholds or VerdictThresholds()
    layout_edge = layout.right_edge
    x_probe = layout_edge + th.sentinel_offset
    init = make_front_initial(config, params, front_x, layout=layout)
    stop = None
    if stop_on_propagation:
        i_probe = int(round((x_probe - config.x_min) / config.dx))
        stop = lambda st: st.s[i_probe] > 1.0 - th.eps

    horizon = config.t_end
    chunk = replace(config, t_end=horizon)
    traj = simulate(init, chunk, params, layout, Probes(x_probe=x_probe, window_start=0.75 * horizon), stop=stop, backend=backend)
    while True:
        verdict = classify_outcome(traj, layout, params, th)
        if verdict != UNDECIDED or traj.final.t >= t_cap - 1e-9:
            break
        new_horizon = min(2.0 * horizon, t_cap)
        chunk = replace(config, t_end=new_horizon - horizon)
        probes = Probes(x_probe=x_probe, window_start=0.75 * new_horizon)
        more = simulate(traj.final, chunk, params, layout, probes, stop=stop, backend=backend)
        traj = traj.extended(more)
        horizon = new_horizon
    return GapTrial(layout.L if layout.kind == "single" else layout.total_length, verdict, traj, traj.final.t, layout)


class BracketError(RuntimeError):
    pass


@dataclass
class BisectionResult:
    L_num: float
    lo: float
    hi: float
    probes: list = field(default_factory=list)


def bisect_numerical_lstar(params, bracket, dx=0.01, dt=None, mode="system", tol=None, t_end=100.0, t_cap=3200.0, thresholds=None, backend=None):
    """Bisect the smallest blocking gap length with PDE runs.

    Stops when the bracket is narrower than ``tol`` (default ``2 dx``);
    ``L_num`` is the bracket midpoint.  Raises ``BracketError`` if the
    endpoints do not give Propagated / Blocked, and ``RuntimeError`` if a
    probe stays Undecided up to ``t_cap``.
    """
    tol = 2.0 * dx if tol is None else tol
    probes = []

    def verdict(L):
        layout = GapLayout.single(L)
        cfg = gap_config(layout, dx=dx, dt=dt, mode=mode, t_end=t_end)
        trial = run_gap_trial(params, layout, cfg, t_cap=t_cap, thresholds=thresholds, backend=backend)
        probes.append((L, trial.verdict, trial.t_final))
        if trial.verdict == UNDECIDED:
            raise RuntimeError(f"gap L = {L:.6g} still undecided at t = {trial.t_final:.6g}")
        return trial.verdict

    lo, hi = map(float, bracket)
    v_lo, v_hi = verdict(lo), verdict(hi)
    if v_lo != PROPAGATED or v_hi != BLOCKED:
        raise BracketError(f"bracket [{lo:.6g}, {hi:.6g}] gives ({v_lo}, {v_hi}), need (Propagated, Blocked)")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if verdict(mid) == PROPAGATED:
            lo = mid
        else:
            hi = mid
    return BisectionResult(0.5 * (lo + hi), lo, hi, probes)


def measure_gapless_speed(params, dx=0.01, dt=None, mode="system", length=120.0, t_end=None, settle=0.4, backend=None):
    """Front speed without gaps, fitted after the initial transient.

    The front starts a quarter of the way into ``[-length/2, length/2]``
    from the end it moves away from (the left end when ``F(1) >= 0``); the
    fit uses samples after ``settle * t_end`` while the front stays at least
    15 units from both ends.
    """
    half = 0.5 * length
    cfg = SolverConfig(dx=dx, dt=dt, x_min=-half, x_max=half, t_end=t_end or 100.0, mode=mode, sample_dt=0.25)
    front_x = -0.5 * half if classify(params).F1 >= 0 else 0.5 * half
    init = make_front_initial(cfg, params, front_x)
    level = classify(params).a if classify(params).a is not None else 0.5
    traj = simulate(init, cfg, params, GapLayout.none(), Probes(x_probe=half - 5.0, level=level))
    pos = traj.front_x
    inside = np.isfinite(pos) & (pos > cfg.x_min + 15) & (pos < cfg.x_max - 15)
    late = traj.times >= settle * cfg.t_end
    mask = inside & late
    c, res = estimate_speed(traj.times[mask], pos[mask])
    lam_fit, mu_fit = tail_fits(traj.final, level)
    diag = FrontDiagnostics(traj.times, pos, speed=c, residual=res, lambda_fit=lam_fit, mu_fit=mu_fit, verdict=UNDECIDED)
    return diag, traj


def post_gap_speed(trajectory, layout, offset=10.0, margin=15.0, x_max=None):
    """Speed of the re-formed front once it is ``offset`` past the last gap."""
    pos = trajectory.front_x
    hi = (x_max if x_max is not None else np.inf) - margin
    mask = np.isfinite(pos) & (pos > layout.right_edge + offset) & (pos < hi)
    return estimate_speed(trajectory.times[mask], pos[mask])
