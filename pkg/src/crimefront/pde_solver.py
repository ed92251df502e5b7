"""Finite-difference integration of the propensity/crime system on a truncated line.

System mode::

    s_t = s_xx - s + alpha_L(x) u
    u_t = g(s) - u

Scalar mode replaces ``u`` by ``g(s)`` in the first equation.  Diffusion and
the linear decay are implicit, the source term explicit, and ``u`` is advanced
by the exact exponential integrator with ``g(s)`` frozen over the step.  The
scheme is monotone for ``dt * alpha * beta <= 1 + dt``: ordered data stay
ordered at every step.
"""

import csv
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._kernels import Stepper
from .kinetics import KineticsParams, classify, g_shifted

BOUNDARY_WARN_DISTANCE = 5.0


class NumericalFailure(RuntimeError):
    """A non-finite value appeared while stepping."""


class BoundaryProximityWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class GapLayout:
    """Gap intervals where the payoff ``alpha`` is switched off; the first gap starts at 0."""

    kind: str = "none"
    L: float = 0.0
    L1: float = 0.0
    L2: float = 0.0
    d: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "single", "double"):
            raise ValueError(f"gap kind must be none, single or double, got {self.kind!r}")
        for name in ("L", "L1", "L2", "d"):
            if getattr(self, name) < 0:
                raise ValueError(f"gap.{name} must be nonnegative")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def single(cls, L):
        return cls("single", L=float(L))

    @classmethod
    def double(cls, L1, L2, d):
        return cls("double", L1=float(L1), L2=float(L2), d=float(d))

    def intervals(self):
        if self.kind == "single":
            return [(0.0, self.L)]
        if self.kind == "double":
            return [(0.0, self.L1), (self.L1 + self.d, self.L1 + self.d + self.L2)]
        return []

    @property
    def right_edge(self):
        ivs = self.intervals()
        return ivs[-1][1] if ivs else 0.0

    @property
    def total_length(self):
        return sum(hi - lo for lo, hi in self.intervals())


def alpha_profile(layout, x, alpha):
    """``alpha`` outside the gap intervals, 0 on the closed intervals."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, float(alpha))
    for lo, hi in layout.intervals():
        out[(x >= lo) & (x <= hi)] = 0.0
    return out if out.ndim else float(out)


def alpha_on_grid(layout, x, dx, alpha):
    """Cell-averaged ``alpha_L`` on nodes: ``alpha`` times the gap-free fraction of each cell.

    Keeps the discrete gap length equal to ``L`` for any grid alignment.
    """
    x = np.asarray(x, dtype=float)
    left, right = x - 0.5 * dx, x + 0.5 * dx
    covered = np.zeros_like(x)
    for lo, hi in layout.intervals():
        covered += np.clip(np.minimum(right, hi) - np.maximum(left, lo), 0.0, None)
    frac = np.clip(covered / dx, 0.0, 1.0)
    # grid roundoff would otherwise leave ~1e-15 payoff inside the gap
    frac[frac > 1.0 - 1e-9] = 1.0
    frac[frac < 1e-9] = 0.0
    return float(alpha) * (1.0 - frac)


@dataclass(frozen=True)
class SolverConfig:
    dx: float = 0.01
    dt: Optional[float] = None
    x_min: float = -40.0
    x_max: float = 40.0
    t_end: float = 100.0
    boundary: str = "neumann"
    dirichlet: tuple = (1.0, 0.0)
    mode: str = "system"
    sample_dt: float = 0.5

    def __post_init__(self):
        if self.dt is None:
            object.__setattr__(self, "dt", self.dx)
        if not self.dx > 0:
            raise ValueError(f"dx must be positive, got {self.dx}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.x_min < 0 < self.x_max:
            raise ValueError(f"need x_min < 0 < x_max, got [{self.x_min}, {self.x_max}]")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if self.boundary not in ("neumann", "dirichlet"):
            raise ValueError(f"boundary must be neumann or dirichlet, got {self.boundary!r}")
        if self.mode not in ("system", "scalar"):
            raise ValueError(f"mode must be system or scalar, got {self.mode!r}")
        if not self.sample_dt > 0:
            raise ValueError("sample_dt must be positive")

    @property
    def n_nodes(self):
        return int(round((self.x_max - self.x_min) / self.dx)) + 1

    def grid(self):
        return self.x_min + self.dx * np.arange(self.n_nodes)

    def check_layout(self, layout):
        if layout.kind == "single" and self.x_max < layout.L + 20:
            raise ValueError(f"x_max = {self.x_max} must be at least L + 20 = {layout.L + 20}")
        if layout.kind == "double" and self.x_max < layout.right_edge + 20:
            raise ValueError(f"x_max = {self.x_max} must be at least {layout.right_edge + 20}")


@dataclass
class FieldState:
    x: np.ndarray
    s: np.ndarray
    u: np.ndarray
    t: float = 0.0

    def copy(self):
        return FieldState(self.x.copy(), self.s.copy(), self.u.copy(), self.t)

    def bounds_violation(self, params):
        """Largest excursion outside [0, 1] x [0, g(1)]."""
        g1 = params.g1
        return float(max(
            np.max(-self.s, initial=0.0), np.max(self.s - 1.0, initial=0.0),
            np.max(-self.u, initial=0.0), np.max(self.u - g1, initial=0.0),
        ))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "s", "u"])
            for row in zip(self.x, self.s, self.u):
                w.writerow([f"{v:.12g}" for v in row])


def level_crossing(x, s, level):
    """Rightmost ``x`` where the linear interpolant of ``s`` crosses ``level`` from above."""
    above = s >= level
    idx = np.flatnonzero(above[:-1] & ~above[1:])
    if idx.size == 0:
        return None
    i = idx[-1]
    frac = (s[i] - level) / (s[i] - s[i + 1])
    return float(x[i] + frac * (x[i + 1] - x[i]))


def default_level(params):
    """The middle zero ``a`` for bistable kinetics, otherwise 1/2."""
    cls = classify(params)
    return cls.a if cls.a is not None else 0.5


def make_state(config, s, u=None, params=None, t=0.0):
    x = config.grid()
    s = np.array(s(x) if callable(s) else s, dtype=float)
    if u is None:
        u = g_shifted(s, params)
    u = np.array(u(x) if callable(u) else u, dtype=float)
    if s.shape != x.shape or u.shape != x.shape:
        raise ValueError("field shapes do not match the grid")
    return FieldState(x, s, u, float(t))


def make_front_initial(config, params, front_x, width=0.25, layout=None):
    """Logistic step from ``(1, g(1))`` to ``(0, 0)`` crossing level ``a`` at ``front_x``.

    The default width keeps the initial tails steeper than the wave tails, so
    the relaxed front carries its own decay rates rather than the initial ones.
    """
    if not config.x_min < front_x < config.x_max:
        raise ValueError(f"front_x = {front_x} outside the domain")
    if layout is not None and layout.intervals() and front_x > -10.0:
        raise ValueError("the initial front must start at least 10 units left of the gap")
    level = default_level(params)
    center = front_x - width * np.log(1.0 / level - 1.0)
    x = config.grid()
    z = np.clip((x - center) / width, -700, 700)
    s = 1.0 / (1.0 + np.exp(z))
    return FieldState(x, s, g_shifted(s, params), 0.0)


def _stepper(config, params, layout, backend=None, x=None):
    x = config.grid() if x is None else x
    alpha = alpha_on_grid(layout, x, config.dx, params.alpha)
    return Stepper(
        alpha, config.dt, config.dx, params, boundary=config.boundary,
        dirichlet=config.dirichlet, scalar=config.mode == "scalar", backend=backend,
    )


def step(state, config, params, layout, backend=None):
    """Return the state advanced by one time step."""
    if state.s.shape != (config.n_nodes,):
        raise ValueError("state does not match the configured grid")
    out = state.copy()
    ok = _stepper(config, params, layout, backend, state.x).advance(out.s, out.u, 1)
    if not ok or not (np.all(np.isfinite(out.s)) and np.all(np.isfinite(out.u))):
        raise NumericalFailure(f"non-finite field after step at t = {state.t + config.dt:.6g}")
    out.t = state.t + config.dt
    return out


@dataclass(frozen=True)
class Probes:
    """What to record while stepping.

    ``window_start`` is the absolute time at which a copy of the fields is
    kept, used to measure how much the solution still changes near the end
    of a run.
    """

    x_probe: Optional[float] = None
    level: Optional[float] = None
    snapshot_dt: Optional[float] = None
    window_start: Optional[float] = None


@dataclass
class Trajectory:
    times: np.ndarray
    front_x: np.ndarray
    s_probe: np.ndarray
    u_probe: np.ndarray
    sup_right: np.ndarray
    final: FieldState
    x_probe: float
    level: float
    snapshots: list = field(default_factory=list)
    window_state: Optional[FieldState] = None
    warnings: list = field(default_factory=list)
    stopped_early: bool = False

    def extended(self, more):
        """Concatenate a continuation run started from ``self.final``."""
        keep = slice(1, None)
        return Trajectory(
            times=np.concatenate([self.times, more.times[keep]]),
            front_x=np.concatenate([self.front_x, more.front_x[keep]]),
            s_probe=np.concatenate([self.s_probe, more.s_probe[keep]]),
            u_probe=np.concatenate([self.u_probe, more.u_probe[keep]]),
            sup_right=np.concatenate([self.sup_right, more.sup_right[keep]]),
            final=more.final, x_probe=more.x_probe, level=more.level,
            snapshots=self.snapshots + more.snapshots,
            window_state=more.window_state,
            warnings=self.warnings + more.warnings, stopped_early=more.stopped_early,
        )

    def write_probes_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "front_x", "s_probe", "u_probe"])
            for row in zip(self.times, self.front_x, self.s_probe, self.u_probe):
                w.writerow([f"{v:.12g}" for v in row])


def simulate(initial, config, params, layout, probes=None, stop=None, backend=None, on_sample=None):
    """Integrate from ``initial`` for ``config.t_end`` time units, sampling every ``sample_dt``.

    Each sample records the front position (rightmost crossing of the probe
    level), the fields at ``x_probe`` and ``max s`` right of the last gap.
    ``stop(state)`` may end the run early; ``on_sample(state)`` sees the live
    state at every sample time and must not modify it.
    """
    probes = probes or Probes()
    config.check_layout(layout)
    if initial.s.shape != (config.n_nodes,):
        raise ValueError("initial state does not match the configured grid")
    level = probes.level if probes.level is not None else default_level(params)
    x_probe = probes.x_probe if probes.x_probe is not None else layout.right_edge + 10.0
    x_probe = float(np.clip(x_probe, config.x_min, config.x_max))
    i_probe = int(round((x_probe - config.x_min) / config.dx))
    right_mask = initial.x > layout.right_edge

    state = initial.copy()
    stepper = _stepper(config, params, layout, backend, state.x)
    per_sample = max(int(round(config.sample_dt / config.dt)), 1)
    total = int(round(config.t_end / config.dt))
    snap_every = None
    if probes.snapshot_dt:
        snap_every = max(int(round(probes.snapshot_dt / config.dt)), 1)

    times, fronts, sp, up, sup, snaps, notes = [], [], [], [], [], [], []
    window = None
    warned = False

    def record(n_done):
        nonlocal warned, window
        xf = level_crossing(state.x, state.s, level)
        times.append(state.t)
        fronts.append(np.nan if xf is None else xf)
        sp.append(state.s[i_probe])
        up.append(state.u[i_probe])
        sup.append(state.s[right_mask].max() if right_mask.any() else np.nan)
        if snap_every and n_done % snap_every == 0:
            snaps.append((state.t, state.s.copy(), state.u.copy()))
        if window is None and probes.window_start is not None and state.t >= probes.window_start - 1e-9:
            window = state.copy()
        if xf is not None and not warned and min(xf - config.x_min, config.x_max - xf) < BOUNDARY_WARN_DISTANCE:
            warned = True
            msg = f"front at x = {xf:.3f} is within {BOUNDARY_WARN_DISTANCE} of the domain boundary (t = {state.t:.3f})"
            notes.append(msg)
            warnings.warn(msg, BoundaryProximityWarning, stacklevel=3)

    done = 0
    record(0)
    stopped = False
    while done < total:
        n = min(per_sample, total - done)
        if snap_every:
            n = min(n, snap_every - done % snap_every)
        ok = stepper.advance(state.s, state.u, n)
        done += n
        state.t = initial.t + done * config.dt
        if not ok or not (np.all(np.isfinite(state.s)) and np.all(np.isfinite(state.u))):
            raise NumericalFailure(f"non-finite field at t = {state.t:.6g}")
        if done % per_sample == 0 or done == total:
            record(done)
            if on_sample is not None:
                on_sample(state)
            if stop is not None and stop(state):
                stopped = True
                break
        elif snap_every and done % snap_every == 0:
            snaps.append((state.t, state.s.copy(), state.u.copy()))

    return Trajectory(
        times=np.array(times), front_x=np.array(fronts), s_probe=np.array(sp), u_probe=np.array(up),
        sup_right=np.array(sup), final=state, x_probe=x_probe, level=level, snapshots=snaps,
        window_state=window, warnings=notes, stopped_early=stopped,
    )
