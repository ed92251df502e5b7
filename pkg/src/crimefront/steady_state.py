"""Steady states of ``s'' + f_L(x, s) = 0`` built by phase-plane quadrature.

Outside a gap the first integral ``(s')^2 / 2 + F(s) = const`` turns the
profile into a quadrature ``x(s)``; inside a gap the solution is an explicit
combination ``A e^{-x} + B e^{x}``.  Matching value and slope at the gap edges
gives a closed family of one-dimensional root problems.

Gap-matching parametrization
----------------------------
A monotone blocking state enters the gap at ``v = s(0)`` on the heteroclinic
orbit of ``1`` (slope ``-p(v)``) and leaves at ``w = s(L)`` on the homoclinic
orbit of ``0``.  Inside the gap ``s^2 - s'^2 = K`` is conserved, which fixes
``w`` from ``H(w) = w^2 + 2F(w) = K`` and gives the gap length in closed form::

    L(v) = asinh(p / sqrt(K)) - asinh(q / sqrt(K)),   q = |s'(L)|

``L(v)`` is unimodal on ``[v_inf, v_star]``.  Its minimum ``L_fold`` is a
saddle-node of steady states and is the smallest gap that supports a
blocking state.  The touching configuration ``w = b``, ``s'(L) = 0`` sits at
the upper end ``v_star`` and defines the ``critical_length`` value.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.interpolate import BPoly
from scipy.optimize import brentq, minimize_scalar

from .kinetics import (
    KineticsParams,
    classify,
    energy_gap,
    potential_F,
    reaction_f,
    reaction_f_prime,
)

LIMIT_TOL = 1e-10
DEFAULT_NODES = 4096
SHORT_CORE = 1e-2
_GL8 = np.polynomial.legendre.leggauss(8)
_GL16 = np.polynomial.legendre.leggauss(16)


class NonIntegrableOrbit(ValueError):
    """The requested orbit leaves the region where its energy is nonnegative."""


@dataclass(frozen=True)
class NoBlockingSolution:
    L: float
    reason: str

    def __bool__(self):
        return False


@dataclass(frozen=True)
class GapMatch:
    """Gap coefficients of a monotone steady state: ``s = A e^{-x} + B e^{x}`` on [0, L]."""

    A: float
    B: float
    L: float
    s_inf: float
    branch: str = "lower"

    @property
    def entry(self):
        return self.A + self.B

    @property
    def exit(self):
        return self.A * np.exp(-self.L) + self.B * np.exp(self.L)

    @property
    def exit_slope(self):
        return -self.A * np.exp(-self.L) + self.B * np.exp(self.L)

    def identity_residuals(self, params):
        """Residuals of the two C1 matching identities (left edge, right edge).

        Right edge: ``(s'(L))^2 / 2 = F(s_inf) - F(s(L))``.
        """
        left = 0.5 * (self.B - self.A) ** 2 - energy_gap(1.0 - self.entry, 1.0, params)
        right = 0.5 * self.exit_slope**2 - (potential_F(self.s_inf, params) - potential_F(self.exit, params))
        return float(left), float(right)


@dataclass(frozen=True)
class GapGeometry:
    """Parameter-dependent constants of the single-gap problem."""

    b: float
    F1: float
    L0: float
    Lstar: float
    v_star: float
    v_inf: float
    L_lin: float
    v_fold: float
    L_fold: float


# --------------------------------------------------------------------------
# representations of profile pieces


@dataclass(frozen=True)
class ExpRep:
    """``const + sum(amp * exp(rate * (x - x0)))``, exact to all orders."""

    const: float
    terms: tuple

    def __call__(self, x, nu=0):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.const if nu == 0 else 0.0)
        for amp, rate, x0 in self.terms:
            out = out + amp * rate**nu * np.exp(rate * (x - x0))
        return out


@dataclass(frozen=True)
class HermiteRep:
    """Quintic Hermite interpolant through ``(s, s', s'')`` nodes."""

    poly: BPoly

    def __call__(self, x, nu=0):
        fn = self.poly if nu == 0 else self.poly.derivative(nu)
        return fn(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class TaylorRep:
    """Polynomial ``sum(c_k (x - x0)^k)``; used for branch segments too short to tabulate."""

    x0: float
    coeffs: tuple

    def __call__(self, x, nu=0):
        poly = np.polynomial.Polynomial(self.coeffs).deriv(nu)
        return poly(np.asarray(x, dtype=float) - self.x0)


@dataclass(frozen=True)
class Piece:
    lo: float
    hi: float
    gap: bool
    rep: object

    def sample(self, n, span=20.0):
        lo = self.lo if np.isfinite(self.lo) else self.hi - span
        hi = self.hi if np.isfinite(self.hi) else lo + span
        return np.linspace(lo, hi, n)


@dataclass(frozen=True)
class SteadyProfile:
    """Piecewise representation of a steady state on the whole line."""

    pieces: tuple
    left_limit: float
    right_limit: float
    monotone: bool
    params: KineticsParams
    label: str = ""
    match: Optional[GapMatch] = None
    meta: dict = field(default_factory=dict)

    def _eval(self, x, nu):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, np.nan)
        for piece in self.pieces:
            mask = (x >= piece.lo) & (x <= piece.hi)
            if np.any(mask):
                out[mask] = piece.rep(x[mask], nu)
        return out

    def __call__(self, x):
        out = self._eval(x, 0)
        return out if out.ndim else float(out)

    def derivative(self, x, nu=1):
        out = self._eval(x, nu)
        return out if out.ndim else float(out)

    def gap_intervals(self):
        return [(p.lo, p.hi) for p in self.pieces if p.gap]

    def reaction(self, x, s):
        """``f_L(x, s)``: pure decay inside the gap pieces."""
        x = np.asarray(x, dtype=float)
        out = reaction_f(s, self.params)
        for lo, hi in self.gap_intervals():
            inside = (x > lo) & (x < hi)
            out = np.where(inside, -np.asarray(s), out)
        return out

    def piece_residuals(self, per_piece=1000):
        """Max ``|s'' + f_L|`` per piece, second derivative from the representation."""
        out = []
        for piece in self.pieces:
            xs = piece.sample(per_piece)
            s = piece.rep(xs, 0)
            d2 = piece.rep(xs, 2)
            react = -s if piece.gap else reaction_f(s, self.params)
            out.append(float(np.max(np.abs(d2 + react))))
        return out

    def max_residual(self, per_piece=1000):
        return max(self.piece_residuals(per_piece))

    def junctions(self):
        return [p.hi for p in self.pieces[:-1]]

    def junction_mismatch(self):
        """Largest jump in value or slope across interior piece boundaries."""
        worst = 0.0
        for left, right in zip(self.pieces[:-1], self.pieces[1:]):
            x0 = left.hi
            for nu in (0, 1):
                jump = abs(float(left.rep(np.array([x0]), nu)[0] - right.rep(np.array([x0]), nu)[0]))
                worst = max(worst, jump)
        return worst


# --------------------------------------------------------------------------
# quadrature branches


@dataclass(frozen=True)
class QuadratureBranch:
    """Tabulated orbit of ``s'' + f(s) = 0`` with nodes sorted by ``x``.

    Heteroclinic branches are anchored with ``x = 0`` at their lower value and
    extend to ``-inf``; homoclinic branches are anchored at their upper value
    and extend to ``+inf``.
    """

    orbit: str
    x: np.ndarray
    s: np.ndarray
    ds: np.ndarray
    d2s: np.ndarray
    tail: ExpRep
    quad_error: float
    taylor: Optional[tuple] = None

    def __call__(self, x):
        return _eval_pieces(self.to_pieces(), x)

    def to_pieces(self, offset=0.0, mirror=False):
        """Profile pieces placed at ``x + offset`` (or ``offset - x`` when mirrored)."""
        sign = -1.0 if mirror else 1.0
        core = None
        if self.taylor is not None:
            coeffs = tuple(c * sign**k for k, c in enumerate(self.taylor))
            ends = sorted([offset, offset + sign * float(self.x[-1])])
            core = Piece(ends[0], ends[1], False, TaylorRep(float(offset), coeffs))
        elif self.x.size >= 2:
            order = slice(None, None, -1) if mirror else slice(None)
            xs = offset + sign * self.x[order]
            data = np.column_stack([self.s[order], sign * self.ds[order], self.d2s[order]])
            core = Piece(float(xs[0]), float(xs[-1]), False, HermiteRep(BPoly.from_derivatives(xs, data)))
        tail = ExpRep(
            self.tail.const,
            tuple((amp, sign * rate, offset + sign * x0) for amp, rate, x0 in self.tail.terms),
        )
        # the tail hangs off the heteroclinic's left end or the homoclinic's right end
        if self.x.size:
            anchor = self.x[0] if self.orbit == "heteroclinic" else self.x[-1]
        else:
            anchor = 0.0
        edge = float(offset + sign * anchor)
        tail_on_left = (self.orbit == "heteroclinic") != mirror
        if tail_on_left:
            return [Piece(-np.inf, edge, False, tail)] + ([core] if core else [])
        return ([core] if core else []) + [Piece(edge, np.inf, False, tail)]


def _eval_pieces(pieces, x):
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.nan)
    for piece in pieces:
        mask = (x >= piece.lo) & (x <= piece.hi)
        out[mask] = piece.rep(x[mask], 0)
    return out


def _segment_integrals(integrand, t):
    """Per-segment Gauss-Legendre integrals on the grid ``t`` and an error bound."""
    mid = 0.5 * (t[1:] + t[:-1])
    half = 0.5 * (t[1:] - t[:-1])
    vals = []
    for nodes, weights in (_GL8, _GL16):
        pts = mid[:, None] + half[:, None] * nodes[None, :]
        vals.append(half * (integrand(pts) @ weights))
    return vals[1], np.abs(vals[1] - vals[0])


def _tabulate(integrand, t0, t1, n_nodes, tol=1e-13, max_nodes=1 << 17, min_spacing=2e-3):
    # too-dense nodes make Hermite second derivatives roundoff-dominated
    coarse, _ = _segment_integrals(integrand, np.linspace(t0, t1, 65))
    n = int(min(n_nodes, max(16, np.ceil(abs(coarse.sum()) / min_spacing))))
    while True:
        t = np.linspace(t0, t1, n + 1)
        seg, err = _segment_integrals(integrand, t)
        if err.max() <= tol or n >= max_nodes:
            return t, np.concatenate([[0.0], np.cumsum(seg)]), float(err.sum())
        n *= 2


def quadrature_branch(s_from, s_to, params, orbit, n_nodes=DEFAULT_NODES):
    """Tabulate ``x(s)`` along one orbit by integrating ``dx = -ds / sqrt(2 E(s))``.

    Parameters
    ----------
    s_from, s_to : float
        Upper and lower values of the tabulated range.  For the heteroclinic
        orbit of ``1`` use ``s_from`` near 1 (the remainder is an exact
        linearized tail).  For the homoclinic orbit of ``0`` ``s_from`` is the
        starting value (at most ``b``) and the part below ``s_b`` is the exact
        solution ``s_b e^{-x}``.
    orbit : {"heteroclinic", "homoclinic"}

    Notes
    -----
    The integrable singularities are removed by substitution before the
    quadrature: ``s = 1 - e^{-theta}`` near the equilibrium ``1`` and
    ``s = b - tau^2`` at the homoclinic turning point.
    """
    if not s_from >= s_to:
        raise ValueError(f"need s_from >= s_to, got {s_from} < {s_to}")
    sb = params.s_b
    if orbit == "heteroclinic":
        return _heteroclinic(s_from, s_to, params, n_nodes)
    if orbit == "homoclinic":
        cls = classify(params)
        if cls.b is None:
            raise NonIntegrableOrbit("homoclinic orbit of 0 needs bistable kinetics with F(1) > 0")
        if s_from > cls.b + 1e-12:
            raise NonIntegrableOrbit(f"homoclinic orbit of 0 never reaches s = {s_from} > b = {cls.b}")
        return _homoclinic(min(s_from, cls.b), s_to, cls.b, params, n_nodes)
    raise ValueError(f"unknown orbit {orbit!r}")


def _heteroclinic(s_from, s_to, params, n_nodes):
    if not s_from < 1.0:
        raise ValueError("heteroclinic tabulation must stop short of the equilibrium s = 1")
    if reaction_f_prime(1.0, params) >= 0:
        raise NonIntegrableOrbit("s = 1 is not a saddle of s'' + f(s) = 0")
    mu = float(np.sqrt(-reaction_f_prime(1.0, params)))
    eps_end = 1.0 - s_from
    theta0, theta1 = -np.log1p(-s_to), -np.log(eps_end)

    def energy(eps):
        return energy_gap(eps, 1.0, params)

    if theta1 > theta0:
        probe = np.linspace(theta0, theta1, 257)
        if np.any(energy(np.exp(-probe)) <= 0):
            raise NonIntegrableOrbit("energy F(1) - F(s) turns nonpositive along the orbit")
        integrand = lambda th: -np.exp(-th) / np.sqrt(2.0 * energy(np.exp(-th)))
        theta, xs, err = _tabulate(integrand, theta0, theta1, n_nodes)
        eps = np.exp(-theta)
        s = 1.0 - eps
        ds = -np.sqrt(2.0 * energy(eps))
        d2s = -reaction_f(s, params)
        order = np.argsort(xs)
        x, s, ds, d2s = xs[order], s[order], ds[order], d2s[order]
        x_end = float(x[0])
    else:
        x = s = ds = d2s = np.array([])
        x_end, err = 0.0, 0.0
        eps_end = 1.0 - s_to
    tail = ExpRep(1.0, ((-eps_end, mu, x_end),))
    return QuadratureBranch("heteroclinic", x, s, ds, d2s, tail, err)


def _homoclinic(s_from, s_to, b, params, n_nodes):
    sb = params.s_b
    if s_from <= sb:
        tail = ExpRep(0.0, ((s_from, -1.0, 0.0),))
        empty = np.array([])
        return QuadratureBranch("homoclinic", empty, empty, empty, empty, tail, 0.0)

    def energy(tau):
        return energy_gap(tau * tau, b, params)

    tau0, tau1 = np.sqrt(b - s_from), np.sqrt(b - sb)
    integrand = lambda tau: 2.0 * tau / np.sqrt(2.0 * energy(tau))
    tau, xs, err = _tabulate(integrand, tau0, tau1, n_nodes)
    s = b - tau * tau
    s[-1] = sb
    ds = -np.sqrt(2.0 * np.maximum(energy(tau), 0.0))
    d2s = -reaction_f(s, params)
    x_b = float(xs[-1])
    tail = ExpRep(0.0, ((sb, -1.0, x_b),))
    taylor = None
    if x_b < SHORT_CORE:
        taylor = _taylor_coefficients(s[0], ds[0], params)
    return QuadratureBranch("homoclinic", xs, s, ds, d2s, tail, err, taylor)


def _taylor_coefficients(s0, ds0, params):
    """Degree-5 Taylor coefficients of the orbit through ``(s0, ds0)``, valid for ``s0 > s_b``."""
    alpha, beta = params.alpha, params.beta
    ex = np.exp(-beta * (s0 - params.s_b))
    f = reaction_f(s0, params)
    f1 = -1.0 + alpha * beta * ex
    f2 = -alpha * beta**2 * ex
    f3 = alpha * beta**3 * ex
    d1 = ds0
    d2 = -f
    d3 = -f1 * d1
    d4 = -f2 * d1**2 - f1 * d2
    d5 = -f3 * d1**3 - 3.0 * f2 * d1 * d2 - f1 * d3
    return (float(s0), float(d1), d2 / 2.0, d3 / 6.0, d4 / 24.0, d5 / 120.0)


# --------------------------------------------------------------------------
# gap matching


def base_length(b):
    """``L0 = arccosh(1/b)`` with gap coefficients ``A = b e^{L0}/2``, ``B = b e^{-L0}/2``."""
    if not 0 < b < 1:
        raise ValueError(f"base length needs 0 < b < 1, got {b}")
    L0 = float(np.arccosh(1.0 / b))
    return L0, 0.5 * b * np.exp(L0), 0.5 * b * np.exp(-L0)


def _require_blocking_kinetics(params):
    cls = classify(params)
    if not cls.is_bistable:
        raise ValueError(f"gap problem needs bistable kinetics ({cls.kind}: {cls.reason})")
    if not cls.F1 > 0:
        raise ValueError(f"F(1) = {cls.F1:.3g} <= 0: the hotspot does not invade, no gap problem")
    return cls


def lemma_residual(L, params, b=None):
    """``(b sinh L)^2 / 2 - (F(1) - F(b cosh L))``."""
    if b is None:
        b = _require_blocking_kinetics(params).b
    return 0.5 * (b * np.sinh(L)) ** 2 - energy_gap(1.0 - b * np.cosh(L), 1.0, params)


def critical_length(params):
    """Gap length at which the steady state exits the gap at ``b`` with zero slope."""
    b = _require_blocking_kinetics(params).b
    L0 = base_length(b)[0]
    fn = lambda L: lemma_residual(L, params, b)
    Lstar = brentq(fn, 0.0, L0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    h = 1e-6 * L0
    if not (fn(max(Lstar - h, 0.0)) < 0 < fn(min(Lstar + h, L0))):
        raise ArithmeticError("residual is not monotone across the located critical length")
    return float(Lstar)


def _entry_slope(v, params):
    return float(np.sqrt(2.0 * max(energy_gap(1.0 - v, 1.0, params), 0.0)))


def _exit_slope(w, b, params):
    return float(np.sqrt(2.0 * max(energy_gap(b - w, b, params), 0.0)))


def _exit_value(K, b, params):
    """Solve ``w^2 - 2 int_w^b f = K`` for ``w`` in [s_b, b]."""
    if K >= b * b:
        return b
    sb = params.s_b
    fn = lambda w: w * w - 2.0 * energy_gap(b - w, b, params) - K
    if fn(sb) >= 0:
        return sb
    return brentq(fn, sb, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def gap_length_for_entry(v, params, b=None):
    """Closed-form gap length ``L(v)`` of the matched state entering at ``v``.

    Returns ``(L, w, K)``; ``K = v^2 - p(v)^2`` is the conserved gap invariant.
    """
    if b is None:
        b = _require_blocking_kinetics(params).b
    p = _entry_slope(v, params)
    K = v * v - p * p
    if K <= 0:
        sb = params.s_b
        return float(np.log(v / sb)) if K == 0 else np.nan, sb, K
    w = _exit_value(K, b, params)
    q = _exit_slope(w, b, params)
    rk = np.sqrt(K)
    return float(np.arcsinh(p / rk) - np.arcsinh(q / rk)), w, K


@lru_cache(maxsize=64)
def gap_geometry(params):
    cls = _require_blocking_kinetics(params)
    b, F1 = cls.b, cls.F1
    L0 = base_length(b)[0]
    Lstar = critical_length(params)
    v_star = b * np.cosh(Lstar)
    sb = params.s_b
    # K(v) = v^2 - p(v)^2 is increasing on (s_b, 1]
    K_of = lambda v: v * v - 2.0 * energy_gap(1.0 - v, 1.0, params)
    v_inf = brentq(K_of, sb, v_star, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    L_lin = float(np.log(v_inf / sb))

    Lv = lambda v: gap_length_for_entry(v, params, b)[0]
    grid = np.linspace(v_inf, v_star, 2001)[1:-1]
    vals = np.array([Lv(v) for v in grid])
    interior_min = np.flatnonzero((vals[1:-1] < vals[:-2]) & (vals[1:-1] <= vals[2:])) + 1
    if len(interior_min) != 1:
        raise ArithmeticError(f"L(v) is not unimodal ({len(interior_min)} local minima)")
    k = interior_min[0]
    res = minimize_scalar(Lv, bounds=(grid[k - 1], grid[k + 1]), method="bounded", options={"xatol": 1e-13})
    return GapGeometry(
        b=b, F1=F1, L0=L0, Lstar=Lstar, v_star=float(v_star), v_inf=float(v_inf),
        L_lin=L_lin, v_fold=float(res.x), L_fold=float(res.fun),
    )


def fold_length(params):
    """Smallest gap length that admits a monotone blocking steady state."""
    return gap_geometry(params).L_fold


def _match_from_entry(v, L, params, branch):
    p = _entry_slope(v, params)
    return GapMatch(A=0.5 * (v + p), B=0.5 * (v - p), L=float(L), s_inf=0.0, branch=branch)


def gap_match_solve(L, params, branch="lower"):
    """Gap coefficients of a monotone steady state decreasing from 1 to 0.

    ``branch="lower"`` is the smaller (stable) state, which exists for every
    ``L >= L_fold``.  ``branch="upper"`` is the larger state, which exists for
    ``L_fold <= L <= L*`` and at ``L*`` is the state exiting at ``b`` with zero
    slope.  Gap lengths without a solution give a ``NoBlockingSolution``.
    """
    geo = gap_geometry(params)
    tol = 1e-12
    if L < geo.L_fold - tol:
        return NoBlockingSolution(L, f"L < L_fold = {geo.L_fold:.10g}: no monotone blocking state")
    if abs(L - geo.L_fold) <= tol:
        return _match_from_entry(geo.v_fold, L, params, branch)

    def Lv(v):
        if v <= geo.v_inf:
            return geo.L_lin - L
        return gap_length_for_entry(v, params, geo.b)[0] - L

    if branch == "lower":
        if L >= geo.L_lin:
            # exit inside the linear zone s <= s_b: the gap solution is v e^{-x}
            return GapMatch(A=geo.v_inf, B=0.0, L=float(L), s_inf=0.0, branch="lower")
        v = brentq(Lv, geo.v_inf, geo.v_fold, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return _match_from_entry(v, L, params, "lower")
    if branch == "upper":
        if abs(L - geo.Lstar) <= 1e-10:
            return GapMatch(A=0.5 * geo.b * np.exp(L), B=0.5 * geo.b * np.exp(-L), L=float(L), s_inf=0.0, branch="upper")
        if L > geo.Lstar:
            return NoBlockingSolution(L, f"upper branch ends at L* = {geo.Lstar:.10g}")
        v = brentq(Lv, geo.v_fold, geo.v_star, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return _match_from_entry(v, L, params, "upper")
    raise ValueError(f"branch must be 'lower' or 'upper', got {branch!r}")


def build_blocking_profile(L, params, branch="lower", n_nodes=DEFAULT_NODES):
    """Monotone steady state on gap [0, L] with limits 1 at -inf and 0 at +inf."""
    match = gap_match_solve(L, params, branch)
    if not match:
        raise ValueError(match.reason)
    b = gap_geometry(params).b
    entry, exit_ = match.entry, min(match.exit, b)
    left = quadrature_branch(1.0 - LIMIT_TOL, entry, params, "heteroclinic", n_nodes)
    right = quadrature_branch(exit_, 0.0, params, "homoclinic", n_nodes)
    gap = Piece(0.0, float(L), True, ExpRep(0.0, ((match.A, -1.0, 0.0), (match.B, 1.0, 0.0))))
    pieces = left.to_pieces() + [gap] + right.to_pieces(offset=float(L))
    return SteadyProfile(
        pieces=tuple(pieces), left_limit=1.0, right_limit=0.0, monotone=True,
        params=params, label=f"blocking/{match.branch}", match=match,
        meta={"quad_error": left.quad_error + right.quad_error},
    )


def base_supersolution(params, n_nodes=DEFAULT_NODES):
    """Constant 1, then ``b cosh(x - L0)`` on [0, L0], then the homoclinic orbit from ``b``.

    Each piece solves its equation exactly; the slope drops at ``x = 0``,
    which makes this a supersolution rather than a solution.
    """
    b = gap_geometry(params).b
    L0, A, B = base_length(b)
    right = quadrature_branch(b, 0.0, params, "homoclinic", n_nodes)
    pieces = [
        Piece(-np.inf, 0.0, False, ExpRep(1.0, ())),
        Piece(0.0, L0, True, ExpRep(0.0, ((A, -1.0, 0.0), (B, 1.0, 0.0)))),
    ] + right.to_pieces(offset=L0)
    return SteadyProfile(
        pieces=tuple(pieces), left_limit=1.0, right_limit=0.0, monotone=True,
        params=params, label="base-supersolution",
        match=GapMatch(A=A, B=B, L=L0, s_inf=0.0, branch="supersolution"),
    )


def symmetric_root(L, params):
    """Largest ``z`` in (0, 1] with ``z^2 tanh^2(L/2) / 2 = F(1) - F(z)``."""
    if L < 0:
        raise ValueError(f"gap length must be nonnegative, got {L}")
    if L == 0:
        return 1.0
    t2 = np.tanh(0.5 * L) ** 2
    G = lambda z: 0.5 * z * z * t2 - energy_gap(1.0 - z, 1.0, params)
    step = 1e-3
    hi = 1.0
    while hi > 0:
        lo = max(hi - step, 0.0)
        if G(lo) <= 0:
            return float(brentq(G, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
        hi = lo
    raise ArithmeticError("no root of the symmetric matching equation in (0, 1]")


def symmetric_profile(L, params, n_nodes=DEFAULT_NODES):
    """Steady state symmetric about ``L/2`` with both limits equal to 1."""
    if classify(params).kind != "bistable" or potential_F(1.0, params) <= 0:
        raise ValueError("symmetric profile needs bistable kinetics with F(1) > 0")
    z = symmetric_root(L, params)
    if L == 0 or z >= 1.0:
        piece = Piece(-np.inf, np.inf, False, ExpRep(1.0, ()))
        return SteadyProfile((piece,), 1.0, 1.0, True, params, label="symmetric", meta={"z": 1.0})
    half = 0.5 * L
    m = z / np.cosh(half)
    left = quadrature_branch(1.0 - LIMIT_TOL, z, params, "heteroclinic", n_nodes)
    gap = Piece(0.0, float(L), True, ExpRep(0.0, ((0.5 * m, -1.0, half), (0.5 * m, 1.0, half))))
    pieces = left.to_pieces() + [gap] + left.to_pieces(offset=float(L), mirror=True)
    return SteadyProfile(
        pieces=tuple(pieces), left_limit=1.0, right_limit=1.0, monotone=False,
        params=params, label="symmetric", meta={"z": z, "minimum": float(m)},
    )


@dataclass(frozen=True)
class SubsolutionVerdict:
    kind: str  # "PropagationForced" | "DeferToSimulation"
    margin: Optional[float] = None


def double_gap_subsolution_check(L1, L2, d, params, n_grid=20001):
    """Check ``f_{L*}(x, s*) <= f_d(x, s*)`` for the touching state ``s*``.

    Applies when the two gaps fit inside [0, L*], i.e. ``d < L* - (L1 + L2)``;
    otherwise the verdict is left to simulation.  The returned margin is the
    smallest sampled value of ``f_d - f_{L*}``.
    """
    geo = gap_geometry(params)
    total = L1 + L2
    if min(L1, L2, d) < 0:
        raise ValueError("gap lengths and separation must be nonnegative")
    if total >= geo.Lstar:
        raise ValueError(f"L1 + L2 = {total:.6g} must be below L* = {geo.Lstar:.6g}")
    if d >= geo.Lstar - total:
        return SubsolutionVerdict("DeferToSimulation")
    star = build_blocking_profile(geo.Lstar, params, branch="upper")
    x = np.linspace(-5.0, geo.Lstar + 5.0, n_grid)
    s = star(x)
    f_plain = reaction_f(s, params)
    f_star = np.where((x >= 0) & (x <= geo.Lstar), -s, f_plain)
    in_double = ((x >= 0) & (x <= L1)) | ((x >= L1 + d) & (x <= total + d))
    f_split = np.where(in_double, -s, f_plain)
    diff = f_split - f_star
    margin = float(diff.min())
    if margin < -1e-14 or not np.any(diff > 0):
        return SubsolutionVerdict("DeferToSimulation", margin)
    return SubsolutionVerdict("PropagationForced", margin)
