"""Reaction kinetics of the reduced crime model in shifted coordinates.

The propensity reaction is ``f(s) = -s + alpha * g(s)`` with the sigmoid
``g(s) = Lambda(s - s_b)`` and ``Lambda(s) = 1 - exp(-beta s)`` for ``s >= 0``
(zero below).  All functions accept scalars or numpy arrays.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

ROOT_XTOL = 1e-13
SCAN_STEP = 1e-3
NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class KineticsParams:
    """Kinetic constants ``(alpha, beta, s_b)``.

    Construction validates positivity and the technical bound
    ``log(alpha*beta)/beta < 1``.
    """

    alpha: float
    beta: float
    s_b: float

    def __post_init__(self):
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        if not (self.beta > 0 and np.isfinite(self.beta)):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")
        if not (self.s_b >= 0 and np.isfinite(self.s_b)):
            raise ValueError(f"s_b must be nonnegative, got {self.s_b}")
        bound = np.log(self.alpha * self.beta) / self.beta
        if not bound < 1:
            raise ValueError(
                f"log(alpha*beta)/beta = {bound:.6g} violates the bound < 1 "
                f"(alpha={self.alpha}, beta={self.beta})"
            )

    @classmethod
    def normalized(cls, beta, s_b):
        """Parameters with ``alpha`` chosen so that ``f(1) = 0``."""
        return cls(normalize_alpha(beta, s_b), float(beta), float(s_b))

    @property
    def g1(self):
        return float(g_shifted(1.0, self))


@dataclass(frozen=True)
class Classification:
    kind: str  # "bistable" | "monostable" | "degenerate"
    F1: float
    a: Optional[float] = None
    b: Optional[float] = None
    reason: str = ""

    @property
    def is_bistable(self):
        return self.kind == "bistable"

    @property
    def is_monostable(self):
        return self.kind == "monostable"


def lambda_fraction(s, beta):
    s = np.asarray(s, dtype=float)
    out = -np.expm1(-beta * np.maximum(s, 0.0))
    return out if out.ndim else float(out)


def g_shifted(s, params):
    return lambda_fraction(np.asarray(s, dtype=float) - params.s_b, params.beta)


def g_prime(s, params):
    """Derivative of ``g``; the one-sided value from above at ``s = s_b``."""
    s = np.asarray(s, dtype=float)
    y = s - params.s_b
    out = np.where(y >= 0, params.beta * np.exp(-params.beta * np.maximum(y, 0.0)), 0.0)
    return out if out.ndim else float(out)


def reaction_f(s, params):
    s = np.asarray(s, dtype=float)
    out = -s + params.alpha * g_shifted(s, params)
    return out if np.ndim(out) else float(out)


def reaction_f_prime(s, params):
    out = -1.0 + params.alpha * g_prime(s, params)
    return out if np.ndim(out) else float(out)


def normalize_alpha(beta, s_b):
    """Return the ``alpha`` placing the upper zero of ``f`` at ``s = 1``."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not 0 <= s_b < 1:
        raise ValueError(f"normalization needs 0 <= s_b < 1, got s_b={s_b}")
    return float(-1.0 / np.expm1(-beta * (1.0 - s_b)))


def potential_F(s, params):
    """Closed-form antiderivative ``F(s) = int_0^s f``."""
    s = np.asarray(s, dtype=float)
    y = params.beta * np.maximum(s - params.s_b, 0.0)
    # y + expm1(-y) = y - (1 - e^{-y}) vanishes below threshold
    out = -0.5 * s * s + (params.alpha / params.beta) * (y + np.expm1(-y))
    return out if out.ndim else float(out)


def _expm1_minus_x(y):
    """``exp(y) - 1 - y`` without cancellation for small ``y``."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-2
    ys = np.where(small, y, 0.0)
    series = ys * ys * (0.5 + ys * (1 / 6 + ys * (1 / 24 + ys * (1 / 120 + ys * (1 / 720 + ys / 5040)))))
    return np.where(small, series, np.expm1(np.where(small, 0.0, y)) - y)


def energy_gap(eps, top, params):
    """``int_{top-eps}^{top} f(v) dv`` evaluated from the offset ``eps``.

    Written in terms of ``eps`` so that differences near an equilibrium or a
    turning point keep full relative accuracy.
    """
    eps = np.asarray(eps, dtype=float)
    top = float(top)
    sb = params.s_b
    if top <= sb:
        low = top - eps
        out = 0.5 * (low * low - top * top)
        return out if out.ndim else float(out)
    e_top = np.exp(-params.beta * (top - sb))
    f_top = reaction_f(top, params)
    within = np.minimum(eps, top - sb)
    upper = within * f_top + 0.5 * within * within - (params.alpha * e_top / params.beta) * _expm1_minus_x(params.beta * within)
    low = top - eps
    below = np.where(eps > top - sb, 0.5 * (low * low - sb * sb), 0.0)
    out = upper + below
    return out if out.ndim else float(out)


def _sign_change_brackets(fn, lo, hi, step=SCAN_STEP):
    n = max(int(np.ceil((hi - lo) / step)), 2)
    grid = np.linspace(lo, hi, n + 1)
    vals = fn(grid)
    brackets = []
    for i in range(n):
        if vals[i] == 0.0:
            brackets.append((grid[i], grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            brackets.append((grid[i], grid[i + 1]))
    return brackets


def classify(params):
    """Bistable / monostable / degenerate classification of ``f`` on [0, 1]."""
    F1 = potential_F(1.0, params)
    f1 = reaction_f(1.0, params)
    fp1 = reaction_f_prime(1.0, params)
    if abs(f1) > NORMALIZATION_TOL:
        return Classification("degenerate", F1, reason=f"f(1) = {f1:.3g}; alpha is not normalized")
    if not fp1 < 0:
        return Classification("degenerate", F1, reason=f"f'(1) = {fp1:.3g} >= 0; s = 1 is not stable")

    if params.s_b == 0:
        if params.alpha * params.beta <= 1:
            return Classification("degenerate", F1, reason="alpha*beta <= 1: zero state is not unstable")
        grid = np.linspace(0.0, 1.0, 1001)[1:-1]
        if np.any(reaction_f(grid, params) <= 0):
            return Classification("degenerate", F1, reason="f changes sign inside (0, 1)")
        return Classification("monostable", F1)

    fn = lambda s: reaction_f(s, params)
    interior = [br for br in _sign_change_brackets(fn, params.s_b, 1.0 - SCAN_STEP / 2)]
    if len(interior) != 1:
        return Classification("degenerate", F1, reason=f"{len(interior)} interior zeros of f in (s_b, 1)")
    lo, hi = interior[0]
    a = lo if lo == hi else brentq(fn, lo, hi, xtol=ROOT_XTOL)
    if not reaction_f_prime(a, params) > 0:
        return Classification("degenerate", F1, reason="middle zero is not transversal")
    b = _find_b(params, a) if F1 > 0 else None
    return Classification("bistable", F1, a=float(a), b=b)


def _find_b(params, a):
    fn = lambda s: potential_F(s, params)
    brackets = _sign_change_brackets(fn, a, 1.0)
    lo, hi = brackets[-1]
    return float(lo if lo == hi else brentq(fn, lo, hi, xtol=ROOT_XTOL))


def find_b(params):
    """The unique ``b`` in (0, 1) with ``F(b) = 0``; requires ``F(1) > 0``."""
    cls = classify(params)
    if not cls.is_bistable:
        raise ValueError(f"find_b needs bistable kinetics ({cls.kind}: {cls.reason})")
    if not cls.F1 > 0:
        raise ValueError(f"F(1) = {cls.F1:.3g} <= 0: no zero of F in (0, 1)")
    return cls.b
