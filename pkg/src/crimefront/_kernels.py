"""Time-stepping kernels: one tridiagonal solve plus pointwise updates per step.

Both backends advance ``n`` steps of

    (1 + dt + 2r) s_i - r (s_{i-1} + s_{i+1}) = s_i^n + dt * alpha_i * u_i^n
    u^{n+1} = u^n e^{-dt} + (1 - e^{-dt}) g(s^n)

with ``r = dt / dx^2``.  In scalar mode ``u`` is replaced by ``g(s^n)``.  The
tridiagonal matrix is constant, so it is factored once.
"""

import math

import numpy as np
from scipy.linalg import lapack

from ._accel import njit, use_numba


def assemble(n, dt, dx, boundary):
    """Sub/main/super diagonals. ``boundary`` is ``"neumann"`` or ``"dirichlet"``."""
    r = dt / (dx * dx)
    sub = np.full(n - 1, -r)
    diag = np.full(n, 1.0 + dt + 2.0 * r)
    sup = np.full(n - 1, -r)
    if boundary == "neumann":
        # ghost node mirrors the first interior node
        sup[0] = -2.0 * r
        sub[-1] = -2.0 * r
    elif boundary == "dirichlet":
        diag[0] = diag[-1] = 1.0
        sup[0] = sub[-1] = 0.0
    else:
        raise ValueError(f"unknown boundary {boundary!r}")
    return sub, diag, sup


def thomas_factor(sub, diag, sup):
    n = diag.size
    cp = np.empty(n - 1)
    inv = np.empty(n)
    inv[0] = 1.0 / diag[0]
    cp[0] = sup[0] * inv[0]
    for i in range(1, n):
        inv[i] = 1.0 / (diag[i] - sub[i - 1] * cp[i - 1])
        if i < n - 1:
            cp[i] = sup[i] * inv[i]
    return cp, inv


@njit
def _g(s, beta, s_b):
    if s <= s_b:
        return 0.0
    return -math.expm1(-beta * (s - s_b))


@njit
def _advance_numba(s, u, alpha, sub, cp, inv, dt, beta, s_b, n_steps, scalar, fix_left, fix_right, left_val, right_val):
    # the right-hand side is formed inside the forward sweep, so each step
    # touches the arrays twice instead of three times
    n = s.size
    decay = math.exp(-dt)
    gain = -math.expm1(-dt)
    for _ in range(n_steps):
        prev = 0.0
        for i in range(n):
            gi = _g(s[i], beta, s_b)
            if scalar:
                r = s[i] + dt * alpha[i] * gi
                u[i] = gi
            else:
                r = s[i] + dt * alpha[i] * u[i]
                u[i] = u[i] * decay + gain * gi
            if i == 0 and fix_left:
                r = left_val
            elif i == n - 1 and fix_right:
                r = right_val
            if i > 0:
                r -= sub[i - 1] * prev
            prev = r * inv[i]
            s[i] = prev
        for i in range(n - 2, -1, -1):
            s[i] -= cp[i] * s[i + 1]
        if not math.isfinite(s[0] + s[n - 1] + s[n // 2]):
            return False
    return True


class Stepper:
    """Advances ``(s, u)`` in place with a fixed grid, step and layout."""

    def __init__(self, alpha, dt, dx, params, boundary="neumann", dirichlet=(1.0, 0.0), scalar=False, backend=None):
        self.alpha = np.ascontiguousarray(alpha, dtype=float)
        self.dt = float(dt)
        self.beta = float(params.beta)
        self.s_b = float(params.s_b)
        self.scalar = bool(scalar)
        self.boundary = boundary
        self.dirichlet = tuple(float(v) for v in dirichlet)
        self.backend = backend or ("numba" if use_numba() else "numpy")
        n = self.alpha.size
        self.sub, self.diag, self.sup = assemble(n, dt, dx, boundary)
        if self.backend == "numba":
            self.cp, self.inv = thomas_factor(self.sub, self.diag, self.sup)
        else:
            self.lu = lapack.dgttrf(self.sub, self.diag, self.sup)
            if self.lu[-1] != 0:
                raise np.linalg.LinAlgError("tridiagonal factorization failed")
        self._decay = np.exp(-self.dt)
        self._gain = -np.expm1(-self.dt)

    def advance(self, s, u, n_steps):
        """Advance ``n_steps``; returns False if a non-finite value appeared."""
        fix = self.boundary == "dirichlet"
        if self.backend == "numba":
            return bool(_advance_numba(
                s, u, self.alpha, self.sub, self.cp, self.inv, self.dt, self.beta, self.s_b,
                int(n_steps), self.scalar, fix, fix, self.dirichlet[0], self.dirichlet[1],
            ))
        dl, d, du, du2, ipiv, _ = self.lu
        for _ in range(int(n_steps)):
            y = np.maximum(s - self.s_b, 0.0)
            gs = -np.expm1(-self.beta * y)
            if self.scalar:
                rhs = s + self.dt * self.alpha * gs
                u[:] = gs
            else:
                rhs = s + self.dt * self.alpha * u
                u *= self._decay
                u += self._gain * gs
            if fix:
                rhs[0], rhs[-1] = self.dirichlet
            sol, info = lapack.dgttrs(dl, d, du, du2, ipiv, rhs)
            s[:] = sol
            if not np.isfinite(s[0] + s[-1] + s[s.size // 2]):
                return False
        return True
