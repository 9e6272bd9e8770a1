"""One-dimensional transition layer of the Allen-Cahn equation.

The heteroclinic ``w(t) = tanh(t / sqrt(2))`` solves ``w'' + w(1 - w^2) = 0``
and connects the two stable phases.  This module also provides the odd
correction ``psi1`` solving ``psi1'' + f'(w) psi1 = t w'`` and the scalar
projection constants used by the reduced interface equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalStabilityError, QuadratureError

SQRT2 = np.sqrt(2.0)

#: Closed form of ``||w'||^2`` (= the 1-D layer energy).
C0_EXACT = 2.0 * SQRT2 / 3.0

# Decay rate of w' at infinity: w'(t) <= 2 sqrt(2) exp(-sqrt(2)|t|).
_DECAY = SQRT2

# psi1 table spacing and Gauss-Legendre order per panel.
_PANEL = 0.05
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)

# Beyond this |t| psi1 is below 1e-20 and the leading asymptotics are used.
_TABLE_END = 40.0


def f(u):
    """Bistable nonlinearity ``f(u) = u (1 - u^2)``."""
    return u * (1.0 - u * u)


def fprime(u):
    return 1.0 - 3.0 * u * u


def eval_w(t):
    """Return ``(w, w', w'')`` at ``t`` from the closed form."""
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("eval_w needs finite t")
    w = np.tanh(t / SQRT2)
    # cosh^-2 directly: 1 - tanh^2 loses all digits in the tails.
    sech2 = _sech2(t / SQRT2)
    return w, sech2 / SQRT2, -w * sech2


def w_third(t):
    """Third derivative of w (needed by Laplacian oracles)."""
    w, wp, _ = eval_w(t)
    return -fprime(w) * wp


def _sech2(u):
    e = np.exp(-2.0 * np.abs(u))
    return 4.0 * e / (1.0 + e) ** 2


def _log_cosh(u):
    a = np.abs(u)
    return a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)


@dataclass(frozen=True)
class ProfileConstants:
    """Projection constants of the layer.

    c0 is ``||w'||^2``, sigma0 the full 1-D energy, c1 the normalised second
    moment ``int t^2 w'^2 / c0``.
    """

    c0: float
    sigma0: float
    c1: float
    errors: dict = field(default_factory=dict, compare=False)


def _tail_bound(power: int, T: float) -> float:
    """Bound of ``int_T^inf t^power * 8 exp(-2 sqrt2 t) dt``."""
    a = 2.0 * _DECAY
    if power == 0:
        return 8.0 * np.exp(-a * T) / a
    if power == 2:
        return 8.0 * np.exp(-a * T) * (T * T / a + 2.0 * T / a**2 + 2.0 / a**3)
    raise ValueError(power)


def _half_line(fun, power, tol, tail_budget=1e-12, limit=400):
    """Integrate an even integrand over the line, truncated where the tail
    bound drops below ``tail_budget``."""
    T = 4.0
    while _tail_bound(power, T) > tail_budget:
        T *= 1.25
    val, err = integrate.quad(fun, 0.0, T, epsabs=tol / 4, epsrel=tol / 4, limit=limit)
    if err > tol / 2:
        raise QuadratureError(f"quadrature error {err:.2e} exceeds tolerance {tol:.2e}")
    tail = _tail_bound(power, T)
    return 2.0 * val, 2.0 * (err + tail)


def compute_constants(quadrature_tol: float = 1e-12) -> ProfileConstants:
    """Compute c0, sigma0 and c1 by adaptive quadrature with explicit tails."""
    if not quadrature_tol > 0:
        raise DomainError("quadrature_tol must be positive")

    def wp2(t):
        return eval_w(t)[1] ** 2

    def energy_density(t):
        w, wp, _ = eval_w(t)
        return 0.5 * wp * wp + 0.25 * _sech2(t / SQRT2) ** 2

    def second_moment(t):
        return t * t * eval_w(t)[1] ** 2

    c0, e0 = _half_line(wp2, 0, quadrature_tol)
    s0, es = _half_line(energy_density, 0, quadrature_tol)
    m2, e2 = _half_line(second_moment, 2, quadrature_tol)
    if abs(c0 - C0_EXACT) > max(10 * quadrature_tol, 1e-14):
        raise QuadratureError(f"c0 = {c0!r} disagrees with 2*sqrt(2)/3")
    return ProfileConstants(
        c0=c0, sigma0=s0, c1=m2 / c0, errors={"c0": e0, "sigma0": es, "c1": e2 / c0}
    )


# psi1 ----------------------------------------------------------------------
#
# With u = |s| / sqrt2 the inner integral int_s^inf xi w'(xi)^2 dxi equals
# H(u) = int_u^inf x sech^4 x dx, and w'(s)^-2 = 2 cosh^4 u.  The variation of
# parameters solution built on the kernel element w' is psi1 = w' v with
# v(t) = -int_0^t 2 H(u) cosh^4(u) ds.

_H_INF = 2.0 * np.log(2.0) / 3.0 - 1.0 / 6.0
_SERIES_SWITCH = 2.0
_SERIES_TERMS = 40


def _H_closed(u):
    th = np.tanh(u)
    F = u * (th - th**3 / 3.0) - 2.0 * _log_cosh(u) / 3.0 - th * th / 6.0
    return _H_INF - F


def _vprime_series(u):
    # -2 H cosh^4 with sech^4 = 16 sum (-1)^k C(k+3,3) e^{-(2k+4)u}; the e^{4u}
    # of cosh^4 cancels analytically, so nothing overflows.
    e = np.exp(-2.0 * u)
    total = np.zeros_like(u)
    ek = np.ones_like(u)
    for k in range(_SERIES_TERMS):
        a = 2.0 * k + 4.0
        binom = (k + 1) * (k + 2) * (k + 3) / 6.0
        total += (-1) ** k * binom * ek * (u / a + 1.0 / a**2)
        ek = ek * e
    return -2.0 * (1.0 + e) ** 4 * total


def vprime(s):
    """Derivative of the amplitude v in ``psi1 = w' v`` (even in s)."""
    s = np.asarray(s, dtype=float)
    u = np.abs(s) / SQRT2
    out = np.empty_like(u)
    small = u <= _SERIES_SWITCH
    us = u[small]
    out[small] = -2.0 * _H_closed(us) * np.cosh(us) ** 4
    out[~small] = _vprime_series(u[~small])
    return out


def _vsecond(s):
    s = np.asarray(s, dtype=float)
    u = np.abs(s) / SQRT2
    return np.sign(s) * (2.0 * u + 4.0 * vprime(u * SQRT2) * np.tanh(u)) / SQRT2


def _v_asymptotic_increment(a, b):
    # int_a^b of the leading behaviour -(s / (2 sqrt2) + 1/8)
    return -((b * b - a * a) / (4.0 * SQRT2) + (b - a) / 8.0)


@dataclass(frozen=True)
class Psi1Correction:
    """Samples of psi1 on a symmetric grid plus an exact evaluator.

    ``t``, ``psi``, ``dpsi`` and ``d2psi`` hold the table on
    ``[-t_max, t_max]``; :meth:`__call__` evaluates anywhere.
    """

    t: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    d2psi: np.ndarray
    sigma: float
    t_max: float

    @cached_property
    def _v_nodes(self):
        return _v_table()

    def v(self, t):
        t = np.asarray(t, dtype=float)
        a = np.abs(t)
        knots, V = self._v_nodes
        inside = a <= knots[-1]
        out = np.empty_like(a)
        ai = a[inside]
        j = np.minimum((ai / _PANEL).astype(int), len(knots) - 2)
        left = knots[j]
        half = 0.5 * (ai - left)
        x = left[:, None] + half[:, None] * (_GL_NODES[None, :] + 1.0)
        out[inside] = V[j] + half * (vprime(x) @ _GL_WEIGHTS)
        ao = a[~inside]
        out[~inside] = V[-1] + _v_asymptotic_increment(knots[-1], ao)
        return np.sign(t) * out

    def __call__(self, t, derivatives: bool = False):
        """Evaluate psi1 (and optionally psi1', psi1'') at arbitrary t."""
        t = np.asarray(t, dtype=float)
        w, wp, wpp = eval_w(t)
        v = self.v(t)
        vp = vprime(t)
        psi = wp * v
        if not derivatives:
            return psi
        dpsi = wpp * v + wp * vp
        d2psi = w_third(t) * v + 2.0 * wpp * vp + wp * _vsecond(t)
        return psi, dpsi, d2psi

    def weighted_sup(self, j: int = 0, sigma: float | None = None) -> float:
        """``max |e^{sigma|t|} d^j psi1|`` over the table."""
        sigma = self.sigma if sigma is None else sigma
        arr = (self.psi, self.dpsi, self.d2psi)[j]
        return float(np.max(np.exp(sigma * np.abs(self.t)) * np.abs(arr)))


_V_TABLE = None


def _v_table():
    global _V_TABLE
    if _V_TABLE is None:
        n = int(round(_TABLE_END / _PANEL))
        knots = np.linspace(0.0, _TABLE_END, n + 1)
        left = knots[:-1]
        x = left[:, None] + 0.5 * _PANEL * (_GL_NODES[None, :] + 1.0)
        incr = 0.5 * _PANEL * (vprime(x) @ _GL_WEIGHTS)
        V = np.concatenate([[0.0], np.cumsum(incr)])
        _V_TABLE = (knots, V)
    return _V_TABLE


def solve_psi1(t_max: float = 12.0, sigma: float = 1.0, dt: float = 0.01) -> Psi1Correction:
    """Solve ``psi1'' + f'(w) psi1 = t w'`` for the bounded odd solution.

    The solution is ``psi1 = w' v`` with
    ``v(t) = -int_0^t w'(s)^-2 int_s^inf xi w'(xi)^2 dxi ds``; the inner
    integral is evaluated in closed form near the origin and by its
    exponential series in the tails, so ``w'(s)^-2`` never multiplies a
    cancelled difference.
    """
    if t_max < 8:
        raise DomainError("t_max must be at least 8")
    if not 0 < sigma < SQRT2:
        raise DomainError("sigma must lie in (0, sqrt(2))")
    n = int(round(t_max / dt))
    t = np.linspace(-t_max, t_max, 2 * n + 1)
    corr = Psi1Correction(t=t, psi=t, dpsi=t, d2psi=t, sigma=sigma, t_max=t_max)
    psi, dpsi, d2psi = corr(t, derivatives=True)
    if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(d2psi))):
        raise NumericalStabilityError("psi1 evaluation produced non-finite values")
    return Psi1Correction(t=t, psi=psi, dpsi=dpsi, d2psi=d2psi, sigma=sigma, t_max=t_max)


def project_on_wprime(t, values, c0: float = C0_EXACT, decay_tol: float = 1e-4):
    """Split sampled ``f`` into ``coefficient * w' + remainder``.

    ``t`` must be a uniform grid; the trapezoid rule is spectrally accurate for
    the exponentially decaying integrands this is meant for.  Returns
    ``(coefficient, remainder)`` with ``<remainder, w'> = 0``.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if t.shape != values.shape or t.ndim != 1 or t.size < 3:
        raise DomainError("t and values must be matching 1-D arrays")
    scale = np.max(np.abs(values))
    if scale > 0 and max(abs(values[0]), abs(values[-1])) > decay_tol * scale:
        raise DomainError("input does not decay at the ends of the grid")
    wp = eval_w(t)[1]
    coefficient = integrate.trapezoid(values * wp, t) / c0
    return float(coefficient), values - coefficient * wp
