"""Geometry of the catenoid ``r = c cosh(x3 / c)``.

The chart is ``c * (sqrt(1+y^2) cos(theta), sqrt(1+y^2) sin(theta), asinh(y))``
where y is the arclength of the unit profile curve, so the unit-chart metric
is ``diag(1, 1+y^2)``.  The unit normal points toward the component S+ that
contains the x3 axis.

Most functions work in the meridian half-plane ``(r, x3)`` since everything
downstream is axisymmetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoConvergenceError

#: Positive zero of the dilation Jacobi field z2 (critical catenoid in a ball).
Y_STAR = 1.5088795615383199


@dataclass(frozen=True)
class CatenoidChart:
    """A catenoid with neck radius ``c`` and the Fermi tube parameters."""

    c: float = 1.0
    eta: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError("neck radius must be positive")
        if self.eta is None:
            object.__setattr__(self, "eta", 0.5 * self.c)
        if self.delta is None:
            object.__setattr__(self, "delta", 0.25 * self.c)

    def focal_radius(self, y):
        return self.c * (1.0 + np.asarray(y, dtype=float) ** 2)

    def tube_radius(self, r):
        return self.eta + self.delta * np.log(2.0 + np.asarray(r, dtype=float))


@dataclass(frozen=True)
class JacobiFieldPair:
    """Values and first two y-derivatives of z1 (translation) and z2 (dilation)."""

    z1: np.ndarray
    dz1: np.ndarray
    d2z1: np.ndarray
    z2: np.ndarray
    dz2: np.ndarray
    d2z2: np.ndarray


@dataclass(frozen=True)
class FermiPoint:
    """Foot point ``(y, theta)`` on the catenoid and signed normal offset z."""

    y: np.ndarray
    theta: np.ndarray
    z: np.ndarray


def _s(y):
    return np.sqrt(1.0 + y * y)


def chart_eval(c, y, theta):
    """Position, unit normal, metric, ``|A|^2`` and Gauss curvature.

    Returns ``(X, nu, g, A2, K)`` with X and nu of shape ``(..., 3)`` and g of
    shape ``(..., 2, 2)`` in the (y, theta) coordinates of the scaled chart.
    """
    if not c > 0:
        raise DomainError("c must be positive")
    y, theta = np.broadcast_arrays(np.asarray(y, float), np.asarray(theta, float))
    s = _s(y)
    ct, st = np.cos(theta), np.sin(theta)
    X = c * np.stack([s * ct, s * st, np.arcsinh(y)], axis=-1)
    nu = np.stack([-ct, -st, y], axis=-1) / s[..., None]
    g = np.zeros(y.shape + (2, 2))
    g[..., 0, 0] = c * c
    g[..., 1, 1] = c * c * s * s
    A2 = 2.0 / (c * c * s**4)
    K = -0.5 * A2
    return X, nu, g, A2, K


def principal_curvatures(c, y):
    """Principal curvatures (meridian, parallel) w.r.t. the normal toward S+."""
    k = 1.0 / (c * (1.0 + np.asarray(y, float) ** 2))
    return -k, k


def meridian(c, y):
    """Meridian point, unit tangent and unit normal in the (r, x3) plane."""
    y = np.asarray(y, dtype=float)
    s = _s(y)
    point = c * np.stack([s, np.arcsinh(y)], axis=-1)
    tangent = np.stack([y, np.ones_like(y)], axis=-1) / s[..., None]
    normal = np.stack([-np.ones_like(y), y], axis=-1) / s[..., None]
    return point, tangent, normal


def jacobi_fields(y) -> JacobiFieldPair:
    """Closed forms of the axially symmetric Jacobi fields.

    ``z1 = y / sqrt(1+y^2)`` and ``z2 = z1 * asinh(y) - 1``.
    """
    y = np.asarray(y, dtype=float)
    s2 = 1.0 + y * y
    s = np.sqrt(s2)
    ash = np.arcsinh(y)
    z1 = y / s
    dz1 = s2**-1.5
    d2z1 = -3.0 * y * s2**-2.5
    z2 = z1 * ash - 1.0
    dz2 = y / s2 + ash * s2**-1.5
    d2z2 = (2.0 - y * y) / s2**2 - 3.0 * y * ash * s2**-2.5
    return JacobiFieldPair(z1, dz1, d2z1, z2, dz2, d2z2)


def z2_root(tol: float = 1e-15) -> float:
    """Positive zero of z2 by bisection (z2 is increasing on y > 0)."""
    lo, hi = 1.0, 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if jacobi_fields(mid).z2 > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _area_primitive(y):
    return 0.5 * (y * _s(y) + np.arcsinh(y))


def area(c, y_a, y_b):
    """Area of the chart piece ``y_a < y < y_b``."""
    if not y_a < y_b:
        raise DomainError("need y_a < y_b")
    return 2.0 * np.pi * c * c * (_area_primitive(y_b) - _area_primitive(y_a))


def total_curvature(c, y_a, y_b):
    """Integral of the Gauss curvature over ``y_a < y < y_b`` (scale free)."""
    if not y_a < y_b:
        raise DomainError("need y_a < y_b")
    prim = lambda y: y / _s(y)  # noqa: E731
    return -2.0 * np.pi * (prim(y_b) - prim(y_a))


def fermi_map(c, y, theta, z):
    """Ambient point ``c Y(y, theta) + z nu(y, theta)``."""
    z = np.asarray(z, dtype=float)
    if np.any(np.abs(z) >= c * (1.0 + np.asarray(y, float) ** 2)):
        raise DomainError("normal offset reaches the focal radius")
    X, nu, *_ = chart_eval(c, y, theta)
    return X + z[..., None] * nu


def fermi_invert_meridian(c, r, x3, tol=1e-13, max_iter=60, raise_on_failure=True):
    """Foot point parameter y and signed offset z for meridian points.

    Newton on ``g(y) = (P - C(y)) . T(y)`` started from the point of the
    profile at the same height.  Returns ``(y, z, ok)`` where ``ok`` flags the
    points whose iteration converged with ``|z|`` below the focal radius.
    """
    r, x3 = np.broadcast_arrays(np.asarray(r, float), np.asarray(x3, float))
    y = np.sinh(x3 / c)
    active = np.ones(r.shape, dtype=bool)
    for _ in range(max_iter):
        s = _s(y)
        Cr, Cz = c * s, c * np.arcsinh(y)
        dr, dz = r - Cr, x3 - Cz
        g = (dr * y + dz) / s
        zz = (-dr + dz * y) / s
        gp = -c - zz / (s * s)
        gp = np.where(np.abs(gp) < 1e-3 * c, -1e-3 * c, gp)
        step = -g / gp
        step = np.clip(step, -0.5 * s, 0.5 * s)
        y = np.where(active, y + step, y)
        done = np.abs(step) <= tol * (1.0 + np.abs(y))
        active &= ~done
        if not active.any():
            break
    s = _s(y)
    dr, dz = r - c * s, x3 - c * np.arcsinh(y)
    z = (-dr + dz * y) / s
    resid = np.abs((dr * y + dz) / s)
    ok = (resid <= 1e-9 * max(c, 1.0)) & (np.abs(z) < c * s * s)
    if raise_on_failure and not ok.all():
        raise NoConvergenceError("foot-point Newton failed for some points")
    return y, z, ok


def fermi_invert(chart: CatenoidChart | float, position) -> FermiPoint:
    """Fermi coordinates of ambient points inside the tube.

    Raises when the point lies on the x3 axis (azimuth undefined) or outside
    the tube ``|z| < eta + delta log(2 + r)``.
    """
    if not isinstance(chart, CatenoidChart):
        chart = CatenoidChart(float(chart))
    p = np.asarray(position, dtype=float)
    r = np.hypot(p[..., 0], p[..., 1])
    if np.any(r < 1e-14):
        raise DomainError("points on the x3 axis have no azimuth")
    theta = np.mod(np.arctan2(p[..., 1], p[..., 0]), 2.0 * np.pi)
    y, z, ok = fermi_invert_meridian(chart.c, r, p[..., 2], raise_on_failure=False)
    r_foot = chart.c * _s(y)
    if not ok.all() or np.any(np.abs(z) >= chart.tube_radius(r_foot)):
        raise NoConvergenceError("point outside the Fermi tube of the catenoid")
    return FermiPoint(y=y, theta=theta, z=z)
