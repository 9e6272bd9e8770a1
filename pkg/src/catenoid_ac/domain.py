"""Axisymmetric containers and critical placement of a catenoid inside them.

A container is described in the meridian half-plane ``(r, x3)``, ``r >= 0``,
by ``Phi(r, x3) = r^2/a^2 + x3^2/b^2 - 1`` (negative inside).  The even
catenoid piece ``|y| <= y_bar`` of neck radius ``c`` is *critical* when its
boundary circles lie on the container and it meets the container at a right
angle there.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import catenoid as cat
from .errors import DomainError, NoCriticalCatenoidError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AxisymDomain:
    """Ellipsoid of revolution with equatorial semi-axis a and polar semi-axis b."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError("semi-axes must be positive")

    @property
    def is_ball(self) -> bool:
        return self.a == self.b

    @property
    def volume(self) -> float:
        return 4.0 * np.pi * self.a**2 * self.b / 3.0

    def phi(self, r, x3):
        return (np.asarray(r) / self.a) ** 2 + (np.asarray(x3) / self.b) ** 2 - 1.0

    def grad_phi(self, r, x3):
        r, x3 = np.broadcast_arrays(np.asarray(r, float), np.asarray(x3, float))
        return np.stack([2.0 * r / self.a**2, 2.0 * x3 / self.b**2], axis=-1)

    def outward_normal(self, r, x3):
        g = self.grad_phi(r, x3)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def nearest_boundary_point(self, r, x3, iters: int = 50):
        """Closest point of the meridian ellipse; returns ``(q, distance)``.

        ``distance`` is signed, positive inside.
        """
        r, x3 = np.broadcast_arrays(np.asarray(r, float), np.asarray(x3, float))
        a, b = self.a, self.b
        ang = np.arctan2(x3 / b, np.maximum(r, 0.0) / a)
        for _ in range(iters):
            s, co = np.sin(ang), np.cos(ang)
            F = (b * b - a * a) * s * co + a * r * s - b * x3 * co
            dF = (b * b - a * a) * (co * co - s * s) + a * r * co + b * x3 * s
            dF = np.where(np.abs(dF) < 1e-14, 1e-14, dF)
            step = np.clip(F / dF, -0.5, 0.5)
            ang = ang - step
            if np.max(np.abs(step)) < 1e-15:
                break
        q = np.stack([a * np.cos(ang), b * np.sin(ang)], axis=-1)
        dist = np.hypot(r - q[..., 0], x3 - q[..., 1])
        return q, np.where(self.phi(r, x3) <= 0, dist, -dist)


def make_ball(R: float) -> AxisymDomain:
    return make_ellipsoid(R, R)


def make_ellipsoid(a: float, b: float) -> AxisymDomain:
    if not (a > 0 and b > 0):
        raise DomainError("semi-axes must be positive")
    return AxisymDomain(float(a), float(b))


def critical_ball_radius() -> float:
    """Radius of the ball in which the unit-neck catenoid is critical."""
    y = cat.Y_STAR
    return (1.0 + y * y) / y


@dataclass(frozen=True)
class BoundaryData:
    """Boundary geometry where the catenoid meets the container.

    K is the curvature of the container's meridian in the direction of the
    catenoid normal (positive for convex walls); I is the Robin coefficient
    ``l2^2 d^2G/dz^2`` in inward arclength units; m1 the meridian second
    fundamental coefficient of the catenoid.  All in 1/length.
    """

    K: float
    I: float
    m1: float
    dG: float
    d2G: float


@dataclass(frozen=True)
class CriticalPlacement:
    """Even catenoid piece ``|y| <= y_bar`` of neck radius c, critical in ``domain``."""

    domain: AxisymDomain
    c: float
    y_bar: float
    K1: float
    K2: float
    I: float
    m1: float
    residuals: dict = field(default_factory=dict, compare=False)

    @property
    def chart(self) -> cat.CatenoidChart:
        return cat.CatenoidChart(self.c)

    @property
    def bounds(self):
        return -self.y_bar, self.y_bar

    @property
    def kappa_chart(self):
        """Chart-scaled Robin coefficients ``(K1 c, K2 c)``."""
        return self.K1 * self.c, self.K2 * self.c

    @property
    def area(self) -> float:
        return cat.area(self.c, -self.y_bar, self.y_bar)


def _orth_cross(domain, c, y):
    point, tangent, _ = cat.meridian(c, y)
    n = domain.outward_normal(point[..., 0], point[..., 1])
    return tangent[..., 0] * n[..., 1] - tangent[..., 1] * n[..., 0]


def _placement_equations(domain, c, y):
    point, _, _ = cat.meridian(c, y)
    return np.array([domain.phi(point[0], point[1]), _orth_cross(domain, c, y)])


def orthogonality_residual(domain, c: float, y: float) -> float:
    """``|<catenoid meridian tangent, boundary meridian tangent>|``.

    The boundary tangent is taken at the closest boundary point to ``c Y(y)``;
    the result vanishes exactly at an orthogonal intersection.
    """
    point, tangent, _ = cat.meridian(c, y)
    q, _ = domain.nearest_boundary_point(point[..., 0], point[..., 1])
    n = domain.outward_normal(q[..., 0], q[..., 1])
    bt = np.stack([-n[..., 1], n[..., 0]], axis=-1)
    return float(np.abs(np.sum(tangent * bt, axis=-1)))


def _initial_guess(domain):
    ys = np.linspace(1e-3, 30.0, 30001)
    cross = _orth_cross(domain, 1.0, ys)
    idx = np.nonzero(np.sign(cross[:-1]) != np.sign(cross[1:]))[0]
    if idx.size == 0:
        raise NoCriticalCatenoidError("no orthogonal intersection along the catenoid family")
    y0 = ys[idx[0]]
    s = np.sqrt(1 + y0 * y0)
    c0 = 1.0 / np.sqrt((s / domain.a) ** 2 + (np.arcsinh(y0) / domain.b) ** 2)
    return c0, y0


def critical_placement(domain, guess=None, tol: float = 1e-13, max_iter: int = 50) -> CriticalPlacement:
    """Solve for ``(c, y_bar)``: the point ``c Y(y_bar)`` lies on the boundary
    and the catenoid meets it orthogonally.

    Two-dimensional Newton with a central-difference Jacobian.  Raises
    :class:`NoCriticalCatenoidError` when the iteration fails or the piece
    leaves the container before reaching ``y_bar``.
    """
    c, y = guess if guess is not None else _initial_guess(domain)
    x = np.array([c, y], dtype=float)
    for it in range(max_iter):
        F = _placement_equations(domain, *x)
        if np.max(np.abs(F)) < tol:
            break
        J = np.empty((2, 2))
        for k in range(2):
            step = 1e-6 * max(abs(x[k]), 1.0)
            e = np.zeros(2)
            e[k] = step
            J[:, k] = (_placement_equations(domain, *(x + e)) - _placement_equations(domain, *(x - e))) / (2 * step)
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise NoCriticalCatenoidError("singular placement Jacobian") from exc
        lam = 1.0
        while lam > 1e-4:
            trial = x + lam * dx
            if trial[0] > 0 and trial[1] > 0 and np.max(np.abs(_placement_equations(domain, *trial))) < np.max(np.abs(F)):
                break
            lam *= 0.5
        x = x + lam * dx
    F = _placement_equations(domain, *x)
    if not np.all(np.isfinite(F)) or np.max(np.abs(F)) > 1e3 * tol or x[0] <= 0 or x[1] <= 0:
        raise NoCriticalCatenoidError(f"placement Newton did not converge (residual {np.max(np.abs(F)):.2e})")
    c, y_bar = float(x[0]), float(x[1])

    inner = np.linspace(-y_bar, y_bar, 2001)[1:-1]
    pts, _, _ = cat.meridian(c, inner)
    if np.any(domain.phi(pts[:, 0], pts[:, 1]) >= 0):
        raise NoCriticalCatenoidError("catenoid piece leaves the container")

    upper = boundary_curvature(domain, c, y_bar, end=+1)
    lower = boundary_curvature(domain, c, -y_bar, end=-1)
    residuals = {
        "phi": float(abs(F[0])),
        "orthogonality": orthogonality_residual(domain, c, y_bar),
        "z2_identity": float(cat.jacobi_fields(y_bar).z2 - (domain.b**2 / domain.a**2 - 1.0)),
        "iterations": it,
    }
    logger.debug("critical placement c=%.15g y_bar=%.15g %s", c, y_bar, residuals)
    return CriticalPlacement(
        domain=domain, c=c, y_bar=y_bar, K1=lower.K, K2=upper.K,
        I=0.5 * (lower.I + upper.I), m1=0.5 * (lower.m1 + upper.m1), residuals=residuals,
    )


def _solve_G(domain, c, y_foot, z):
    """Parameter G(z) where the Fermi line at offset z crosses the boundary."""
    G = float(y_foot)
    for _ in range(60):
        point, tangent, normal = cat.meridian(c, G)
        X = point + z * normal
        val = domain.phi(X[0], X[1])
        dX = tangent * (c + z / (1.0 + G * G))
        d = float(np.dot(domain.grad_phi(X[0], X[1]), dX))
        step = val / d
        G -= step
        if abs(step) < 1e-16 * max(1.0, abs(G)):
            break
    return G


def _fermi_point(c, G, z):
    point, _, normal = cat.meridian(c, G)
    return point + z * normal


def boundary_curvature(domain, c: float, y_foot: float, end: int = +1, h: float | None = None) -> BoundaryData:
    """Curvature data of the boundary at the circle ``c Y(y_foot)``.

    ``G(z)`` is defined implicitly by ``Phi(c Y(G) + z nu(G)) = 0``; its first
    two derivatives at 0 come from Richardson-extrapolated central differences.
    ``end`` is +1 for the upper circle (inward direction -y) and -1 for the
    lower one.
    """
    point, _, _ = cat.meridian(c, y_foot)
    if abs(domain.phi(point[0], point[1])) > 1e-8:
        raise DomainError("point is not on the container boundary")
    # Below ~1e-3 c roundoff in the second difference dominates; 3e-3 c
    # balances it against the Richardson-cancelled truncation error.
    h = 3e-3 * c if h is None else h

    def derivs(step):
        Gm, G0, Gp = (_solve_G(domain, c, y_foot, k * step) for k in (-1, 0, 1))
        d1 = (Gp - Gm) / (2 * step)
        d2 = (Gp - 2 * G0 + Gm) / step**2
        X = [_fermi_point(c, G, k * step) for G, k in ((Gm, -1), (G0, 0), (Gp, 1))]
        X1 = (X[2] - X[0]) / (2 * step)
        X2 = (X[2] - 2 * X[1] + X[0]) / step**2
        return d1, d2, X1, X2

    a1, a2, aX1, aX2 = derivs(h)
    b1, b2, bX1, bX2 = derivs(h / 2)
    dG = (4 * b1 - a1) / 3
    d2G = (4 * b2 - a2) / 3
    X1 = (4 * bX1 - aX1) / 3
    X2 = (4 * bX2 - aX2) / 3
    n_out = domain.outward_normal(point[0], point[1])
    K = float(-np.dot(X2, n_out) / np.dot(X1, X1))
    I = float(-end * c * d2G)
    m1 = 1.0 / (c * (1.0 + y_foot**2))
    return BoundaryData(K=K, I=I, m1=m1, dG=float(dG), d2G=float(d2G))
