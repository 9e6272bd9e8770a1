"""Layered approximate solution around a critical catenoid and its residual.

Inside the tube ``|z| < eta`` of the placed catenoid the approximation is

    U = w(t) + alpha^2 |A|^2 psi1(t),    t = (z - alpha h(y)) / alpha,

blended by a quintic smoothstep into the phases ``+1`` on S+ (axis side) and
``-1`` on S-.  h is the main-order displacement in layer units.  Everything is
evaluated on the meridian half-plane ``(r, x3)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import catenoid as cat
from . import profile
from .domain import CriticalPlacement
from .errors import DomainError, ResolutionError

logger = logging.getLogger(__name__)


def smoothstep(x):
    """Quintic ramp from 0 (x <= 0) to 1 (x >= 1) with two matching derivatives."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x * x)


@dataclass(frozen=True)
class ApproximationSpec:
    """Parameters of the layered approximation.

    ``h`` is a :class:`~catenoid_ac.jacobi.ReducedH` (or any callable of y
    with a ``derivatives`` keyword) or None for the unshifted layer.
    """

    alpha: float
    placement: CriticalPlacement
    h: object = None
    with_psi1: bool = True
    eta: float | None = None
    delta: float | None = None
    orientation: int = 1
    sigma: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")
        c = self.placement.c
        if self.eta is None:
            object.__setattr__(self, "eta", 0.5 * c)
        if self.delta is None:
            object.__setattr__(self, "delta", 0.25 * c)
        if not 0 < self.eta <= 0.5 * c:
            raise DomainError("eta must lie in (0, c/2], below half the focal radius")
        if self.orientation not in (1, -1):
            raise DomainError("orientation must be +1 or -1")
        if not 0 < self.sigma < profile.SQRT2:
            raise DomainError("sigma must lie in (0, sqrt(2))")

    @property
    def c(self):
        return self.placement.c

    def with_alpha(self, alpha, h=None):
        return ApproximationSpec(alpha, self.placement, h, self.with_psi1, self.eta, self.delta,
                                 self.orientation, self.sigma)


class Approximation:
    """Pure evaluator of U on the meridian half-plane (and in 3-D)."""

    def __init__(self, spec: ApproximationSpec):
        self.spec = spec
        self._psi1 = profile.solve_psi1() if spec.with_psi1 else None

    def shift(self, y):
        if self.spec.h is None:
            return np.zeros_like(np.asarray(y, dtype=float))
        return np.asarray(self.spec.h(y), dtype=float)

    def layer(self, y, z):
        """Inner expansion in Fermi coordinates (no cutoff)."""
        a = self.spec.alpha
        t = (z - a * self.shift(y)) / a
        u = profile.eval_w(t)[0]
        if self._psi1 is not None:
            A2 = 2.0 / (self.spec.c**2 * (1.0 + y * y) ** 2)
            u = u + a * a * A2 * self._psi1(t)
        return self.spec.orientation * u

    def layer_derivatives(self, y, z):
        """``(U, dU/dz, d2U/dz2)`` of the inner expansion."""
        a = self.spec.alpha
        t = (z - a * self.shift(y)) / a
        w, wp, wpp = profile.eval_w(t)
        u, du, d2u = w, wp / a, wpp / a**2
        if self._psi1 is not None:
            A2 = 2.0 / (self.spec.c**2 * (1.0 + y * y) ** 2)
            p, dp, d2p = self._psi1(t, derivatives=True)
            u = u + a * a * A2 * p
            du = du + a * A2 * dp
            d2u = d2u + A2 * d2p
        o = self.spec.orientation
        return o * u, o * du, o * d2u

    def phase(self, r, x3):
        """+1 on S+ and -1 on S- (times the orientation)."""
        c = self.spec.c
        inside = np.asarray(r) < c * np.cosh(np.clip(np.asarray(x3) / c, -700, 700))
        return self.spec.orientation * np.where(inside, 1.0, -1.0)

    def fermi(self, r, x3):
        r, x3 = np.broadcast_arrays(np.asarray(r, float), np.asarray(x3, float))
        y, z, ok = cat.fermi_invert_meridian(self.spec.c, r, x3, raise_on_failure=False)
        return y, z, ok & (np.abs(z) < self.spec.eta)

    def __call__(self, r, x3):
        r, x3 = np.broadcast_arrays(np.asarray(r, float), np.asarray(x3, float))
        out = np.array(self.phase(r, x3), dtype=float)
        y, z, tube = self.fermi(r, x3)
        if tube.any():
            eta = self.spec.eta
            beta = 1.0 - smoothstep((np.abs(z[tube]) - 0.5 * eta) / (0.5 * eta))
            out = out.copy()
            out[tube] = beta * self.layer(y[tube], z[tube]) + (1.0 - beta) * out[tube]
        return out if out.ndim else float(out)

    def evaluate_3d(self, points):
        p = np.asarray(points, dtype=float)
        return self(np.hypot(p[..., 0], p[..., 1]), p[..., 2])


def build_approximation(spec: ApproximationSpec) -> Approximation:
    return Approximation(spec)


# residual --------------------------------------------------------------------


def axisym_laplacian(fun, r, x3, step):
    """Five-point axisymmetric Laplacian ``u_rr + u_r / r + u_zz`` of a callable.

    Points with ``r < step`` use the regular closure ``2 u_rr + u_zz`` with the
    even reflection ``u(-r) = u(r)``.
    """
    r, x3 = np.broadcast_arrays(np.asarray(r, float), np.asarray(x3, float))
    u0 = fun(r, x3)
    ue, uw = fun(r + step, x3), fun(np.abs(r - step), x3)
    un, us = fun(r, x3 + step), fun(r, x3 - step)
    zz = (un - 2 * u0 + us) / step**2
    rr = (ue - 2 * u0 + uw) / step**2
    axis = r < step
    safe_r = np.where(axis, 1.0, r)
    # on the axis u_r / r -> u_rr, and u_rr ~ 2 (u(step) - u(0)) / step^2
    radial = np.where(axis, 4 * (fun(np.full_like(r, step), x3) - u0) / step**2,
                      rr + (ue - uw) / (2 * step * safe_r))
    return radial + zz


def richardson_laplacian(fun, r, x3, step):
    """Richardson combination of the stencil at ``step`` and ``step / 2``."""
    return (4 * axisym_laplacian(fun, r, x3, step / 2) - axisym_laplacian(fun, r, x3, step)) / 3


@dataclass(frozen=True)
class MeridianField:
    """Samples ``values`` at meridian points with named boolean masks."""

    r: np.ndarray
    x3: np.ndarray
    values: np.ndarray
    masks: dict = field(default_factory=dict)
    aux: dict = field(default_factory=dict)

    def to_rows(self):
        return np.column_stack([self.r, self.x3, self.values])


@dataclass(frozen=True)
class ResidualReport:
    """Residual norms of one approximation.

    ``neumann_sup`` is in rescaled units, ``alpha * sup |dU/dn|`` on the
    boundary strip ``|z| <= eta/2``.  ``neumann_even`` is the sup over the
    boundary circles of the ``w'``-component of that error, the part the
    displacement h is built to cancel.
    """

    alpha: float
    interior_sup: float
    weighted_sup: float
    neumann_sup: float
    neumann_even: float
    n_interior: int
    step: float
    oracle_gap: float = float("nan")

    def to_dict(self):
        return dict(self.__dict__)


def _probe_points(spec: ApproximationSpec, spacing):
    c = spec.c
    y_bar = spec.placement.y_bar
    half = 0.5 * spec.eta
    ny = max(int(np.ceil(2 * y_bar * c / (4 * spacing))), 41)
    nz = 2 * int(np.ceil(half / spacing)) + 1
    Y, Z = np.meshgrid(np.linspace(-y_bar, y_bar, ny), np.linspace(-half, half, nz), indexing="ij")
    point, _, normal = cat.meridian(c, Y.ravel())
    P = point + Z.ravel()[:, None] * normal
    return Y.ravel(), Z.ravel(), P[:, 0], P[:, 1]


def residual_field(spec: ApproximationSpec, step: float | None = None, spacing: float | None = None,
                   approximation: Approximation | None = None) -> MeridianField:
    """``S(U) = alpha^2 Delta U + U - U^3`` at probe points of the tube.

    Probes lie on a Fermi lattice over ``|y| <= y_bar``, ``|z| <= eta/2`` with
    z-spacing ``spacing`` (default alpha/8); the Laplacian stencil uses
    ``step`` (default alpha/16) and its half, Richardson-combined.
    """
    a = spec.alpha
    step = a / 16 if step is None else step
    spacing = a / 8 if spacing is None else spacing
    if step > a / 8 or spacing > a / 8:
        raise ResolutionError(f"spacing must be at most alpha/8 = {a / 8:.4g} to resolve the layer")
    U = approximation or build_approximation(spec)
    y, z, r, x3 = _probe_points(spec, spacing)
    dom = spec.placement.domain
    _, dist = dom.nearest_boundary_point(r, x3)
    collar = 4 * a * abs(np.log(a))
    u = U(r, x3)
    S = a * a * richardson_laplacian(U, r, x3, step) + u - u**3
    inside = dist > 0
    interior = inside & (np.abs(z) <= 0.5 * spec.eta) & (dist > collar)
    t = (z - a * U.shift(y)) / a
    return MeridianField(r=r, x3=x3, values=S,
                         masks={"inside": inside, "interior": interior, "tube": np.abs(z) <= 0.5 * spec.eta},
                         aux={"y": y, "z": z, "t": t, "step": step})


def fermi_oracle(spec: ApproximationSpec, y, z, approximation: Approximation | None = None, dy: float = 1e-3):
    """Fermi-expansion prediction of ``alpha^2 Delta U`` for the inner layer.

    ``alpha^2 (U_zz - |A|^2 z U_z + Delta_M U)`` with the surface Laplacian of
    the y-dependence taken by central differences at fixed z.
    """
    U = approximation or build_approximation(spec)
    a, c = spec.alpha, spec.c
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    u, uz, uzz = U.layer_derivatives(y, z)
    A2 = 2.0 / (c * c * (1 + y * y) ** 2)

    def lap_m(d):
        up, um = U.layer(y + d, z), U.layer(y - d, z)
        d2 = (up - 2 * u + um) / d**2
        d1 = (up - um) / (2 * d)
        return (d2 + y / (1 + y * y) * d1) / c**2

    lm = (4 * lap_m(dy / 2) - lap_m(dy)) / 3
    return a * a * (uzz - A2 * z * uz + lm)


def neumann_error(spec: ApproximationSpec, approximation: Approximation | None = None, n: int = 201,
                  eps: float | None = None):
    """Rescaled Neumann error ``alpha dU/dn`` along the container wall.

    Samples the wall near both boundary circles (``|z| <= eta/2``) and returns
    ``(sup, even_sup, samples)`` where ``even_sup`` is the largest
    ``|<err, w'(t)>| / ||w'||^2`` over the two circles.
    """
    U = approximation or build_approximation(spec)
    a, c = spec.alpha, spec.c
    dom = spec.placement.domain
    eps = a / 64 if eps is None else eps
    sup = 0.0
    even = 0.0
    samples = []
    for sgn in (1, -1):
        y_bar = sgn * spec.placement.y_bar
        base, _, normal = cat.meridian(c, y_bar)
        zs = np.linspace(-0.5 * spec.eta, 0.5 * spec.eta, n)
        pts = base[None, :] + zs[:, None] * normal[None, :]
        q, _ = dom.nearest_boundary_point(pts[:, 0], pts[:, 1])
        nrm = dom.outward_normal(q[:, 0], q[:, 1])

        def dn(e):
            up = U(q[:, 0] + e * nrm[:, 0], q[:, 1] + e * nrm[:, 1])
            um = U(q[:, 0] - e * nrm[:, 0], q[:, 1] - e * nrm[:, 1])
            return (up - um) / (2 * e)

        err = a * (4 * dn(eps / 2) - dn(eps)) / 3
        yq, zq, _ = U.fermi(q[:, 0], q[:, 1])
        t = (zq - a * U.shift(yq)) / a
        wp = profile.eval_w(t)[1]
        coeff = np.trapezoid(err * wp, t) / np.trapezoid(wp * wp, t)
        sup = max(sup, float(np.max(np.abs(err))))
        even = max(even, abs(float(coeff)))
        samples.append((q, err))
    return sup, even, samples


def residual_report(spec: ApproximationSpec, oracle_probes: int = 0, seed: int = 0) -> ResidualReport:
    U = build_approximation(spec)
    fld = residual_field(spec, approximation=U)
    m = fld.masks["interior"]
    if not m.any():
        raise ResolutionError("interior mask is empty; alpha too large for the boundary collar")
    S = fld.values[m]
    t = fld.aux["t"][m]
    nsup, neven, _ = neumann_error(spec, approximation=U)
    gap = float("nan")
    if oracle_probes:
        rng = np.random.default_rng(seed)
        idx = rng.choice(np.flatnonzero(m), size=min(oracle_probes, int(m.sum())), replace=False)
        pred = fermi_oracle(spec, fld.aux["y"][idx], fld.aux["z"][idx], approximation=U)
        fd = spec.alpha**2 * richardson_laplacian(U, fld.r[idx], fld.x3[idx], fld.aux["step"])
        gap = float(np.max(np.abs(fd - pred)))
    return ResidualReport(
        alpha=spec.alpha,
        interior_sup=float(np.max(np.abs(S))),
        weighted_sup=float(np.max(np.exp(spec.sigma * np.abs(t)) * np.abs(S))),
        neumann_sup=nsup, neumann_even=neven,
        n_interior=int(m.sum()), step=float(fld.aux["step"]), oracle_gap=gap,
    )


@dataclass(frozen=True)
class ResidualOrders:
    alphas: list
    reports: list
    interior_slope: float
    neumann_slope: float
    monotone: bool

    def to_dict(self):
        return {
            "alphas": list(self.alphas),
            "interior_slope": self.interior_slope,
            "neumann_slope": self.neumann_slope,
            "monotone": self.monotone,
            "reports": [r.to_dict() for r in self.reports],
        }


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def residual_orders(spec: ApproximationSpec, alphas, h_factory=None) -> ResidualOrders:
    """Fit ``log sup|S|`` and ``log neumann`` against ``log alpha``.

    ``h_factory(alpha)`` supplies the displacement for each alpha (None keeps
    ``spec.h``).
    """
    alphas = sorted((float(a) for a in alphas), reverse=True)
    if len(alphas) < 3:
        raise DomainError("need at least three alpha values")
    reports = []
    for a in alphas:
        h = h_factory(a) if h_factory is not None else spec.h
        reports.append(residual_report(spec.with_alpha(a, h)))
    interior = [r.interior_sup for r in reports]
    neumann = [r.neumann_sup for r in reports]
    monotone = all(x > y for x, y in zip(interior, interior[1:]))
    if not monotone:
        logger.warning("interior residual is not monotone in alpha: %s", interior)
    return ResidualOrders(alphas, reports, loglog_slope(alphas, interior), loglog_slope(alphas, neumann), monotone)
