"""Axisymmetric Newton solver for ``alpha^2 Delta u + u - u^3 = 0`` in an
ellipsoid of revolution with homogeneous Neumann data.

The meridian half-ellipse is mapped from the rectangle ``(rho, theta) in
(0, 1) x (0, pi)`` by ``r = a rho sin(theta)``, ``x3 = b rho cos(theta)``.  A
cell-centred finite-volume discretisation of

    Delta u = 1/(r J) d_i (r J g^{ij} d_j u),     J = a b rho,

makes the wall condition exact (zero flux through ``rho = 1``) and the axis and
origin regular (those faces have zero area).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu
from scipy.spatial import cKDTree

from . import catenoid as cat
from .errors import DomainError, EmptyInterfaceError, GridError, NoConvergenceError, ResolutionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MeridianGrid:
    """Boundary-fitted grid of the meridian half-ellipse.

    ``volume`` holds the exact cell integrals of ``r J`` (multiply by 2 pi
    for 3-D volumes).  ``laplacian_flux`` is the assembled flux operator: the
    discrete Laplacian is ``laplacian_flux @ u / volume``.  Wall cells carry
    the outward unit normal of their wall face in ``boundary_normal``.
    """

    domain: object
    n_rho: int
    n_theta: int
    rho: np.ndarray
    theta: np.ndarray
    r: np.ndarray
    x3: np.ndarray
    volume: np.ndarray
    laplacian_flux: sparse.csr_matrix
    fluxes: tuple
    boundary_mask: np.ndarray
    axis_mask: np.ndarray
    boundary_normal: np.ndarray
    spacing: float

    @property
    def shape(self):
        return (self.n_rho, self.n_theta)

    @property
    def size(self):
        return self.n_rho * self.n_theta

    def sample(self, fun):
        """Evaluate ``fun(r, x3)`` at the cell centres (flattened)."""
        return np.asarray(fun(self.r.ravel(), self.x3.ravel()), dtype=float)

    def laplacian(self, u):
        # face differences first, so constants give exactly zero
        div = sum(G.T @ (F @ u) for G, F in self.fluxes)
        return -div / self.volume.ravel()

    def mirror_index(self):
        """Flat index of the cell reflected through ``x3 = 0``."""
        i, j = np.meshgrid(np.arange(self.n_rho), np.arange(self.n_theta), indexing="ij")
        return (i * self.n_theta + (self.n_theta - 1 - j)).ravel()

    def interpolator(self, u):
        """Bilinear interpolant of u in the computational coordinates."""
        interp = RegularGridInterpolator((self.rho, self.theta), u.reshape(self.shape),
                                         bounds_error=False, fill_value=None)
        a, b = self.domain.a, self.domain.b

        def fun(r, x3):
            rho = np.clip(np.hypot(np.asarray(r) / a, np.asarray(x3) / b), self.rho[0], self.rho[-1])
            th = np.clip(np.arctan2(np.asarray(r) / a, np.asarray(x3) / b), self.theta[0], self.theta[-1])
            return interp(np.stack([rho, th], axis=-1))

        return fun


def _coefficients(a, b, rho, th):
    """``r J g^{rho rho}``, ``r J g^{theta theta}`` and ``r J g^{rho theta}``."""
    s, c = np.sin(th), np.cos(th)
    rr = rho * rho * s * (a * a * c * c + b * b * s * s) / b
    tt = s * (a * a * s * s + b * b * c * c) / b
    rt = -rho * s * s * c * (a * a - b * b) / b
    return rr, tt, rt


def grid_resolution(domain, alpha: float, points_per_layer: int = 8) -> int:
    """Radial cell count giving ``points_per_layer`` cells per width ``alpha sqrt 2``."""
    return max(32, int(np.ceil(points_per_layer * max(domain.a, domain.b) / (alpha * np.sqrt(2.0)))))


def build_grid(domain, n: int) -> MeridianGrid:
    """Cell-centred grid with n radial and about ``pi n`` angular cells.

    Away from the origin the Laplacian is second order.  For a != b the
    averaged cross-derivative terms lose consistency in the first few rings
    around the origin (error decaying like ``1 / i^2`` in the ring index);
    the transition layers treated here stay a distance of order c away.
    """
    if n < 32:
        raise GridError("need at least 32 radial cells")
    a, b = float(domain.a), float(domain.b)
    if not (a > 0 and b > 0):
        raise GridError("degenerate mapping")
    nr = int(n)
    nt = int(np.ceil(np.pi * nr))
    dr, dt = 1.0 / nr, np.pi / nt
    rho = (np.arange(nr) + 0.5) * dr
    th = (np.arange(nt) + 0.5) * dt
    RHO, TH = np.meshgrid(rho, th, indexing="ij")
    R = a * RHO * np.sin(TH)
    X3 = b * RHO * np.cos(TH)
    edges_r = np.arange(nr + 1) * dr
    edges_t = np.arange(nt + 1) * dt
    vol = (a * a * b) * np.outer(np.diff(edges_r**3) / 3.0, -np.diff(np.cos(edges_t)))
    N = nr * nt
    idx = np.arange(N).reshape(nr, nt)

    # rho faces between (i, j) and (i+1, j); the wall and the origin carry no flux
    fr_lo, fr_hi = idx[:-1, :].ravel(), idx[1:, :].ravel()
    nfr = fr_lo.size
    Gr = sparse.csr_matrix((np.r_[-np.ones(nfr), np.ones(nfr)], (np.r_[np.arange(nfr), np.arange(nfr)], np.r_[fr_lo, fr_hi])), shape=(nfr, N))
    rho_f, th_f = np.meshgrid(edges_r[1:-1], th, indexing="ij")
    rr_f, _, rt_f = _coefficients(a, b, rho_f.ravel(), th_f.ravel())
    # theta faces between (i, j) and (i, j+1); the axis carries no flux
    ft_lo, ft_hi = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    nft = ft_lo.size
    Gt = sparse.csr_matrix((np.r_[-np.ones(nft), np.ones(nft)], (np.r_[np.arange(nft), np.arange(nft)], np.r_[ft_lo, ft_hi])), shape=(nft, N))
    rho_g, th_g = np.meshgrid(rho, edges_t[1:-1], indexing="ij")
    _, tt_g, rt_g = _coefficients(a, b, rho_g.ravel(), th_g.ravel())

    flux_r = sparse.diags(rr_f * dt / dr) @ Gr
    flux_t = sparse.diags(tt_g * dr / dt) @ Gt
    if a != b:
        Dr, Dt = _centre_derivatives(nr, nt, dr, dt)
        Ar = 0.5 * abs(Gr)
        At = 0.5 * abs(Gt)
        flux_r = flux_r + sparse.diags(rt_f * dt) @ Ar @ Dt
        flux_t = flux_t + sparse.diags(rt_g * dr) @ At @ Dr
    A = (-(Gr.T @ flux_r) - (Gt.T @ flux_t)).tocsr()

    boundary = np.zeros((nr, nt), bool)
    boundary[-1, :] = True
    axis = np.zeros((nr, nt), bool)
    axis[:, [0, -1]] = True
    wall = np.stack([np.sin(th) / a, np.cos(th) / b], axis=-1)
    normal = np.zeros((nr, nt, 2))
    normal[-1] = wall / np.linalg.norm(wall, axis=-1, keepdims=True)
    spacing = max(a, b) * max(dr, dt)
    return MeridianGrid(domain, nr, nt, rho, th, R, X3, vol, A, ((Gr, flux_r.tocsr()), (Gt, flux_t.tocsr())),
                        boundary, axis, normal, spacing)


def _centre_derivatives(nr, nt, dr, dt):
    """Centred d/drho and d/dtheta at cell centres with the symmetry ghosts.

    Across the axis the ghost is the same ring (u even in r); across the
    origin it is the cell reflected to ``pi - theta``.  At the wall d/drho is
    one-sided second order.
    """
    idx = np.arange(nr * nt).reshape(nr, nt)
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(np.broadcast_to(v, r.shape).ravel())

    # theta
    jm = np.r_[0, np.arange(nt - 1)]
    jp = np.r_[np.arange(1, nt), nt - 1]
    add(idx, idx[:, jp], 1 / (2 * dt))
    add(idx, idx[:, jm], -1 / (2 * dt))
    Dt = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nr * nt,) * 2)

    rows, cols, vals = [], [], []
    inner = idx[1:-1]
    add(inner, idx[2:], 1 / (2 * dr))
    add(inner, idx[:-2], -1 / (2 * dr))
    add(idx[0], idx[1], 1 / (2 * dr))
    add(idx[0], idx[0, ::-1], -1 / (2 * dr))
    add(idx[-1], idx[-1], 3 / (2 * dr))
    add(idx[-1], idx[-2], -4 / (2 * dr))
    add(idx[-1], idx[-3], 1 / (2 * dr))
    Dr = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nr * nt,) * 2)
    return Dr, Dt


# Newton -----------------------------------------------------------------------


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one Newton solve; distances in length units."""

    alpha: float
    converged: bool
    iterations: int
    residual: float
    energy: float
    hausdorff: float = float("nan")
    sup_u_minus_U: float = float("nan")
    max_abs_u: float = float("nan")
    history: list = field(default_factory=list)
    energy_history: list = field(default_factory=list)
    n_rho: int = 0
    n_theta: int = 0
    seconds: float = 0.0

    def to_dict(self):
        return dict(self.__dict__)


def discrete_residual(grid: MeridianGrid, u, alpha):
    """Cellwise ``alpha^2 Delta_h u + u - u^3``."""
    return alpha * alpha * grid.laplacian(u) + u - u**3


def _split_residual(grid, s, v, a2, lap_s):
    # u = s + v with s = +-1: f(u) = -(s + v) v (2 s + v) keeps full relative
    # precision deep in the phases, where the tiny polar cells near the origin
    # would otherwise amplify ulp noise of u = 1 into the residual.
    return a2 * (lap_s + grid.laplacian(v)) - (s + v) * v * (2 * s + v)


def newton_solve(grid: MeridianGrid, alpha: float, initial, tol: float = 1e-9, max_iter: int = 15,
                 min_damping: float = 1.0 / 64, check_resolution: bool = True):
    """Damped Newton with backtracking on the max-norm of the residual.

    ``initial`` is an array of cell values or a callable of ``(r, x3)``.
    The unknown is stored as ``u = s + v`` with s the sign of the initial
    field.  Returns ``(u, SolveReport)``; raises :class:`NoConvergenceError`
    (with the residual history) on stagnation.
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if check_resolution and grid.spacing > alpha * np.sqrt(2.0) / 8 * (1 + 1e-12):
        need = grid_resolution(grid.domain, alpha)
        raise ResolutionError(f"grid spacing {grid.spacing:.4g} exceeds alpha*sqrt(2)/8; use n >= {need}")
    start = time.perf_counter()
    u0 = grid.sample(initial) if callable(initial) else np.array(initial, dtype=float).ravel()
    if u0.size != grid.size:
        raise DomainError("initial field does not match the grid")
    V = grid.volume.ravel()
    A = grid.laplacian_flux
    a2 = alpha * alpha
    s = np.where(u0 >= 0, 1.0, -1.0)
    v = u0 - s
    lap_s = grid.laplacian(s)
    R = _split_residual(grid, s, v, a2, lap_s)
    res = float(np.max(np.abs(R)))
    history = [res]
    energies = [energy(grid, s + v, alpha)]
    it = 0
    while res >= tol:
        if it >= max_iter:
            raise NoConvergenceError(f"Newton did not reach {tol:g} in {max_iter} iterations", history)
        u = s + v
        J = (a2 * A + sparse.diags(V * (1 - 3 * u * u))).tocsc()
        step = splu(J).solve(-R * V)
        lam = 1.0
        while True:
            trial = v + lam * step
            Rt = _split_residual(grid, s, trial, a2, lap_s)
            rt = float(np.max(np.abs(Rt)))
            if rt < res or lam <= min_damping:
                break
            lam *= 0.5
        if rt >= res:
            raise NoConvergenceError("line search failed to decrease the residual", history + [rt])
        v, R, res = trial, Rt, rt
        it += 1
        history.append(res)
        energies.append(energy(grid, s + v, alpha))
        logger.info("newton alpha=%g it=%d residual=%.3e damping=%g", alpha, it, res, lam)
    u = s + v
    report = SolveReport(alpha=alpha, converged=True, iterations=it, residual=res, energy=energies[-1],
                         max_abs_u=float(np.max(np.abs(u))), history=history, energy_history=energies,
                         n_rho=grid.n_rho, n_theta=grid.n_theta, seconds=time.perf_counter() - start)
    return u, report


def energy(grid: MeridianGrid, u, alpha: float) -> float:
    """``J = int (alpha/2)|grad u|^2 + (1 - u^2)^2 / (4 alpha)`` over the 3-D body."""
    u = np.asarray(u, dtype=float).ravel()
    grad2 = -float(u @ (grid.laplacian(u) * grid.volume.ravel()))
    pot = float(np.sum(grid.volume.ravel() * (1 - u * u) ** 2))
    return 2 * np.pi * (0.5 * alpha * grad2 + pot / (4 * alpha))


# interface --------------------------------------------------------------------


def zero_level_set(grid: MeridianGrid, u) -> np.ndarray:
    """Points where the linear interpolant of u vanishes along grid edges."""
    U = np.asarray(u, dtype=float).reshape(grid.shape)
    pts = []
    for axis in (0, 1):
        lo = [slice(None), slice(None)]
        hi = [slice(None), slice(None)]
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        u0, u1 = U[tuple(lo)], U[tuple(hi)]
        cross = (u0 * u1 < 0) | ((u0 == 0) & (u1 != 0))
        if not cross.any():
            continue
        s = u0[cross] / (u0[cross] - u1[cross])
        r0, r1 = grid.r[tuple(lo)][cross], grid.r[tuple(hi)][cross]
        z0, z1 = grid.x3[tuple(lo)][cross], grid.x3[tuple(hi)][cross]
        pts.append(np.stack([r0 + s * (r1 - r0), z0 + s * (z1 - z0)], axis=-1))
    if not pts:
        raise EmptyInterfaceError("field has no sign change")
    return np.concatenate(pts)


def hausdorff_to_catenoid(points, placement, samples: int = 4001) -> float:
    """Two-sided Hausdorff distance between a point set and the placed piece."""
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        raise EmptyInterfaceError("no interface points")
    c, yb = placement.c, placement.y_bar
    ys = np.linspace(-yb, yb, samples)
    curve, _, _ = cat.meridian(c, ys)
    # point -> piece: Fermi distance when the foot is inside, else the end circle
    y, z, ok = cat.fermi_invert_meridian(c, points[:, 0], points[:, 1], raise_on_failure=False)
    ends = np.array([curve[0], curve[-1]])
    d_end = np.min(np.linalg.norm(points[:, None, :] - ends[None], axis=-1), axis=1)
    d_curve = cKDTree(curve).query(points)[0]
    d1 = np.where(ok & (np.abs(y) <= yb), np.minimum(np.abs(z), d_curve), np.minimum(d_end, d_curve))
    d2 = cKDTree(points).query(curve)[0]
    return float(max(np.max(d1), np.max(d2)))


# continuation -----------------------------------------------------------------


@dataclass(frozen=True)
class ContinuationConfig:
    with_psi1: bool = True
    with_reduced_h: bool = True
    seed: str = "approximation"
    points_per_layer: int = 8
    tol: float = 1e-9
    max_iter: int = 15
    limit_energy: float | None = None


@dataclass
class ContinuationRow:
    alpha: float
    report: SolveReport | None
    energy_gap: float = float("nan")
    error: str = ""
    grid: MeridianGrid | None = field(default=None, repr=False)
    u: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        out = {"alpha": self.alpha, "energy_gap": self.energy_gap, "error": self.error,
               "converged": self.report is not None and self.report.converged}
        if self.report is not None:
            out.update({k: v for k, v in self.report.to_dict().items() if k != "alpha"})
        return out


def solve_alpha(placement, alpha: float, config: ContinuationConfig = ContinuationConfig(), previous=None):
    """One member of a continuation: grid, approximation, Newton, diagnostics."""
    from . import approx, jacobi, profile

    domain = placement.domain
    grid = build_grid(domain, grid_resolution(domain, alpha, config.points_per_layer))
    h = None
    if config.with_reduced_h:
        h = jacobi.solve_reduced_h(placement, alpha, profile.compute_constants())
    U = approx.build_approximation(approx.ApproximationSpec(alpha, placement, h, config.with_psi1))
    Uh = grid.sample(U)
    if config.seed == "previous" and previous is not None:
        initial = grid.sample(previous)
    elif config.seed in ("approximation", "previous"):
        initial = Uh
    else:
        raise DomainError(f"unknown seed {config.seed!r}")
    u, rep = newton_solve(grid, alpha, initial, tol=config.tol, max_iter=config.max_iter)
    pts = zero_level_set(grid, u)
    rep = SolveReport(**{**rep.to_dict(), "hausdorff": hausdorff_to_catenoid(pts, placement),
                         "sup_u_minus_U": float(np.max(np.abs(u - Uh)))})
    return grid, u, rep


def limit_energy(placement) -> float:
    """``Area(M) * sigma0`` of the placed piece."""
    from .profile import C0_EXACT

    return placement.area * C0_EXACT


def continuation_study(domain, alphas, config: ContinuationConfig = ContinuationConfig(), placement=None):
    """Solve for each alpha (descending); failures become marked rows."""
    from .domain import critical_placement

    alphas = [float(a) for a in alphas]
    if any(x <= y for x, y in zip(alphas, alphas[1:])):
        raise DomainError("alpha list must be strictly descending")
    placement = placement or critical_placement(domain)
    E0 = config.limit_energy if config.limit_energy is not None else limit_energy(placement)
    rows = []
    previous = None
    for a in alphas:
        try:
            grid, u, rep = solve_alpha(placement, a, config, previous)
            previous = grid.interpolator(u)
            rows.append(ContinuationRow(a, rep, abs(rep.energy - E0), grid=grid, u=u))
        except (NoConvergenceError, ResolutionError, EmptyInterfaceError, GridError) as exc:
            logger.warning("alpha=%g failed: %s", a, exc)
            rows.append(ContinuationRow(a, None, error=str(exc)))
    return rows
