"""Jacobi operator of the catenoid piece with Robin boundary conditions.

Everything here lives in the unit chart (y is the arclength of the unit
profile), so operators and Robin coefficients are chart-scaled: the physical
Jacobi operator is ``L / c^2`` and a physical coefficient K becomes ``K c``.
The Fourier mode m of ``h(y) e^{i m theta}`` reduces the operator to

    L_m h = h'' + y/(1+y^2) h' + (2/(1+y^2)^2 - m^2/(1+y^2)) h.

Boundary conditions on ``[y1, y2]`` use the inward conormal, so they read
``h'(y1) + k1 h(y1) = g1`` and ``-h'(y2) + k2 h(y2) = g2``; positive k is a
convex container.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import splu

from . import catenoid as cat
from .errors import DegenerateProblemError, DomainError, NumericalStabilityError

logger = logging.getLogger(__name__)

#: |lambda| below this after extrapolation counts as a zero eigenvalue.
ZERO_TOL = 1e-8

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def mode_potential(m, y):
    s2 = 1.0 + np.asarray(y, dtype=float) ** 2
    return 2.0 / s2**2 - m * m / s2


def mode_operator(m: int, y):
    """Coefficients ``(a2, a1, a0)`` of ``L_m = a2 d^2 + a1 d + a0``."""
    if m < 0:
        raise DomainError("mode must be non-negative")
    y = np.asarray(y, dtype=float)
    return np.ones_like(y), y / (1.0 + y * y), mode_potential(m, y)


def apply_mode_operator(m, y, h, dh, d2h):
    a2, a1, a0 = mode_operator(m, y)
    return a2 * d2h + a1 * dh + a0 * h


def _boundary_matrix(y1, y2, k1, k2):
    lo = cat.jacobi_fields(y1)
    hi = cat.jacobi_fields(y2)
    return np.array([
        [lo.dz1 + k1 * lo.z1, lo.dz2 + k1 * lo.z2],
        [hi.dz1 - k2 * hi.z1, hi.dz2 - k2 * hi.z2],
    ])


def nondeg_determinant(y1: float, y2: float, K1c: float, K2c: float) -> float:
    """Determinant of the Robin conditions applied to ``(z1, z2)``.

    Rows are ``z'(y1) + K1 z(y1)`` and ``z'(y2) - K2 z(y2)``; zero exactly when
    the mode-0 Robin problem has a kernel.
    """
    return float(np.linalg.det(_boundary_matrix(y1, y2, K1c, K2c)))


@dataclass(frozen=True)
class RobinProblem:
    """``L_m h = f`` on ``[y1, y2]`` with chart-scaled Robin data.

    ``f`` is a callable of y (or None for zero).
    """

    y1: float
    y2: float
    m: int = 0
    kappa1: float = 0.0
    kappa2: float = 0.0
    f: Callable | None = None
    g1: float = 0.0
    g2: float = 0.0

    def __post_init__(self):
        if not self.y1 < self.y2:
            raise DomainError("need y1 < y2")
        if self.m < 0 or int(self.m) != self.m:
            raise DomainError("mode must be a non-negative integer")

    def rhs(self, y):
        y = np.asarray(y, dtype=float)
        return np.zeros_like(y) if self.f is None else np.asarray(self.f(y), dtype=float) * np.ones_like(y)


@dataclass(frozen=True)
class RobinSolution:
    y: np.ndarray
    h: np.ndarray
    dh: np.ndarray
    method: str
    coefficients: tuple | None = None

    def star_norm(self) -> float:
        """``sup|h| + sup|h'| + sup|h''|`` on the sample grid."""
        d2h = np.gradient(self.dh, self.y, edge_order=2)
        return float(np.max(np.abs(self.h)) + np.max(np.abs(self.dh)) + np.max(np.abs(d2h)))


def _cumulative_gl(fun, y):
    """Cumulative integral of ``fun`` on the grid y, 8-point Gauss per cell."""
    left, right = y[:-1], y[1:]
    half = 0.5 * (right - left)
    x = 0.5 * (left + right)[:, None] + half[:, None] * _GL_X[None, :]
    cell = half * (fun(x) @ _GL_W)
    return np.concatenate([[0.0], np.cumsum(cell)])


def _solve_fundamental(problem: RobinProblem, n: int) -> RobinSolution:
    if problem.m != 0:
        raise DomainError("the fundamental system covers mode 0 only")
    y1, y2, k1, k2 = problem.y1, problem.y2, problem.kappa1, problem.kappa2
    M = _boundary_matrix(y1, y2, k1, k2)
    det = np.linalg.det(M)
    if abs(det) < 1e-12 * max(1.0, np.max(np.abs(M)) ** 2):
        raise DegenerateProblemError(f"Robin problem is degenerate (det = {det:.3e})")
    y = np.linspace(y1, y2, n + 1)
    # 1/W = sqrt(1+y^2) for the pair (z1, z2).
    I1 = _cumulative_gl(lambda s: cat.jacobi_fields(s).z1 * problem.rhs(s) * np.sqrt(1 + s * s), y)
    I2 = _cumulative_gl(lambda s: cat.jacobi_fields(s).z2 * problem.rhs(s) * np.sqrt(1 + s * s), y)
    J = cat.jacobi_fields(y)
    hp = J.z2 * I1 - J.z1 * I2
    dhp = J.dz2 * I1 - J.dz1 * I2
    rhs = np.array([problem.g1, problem.g2 - (-dhp[-1] + k2 * hp[-1])])
    A, B = np.linalg.solve(_robin_rows(M), rhs)
    h = hp + A * J.z1 + B * J.z2
    dh = dhp + A * J.dz1 + B * J.dz2
    return RobinSolution(y=y, h=h, dh=dh, method="fundamental", coefficients=(float(A), float(B)))


def _robin_rows(M):
    # nondeg_determinant uses z' - k z at y2; the boundary operator is -z' + k z.
    return np.array([M[0], -M[1]])


def _fd_matrix(y1, y2, n, m, k1, k2):
    y = np.linspace(y1, y2, n + 1)
    d = y[1] - y[0]
    a2, a1, a0 = mode_operator(m, y)
    lower = a2 / d**2 - a1 / (2 * d)
    diag = -2 * a2 / d**2 + a0
    upper = a2 / d**2 + a1 / (2 * d)
    rows, cols, vals = [], [], []
    for off, v in ((-1, lower), (0, diag), (1, upper)):
        j = np.arange(1, n)
        rows.append(j)
        cols.append(j + off)
        vals.append(v[1:n])
    rows += [np.zeros(3, int), np.full(3, n)]
    cols += [np.array([0, 1, 2]), np.array([n, n - 1, n - 2])]
    vals += [np.array([-3 / (2 * d) + k1, 4 / (2 * d), -1 / (2 * d)]),
             np.array([-3 / (2 * d) + k2, 4 / (2 * d), -1 / (2 * d)])]
    A = sparse.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n + 1, n + 1))
    return y, A


def _solve_fd(problem: RobinProblem, n: int) -> RobinSolution:
    if problem.m == 0:
        det = nondeg_determinant(problem.y1, problem.y2, problem.kappa1, problem.kappa2)
        if abs(det) < 1e-12:
            raise DegenerateProblemError(f"Robin problem is degenerate (det = {det:.3e})")
    y, A = _fd_matrix(problem.y1, problem.y2, n, problem.m, problem.kappa1, problem.kappa2)
    b = problem.rhs(y)
    b[0], b[-1] = problem.g1, problem.g2
    try:
        h = splu(A).solve(b)
    except RuntimeError as exc:
        raise DegenerateProblemError("finite-difference Robin matrix is singular") from exc
    if not np.all(np.isfinite(h)):
        raise DegenerateProblemError("finite-difference Robin matrix is singular")
    return RobinSolution(y=y, h=h, dh=np.gradient(h, y, edge_order=2), method="fd")


def solve_robin(problem: RobinProblem, n: int = 800, method: str = "fd") -> RobinSolution:
    """Solve the Robin problem by ``"fd"`` (any mode) or ``"fundamental"``.

    The fundamental-system path is mode 0 only: variation of parameters on
    ``(z1, z2)`` with cellwise Gauss quadrature, so its error is at quadrature
    level and it serves as the reference for the second-order FD path.
    """
    if n < 4:
        raise DomainError("need at least 4 intervals")
    if method == "fd":
        return _solve_fd(problem, n)
    if method == "fundamental":
        return _solve_fundamental(problem, n)
    raise DomainError(f"unknown method {method!r}")


# spectrum --------------------------------------------------------------------


def _weighted_tridiagonal(y1, y2, n, m, k1, k2):
    """Symmetric tridiagonal form of ``-Q`` relative to the lumped weighted mass.

    P1 elements in the self-adjoint form ``(p h')' + p q h = lambda p h`` with
    ``p = sqrt(1+y^2)``; the stiffness uses the exact cell integral of p and
    mass and potential are lumped by the trapezoid rule.
    """
    y = np.linspace(y1, y2, n + 1)
    d = y[1] - y[0]
    P = 0.5 * (y * np.sqrt(1 + y * y) + np.arcsinh(y))
    pbar = np.diff(P) / d
    p = np.sqrt(1 + y * y)
    w = np.full(n + 1, d)
    w[0] = w[-1] = 0.5 * d
    mass = p * w
    diag = np.zeros(n + 1)
    diag[:-1] += pbar / d
    diag[1:] += pbar / d
    diag -= p * mode_potential(m, y) * w
    diag[0] -= p[0] * k1
    diag[-1] -= p[-1] * k2
    off = -pbar / d
    scale = 1.0 / np.sqrt(mass)
    # eigenvalues of -(S - V - B) in the mass inner product
    return -diag * scale**2, -off * scale[:-1] * scale[1:]


def _mode_eigenvalues(y1, y2, n, m, k1, k2, count):
    d, e = _weighted_tridiagonal(y1, y2, n, m, k1, k2)
    try:
        top = linalg.eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(n + 1 - count, n))
        near = linalg.eigh_tridiagonal(d, e, eigvals_only=True, select="v", select_range=(-1.0, np.inf))
    except linalg.LinAlgError as exc:
        raise NumericalStabilityError("tridiagonal eigensolver failed") from exc
    return np.sort(top)[::-1], np.sort(near)[::-1]


def _extrapolated(y1, y2, n, m, k1, k2, count):
    coarse, cn = _mode_eigenvalues(y1, y2, n, m, k1, k2, count)
    fine, fn = _mode_eigenvalues(y1, y2, 2 * n, m, k1, k2, count)
    finer, ffn = _mode_eigenvalues(y1, y2, 4 * n, m, k1, k2, count)
    r1 = (4 * fine - coarse) / 3
    r2 = (4 * finer - fine) / 3
    k = min(len(fn), len(ffn))
    near = (4 * ffn[:k] - fn[:k]) / 3 if k else np.array([])
    return r2, np.abs(r2 - r1), near


@dataclass(frozen=True)
class RobinSpectralReport:
    """Largest eigenvalues per Fourier mode (chart units, descending).

    ``lambda > 0`` is an unstable direction.  ``morse_index`` counts the
    positive eigenvalues of all requested modes, modes ``m >= 1`` twice
    (cosine and sine).
    """

    y1: float
    y2: float
    kappa1: float
    kappa2: float
    eigenvalues: dict
    drift: dict
    nondegenerate: bool
    morse_index: int
    min_abs_eigenvalue: float
    positive_counts: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "y1": self.y1, "y2": self.y2, "kappa1": self.kappa1, "kappa2": self.kappa2,
            "eigenvalues": {str(m): v.tolist() for m, v in self.eigenvalues.items()},
            "drift": {str(m): v.tolist() for m, v in self.drift.items()},
            "nondegenerate": self.nondegenerate, "morse_index": self.morse_index,
            "min_abs_eigenvalue": self.min_abs_eigenvalue,
            "positive_counts": {str(m): v for m, v in self.positive_counts.items()},
        }


def mode_eigenvalues(y1, y2, K1c, K2c, m=0, count=3, n=1000):
    """Richardson-extrapolated largest ``count`` eigenvalues of one mode."""
    vals, _, _ = _extrapolated(y1, y2, n, m, K1c, K2c, count)
    return vals


def spectrum(y1: float, y2: float, K1c: float, K2c: float, modes=(0,), count: int = 3,
             n: int = 1000, tol: float = ZERO_TOL) -> RobinSpectralReport:
    """Eigenvalues of ``L_m h = lambda h`` with the Robin conditions.

    Each mode is solved on n, 2n and 4n cells; reported values are the
    Richardson extrapolation of the two finer grids and ``drift`` is its change
    from the coarser pair.
    """
    if count < 1:
        raise DomainError("count must be at least 1")
    if not y1 < y2:
        raise DomainError("need y1 < y2")
    eig, drift, positive = {}, {}, {}
    min_abs = np.inf
    morse = 0
    for m in modes:
        if m < 0:
            raise DomainError("mode must be non-negative")
        vals, dr, near = _extrapolated(y1, y2, n, m, K1c, K2c, count)
        eig[m] = vals
        drift[m] = dr
        allv = np.concatenate([vals, near])
        min_abs = min(min_abs, float(np.min(np.abs(allv))))
        pos = int(np.sum(near > tol)) if near.size else int(np.sum(vals > tol))
        positive[m] = pos
        morse += pos * (1 if m == 0 else 2)
    return RobinSpectralReport(
        y1=y1, y2=y2, kappa1=K1c, kappa2=K2c, eigenvalues=eig, drift=drift,
        nondegenerate=bool(min_abs > tol), morse_index=morse,
        min_abs_eigenvalue=min_abs, positive_counts=positive,
    )


# stability -------------------------------------------------------------------


def jacobi_combination(A: float, B: float):
    """``z = A z1 + B z2`` as a callable returning ``(z, z', z'')``."""

    def z(y):
        J = cat.jacobi_fields(y)
        return A * J.z1 + B * J.z2, A * J.dz1 + B * J.dz2, A * J.d2z1 + B * J.d2z2

    return z


def quadratic_form(y1, y2, k1, k2, phi, dphi, m=0, n=400):
    """``Q(phi, phi)`` with the lengths weighted by ``p = sqrt(1+y^2)``.

    ``Q = int p phi'^2 - int p q_m phi^2 - p(y1) k1 phi(y1)^2 - p(y2) k2 phi(y2)^2``
    by cellwise Gauss quadrature.  Also returns the weighted ``||phi||^2``.
    """
    y = np.linspace(y1, y2, n + 1)
    half = 0.5 * np.diff(y)
    x = 0.5 * (y[:-1] + y[1:])[:, None] + half[:, None] * _GL_X[None, :]
    p = np.sqrt(1 + x * x)
    f, df = phi(x), dphi(x)
    bulk = np.sum(half * ((p * (df * df - mode_potential(m, x) * f * f)) @ _GL_W))
    norm2 = np.sum(half * ((p * f * f) @ _GL_W))
    pb = np.sqrt(1 + np.array([y1, y2]) ** 2)
    fb = phi(np.array([y1, y2]))
    Q = bulk - pb[0] * k1 * fb[0] ** 2 - pb[1] * k2 * fb[1] ** 2
    return float(Q), float(norm2)


def _identity_rhs(y1, y2, k1, k2, phi, dphi, z, n=400):
    """Boundary term plus ``int p (phi' - phi z'/z)^2``."""
    y = np.linspace(y1, y2, n + 1)
    half = 0.5 * np.diff(y)
    x = 0.5 * (y[:-1] + y[1:])[:, None] + half[:, None] * _GL_X[None, :]
    zz, dz, _ = z(x)
    grad = dphi(x) - phi(x) * dz / zz
    bulk = np.sum(half * ((np.sqrt(1 + x * x) * grad * grad) @ _GL_W))
    zb, dzb, _ = z(np.array([y1, y2]))
    pb = np.sqrt(1 + np.array([y1, y2]) ** 2)
    fb = phi(np.array([y1, y2]))
    rate = np.array([-dzb[0] / zb[0] - k1, dzb[1] / zb[1] - k2])
    return float(np.sum(pb * rate * fb * fb) + bulk)


@dataclass(frozen=True)
class StabilityCertificate:
    """Outcome of the positive-Jacobi-field test.

    ``margin`` is the smallest boundary value of ``d_out log z - kappa``; the
    piece is certified a minimiser (in the axial class) when it is positive.
    """

    certified: bool
    margin: float
    q_min: float
    identity_error: float
    samples: int


def _random_bump(rng, y1, y2, z):
    """``phi = z * (random trigonometric polynomial)``."""
    L = y2 - y1
    k = np.arange(1, 5)
    a = rng.normal(size=4) / k
    b = rng.normal(size=4) / k
    c0 = rng.normal()

    def trig(x):
        u = np.pi * (np.asarray(x)[..., None] - y1) / L
        return c0 + np.sum(a * np.cos(k * u) + b * np.sin(k * u), axis=-1)

    def dtrig(x):
        u = np.pi * (np.asarray(x)[..., None] - y1) / L
        return np.sum((np.pi * k / L) * (-a * np.sin(k * u) + b * np.cos(k * u)), axis=-1)

    def phi(x):
        return z(x)[0] * trig(x)

    def dphi(x):
        zz, dz, _ = z(x)
        return dz * trig(x) + zz * dtrig(x)

    return phi, dphi


def stability_certificate(y1: float, y2: float, kappa1: float, kappa2: float, z,
                          samples: int = 100, seed: int = 0, n: int = 400) -> StabilityCertificate:
    """Certify stability with a positive mode-0 Jacobi field z.

    ``z`` is a callable returning ``(z, z', z'')``.  Besides the boundary
    margin, the quadratic form is sampled on ``samples`` random test functions
    and compared with the ground-state identity.
    """
    if not y1 < y2:
        raise DomainError("need y1 < y2")
    grid = np.linspace(y1, y2, 2001)
    zz, dz, d2z = z(grid)
    if np.any(zz <= 0):
        raise DomainError("z must be positive on the interval")
    resid = np.max(np.abs(apply_mode_operator(0, grid, zz, dz, d2z)))
    if resid > 1e-8 * max(1.0, np.max(np.abs(zz))):
        raise DomainError(f"z is not a Jacobi field (residual {resid:.2e})")
    zb, dzb, _ = z(np.array([y1, y2]))
    margin = float(min(-dzb[0] / zb[0] - kappa1, dzb[1] / zb[1] - kappa2))

    rng = np.random.default_rng(seed)
    q_min = np.inf
    err = 0.0
    for _ in range(samples):
        phi, dphi = _random_bump(rng, y1, y2, z)
        Q, norm2 = quadratic_form(y1, y2, kappa1, kappa2, phi, dphi, n=n)
        rhs = _identity_rhs(y1, y2, kappa1, kappa2, phi, dphi, z, n=n)
        q_min = min(q_min, Q / norm2)
        err = max(err, abs(Q - rhs) / norm2)
    return StabilityCertificate(certified=margin > 0, margin=margin, q_min=float(q_min),
                                identity_error=float(err), samples=samples)


# reduced interface equation --------------------------------------------------


@dataclass(frozen=True)
class ReducedH:
    """Main-order displacement ``h = A z1 + B z2`` of the layer.

    h is measured in layer units (multiples of alpha); ``bound`` is
    ``||h||_* / alpha`` on ``[-y_bar, y_bar]``.
    """

    alpha: float
    A: float
    B: float
    y: np.ndarray
    h: np.ndarray
    bound: float

    def __call__(self, y, derivatives: bool = False):
        J = cat.jacobi_fields(y)
        h = self.A * J.z1 + self.B * J.z2
        if not derivatives:
            return h
        return h, self.A * J.dz1 + self.B * J.dz2, self.A * J.d2z1 + self.B * J.d2z2


def solve_reduced_h(placement, alpha: float, constants, n: int = 400) -> ReducedH:
    """Mode-0 Robin solve for the interface displacement at main order.

    ``f = 0`` and the physical boundary data ``alpha c1 I m1``; in the chart
    the conditions are ``+-h' + (I c) h = c alpha c1 I m1``.
    """
    if alpha < 0:
        raise DomainError("alpha must be non-negative")
    c = placement.c
    y1, y2 = -placement.y_bar, placement.y_bar
    k = placement.I * c
    g = c * alpha * constants.c1 * placement.I * placement.m1
    problem = RobinProblem(y1, y2, 0, k, k, None, g, g)
    sol = solve_robin(problem, n=n, method="fundamental")
    A, B = sol.coefficients
    out = ReducedH(alpha=alpha, A=A, B=B, y=sol.y, h=sol.h, bound=0.0)
    _, dh, d2h = out(sol.y, derivatives=True)
    star = np.max(np.abs(sol.h)) + np.max(np.abs(dh)) + np.max(np.abs(d2h))
    bound = float(star / alpha) if alpha > 0 else 0.0
    return ReducedH(alpha=alpha, A=A, B=B, y=sol.y, h=sol.h, bound=bound)
