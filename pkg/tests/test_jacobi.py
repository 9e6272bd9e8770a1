import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from catenoid_ac import catenoid as cat
from catenoid_ac import jacobi as jac
from catenoid_ac.errors import DegenerateProblemError, DomainError


def test_mode_operator_examples():
    for m, y, field in [(0, 0.8, "z1"), (0, 1.2, "z2")]:
        J = cat.jacobi_fields(y)
        z, dz, d2z = getattr(J, field), getattr(J, "d" + field), getattr(J, "d2" + field)
        assert abs(jac.apply_mode_operator(m, y, z, dz, d2z)) < 1e-12
    y = np.linspace(-3, 3, 13)
    out = jac.apply_mode_operator(1, y, 2.5 * np.ones_like(y), 0 * y, 0 * y)
    assert np.allclose(out, (2 / (1 + y * y) ** 2 - 1 / (1 + y * y)) * 2.5, atol=1e-15)
    with pytest.raises(DomainError):
        jac.mode_operator(-1, 0.0)


def test_determinant_examples(ball_placement):
    det = jac.nondeg_determinant(-1, 1, 0, 0)
    assert det == pytest.approx(0.5740, abs=2e-4)
    assert det == pytest.approx(2 * 2**-1.5 * (0.5 + np.arcsinh(1) * 2**-1.5), abs=1e-14)
    k1, k2 = ball_placement.kappa_chart
    assert k1 == pytest.approx(0.4605, abs=1e-4)
    yb = ball_placement.y_bar
    assert jac.nondeg_determinant(-yb, yb, k1, k2) == pytest.approx(-0.285, abs=1e-3)


def _shoot(y1, y2, m, k1, k2, lam):
    def rhs(y, u):
        a2, a1, a0 = jac.mode_operator(m, y)
        return [u[1], -(a1 * u[1] + (a0 - lam) * u[0])]
    sol = integrate.solve_ivp(rhs, (y1, y2), [1.0, -k1], rtol=1e-12, atol=1e-13)
    h, dh = sol.y[:, -1]
    return -dh + k2 * h


def test_top_eigenvalues_against_shooting():
    y1, y2, k1, k2 = -1.3, 1.1, 0.2, -0.4
    for m in (0, 1, 2):
        lam = jac.mode_eigenvalues(y1, y2, k1, k2, m=m, count=2, n=400)
        for val in lam:
            root = optimize.brentq(lambda L: _shoot(y1, y2, m, k1, k2, L), val - 0.05, val + 0.05, xtol=1e-13)
            assert val == pytest.approx(root, abs=1e-7)


def test_determinant_root_matches_zero_eigenvalue():
    y1, y2 = -1.0, 1.0
    kroot = optimize.brentq(lambda k: jac.nondeg_determinant(y1, y2, k, k), 0.0, 2.0, xtol=1e-15)
    assert jac.nondeg_determinant(y1, y2, kroot - 0.01, kroot - 0.01) * jac.nondeg_determinant(
        y1, y2, kroot + 0.01, kroot + 0.01) < 0
    rep = jac.spectrum(y1, y2, kroot, kroot, modes=[0], n=400)
    assert not rep.nondegenerate and rep.min_abs_eigenvalue < jac.ZERO_TOL
    # eigenvalue root by bisection on the same family
    top = lambda k: jac.mode_eigenvalues(y1, y2, k, k, 0, 3, 400)  # noqa: E731
    lam_root = optimize.brentq(lambda k: np.min(np.abs(top(k))) * np.sign(top(k)[np.argmin(np.abs(top(k)))]),
                               kroot - 0.05, kroot + 0.05, xtol=1e-13)
    assert lam_root == pytest.approx(kroot, abs=1e-7)
    for dk in (-0.05, 0.05):
        assert jac.spectrum(y1, y2, kroot + dk, kroot + dk, n=400).nondegenerate


def _manufactured(y1, y2, k1, k2):
    def u(y):
        J = cat.jacobi_fields(y)
        return (J.z1 * J.z2, J.dz1 * J.z2 + J.z1 * J.dz2,
                J.d2z1 * J.z2 + 2 * J.dz1 * J.dz2 + J.z1 * J.d2z2)

    f = lambda y: jac.apply_mode_operator(0, y, *u(y))  # noqa: E731
    (a, da, _), (b, db, _) = u(y1), u(y2)
    problem = jac.RobinProblem(y1, y2, 0, k1, k2, f, da + k1 * a, -db + k2 * b)
    return problem, u


def test_manufactured_solution_both_paths():
    problem, u = _manufactured(-1.2, 0.9, 0.3, 0.7)
    ref = jac.solve_robin(problem, n=200, method="fundamental")
    assert np.max(np.abs(ref.h - u(ref.y)[0])) < 1e-12
    errs = []
    for n in (100, 200, 400, 800):
        sol = jac.solve_robin(problem, n=n, method="fd")
        errs.append(np.max(np.abs(sol.h - u(sol.y)[0])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


def test_paths_agree_at_second_order(ball_placement):
    yb = ball_placement.y_bar
    k = ball_placement.kappa_chart[0]
    problem = jac.RobinProblem(-yb, yb, 0, k, k, lambda y: np.cos(y) * np.exp(-y * y), 0.3, -0.2)
    ref = jac.solve_robin(problem, n=4000, method="fundamental")
    diffs = []
    for n in (100, 200, 400):
        sol = jac.solve_robin(problem, n=n, method="fd")
        diffs.append(np.max(np.abs(sol.h - np.interp(sol.y, ref.y, ref.h))))
    assert np.all(np.log2(np.array(diffs[:-1]) / np.array(diffs[1:])) >= 1.9)


def test_zero_data_gives_zero():
    for method in ("fd", "fundamental"):
        sol = jac.solve_robin(jac.RobinProblem(-1, 1, 0, 0.1, 0.2), method=method)
        assert np.max(np.abs(sol.h)) == 0


def test_robin_errors():
    y1, y2 = -1.0, 1.0
    kroot = optimize.brentq(lambda k: jac.nondeg_determinant(y1, y2, k, k), 0.0, 2.0, xtol=1e-15)
    for method in ("fd", "fundamental"):
        with pytest.raises(DegenerateProblemError):
            jac.solve_robin(jac.RobinProblem(y1, y2, 0, kroot, kroot, None, 1.0, 0.0), method=method)
    with pytest.raises(DomainError):
        jac.solve_robin(jac.RobinProblem(y1, y2, 1), method="fundamental")
    with pytest.raises(DomainError):
        jac.RobinProblem(1, 1)
    with pytest.raises(DomainError):
        jac.RobinProblem(0, 1, m=-1)


def test_higher_mode_fd_solution():
    # for m = 2 the constant-coefficient test: u = cos(y), f = L_2 u
    y1, y2, k1, k2, m = -1.0, 1.5, 0.2, 0.1, 2
    u, du, d2u = np.cos, lambda y: -np.sin(y), lambda y: -np.cos(y)
    f = lambda y: jac.apply_mode_operator(m, y, u(y), du(y), d2u(y))  # noqa: E731
    p = jac.RobinProblem(y1, y2, m, k1, k2, f, du(y1) + k1 * u(y1), -du(y2) + k2 * u(y2))
    e1 = np.max(np.abs(jac.solve_robin(p, n=200).h - u(np.linspace(y1, y2, 201))))
    e2 = np.max(np.abs(jac.solve_robin(p, n=400).h - u(np.linspace(y1, y2, 401))))
    assert np.log2(e1 / e2) > 1.9


def test_solvability_estimate(ball_placement, rng):
    yb = ball_placement.y_bar
    k = ball_placement.kappa_chart[0]
    ratios = []
    for _ in range(20):
        coef = rng.normal(size=4)
        f = lambda y, c=coef: c[0] + c[1] * np.sin(y) + c[2] * np.cos(2 * y) + c[3] * y * y  # noqa: E731
        g1, g2 = rng.normal(size=2)
        sol = jac.solve_robin(jac.RobinProblem(-yb, yb, 0, k, k, f, g1, g2), n=800, method="fundamental")
        y = sol.y
        ratios.append(sol.star_norm() / (np.max(np.abs(f(y))) + abs(g1) + abs(g2)))
    assert max(ratios) < 50 and min(ratios) > 0


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, -0.2), st.floats(0.2, 2), st.floats(-1, 1), st.floats(-1, 1), st.floats(-2, 2))
def test_fd_and_fundamental_agree(y1, y2, k1, k2, a):
    if abs(jac.nondeg_determinant(y1, y2, k1, k2)) < 1e-2:
        return
    f = lambda y: a + np.sin(3 * y)  # noqa: E731
    p = jac.RobinProblem(y1, y2, 0, k1, k2, f, 0.5, -0.25)
    ref = jac.solve_robin(p, n=400, method="fundamental")
    fd = jac.solve_robin(p, n=400, method="fd")
    scale = np.max(np.abs(ref.h)) + 1
    assert np.max(np.abs(ref.h - fd.h)) < 1e-3 * scale / abs(jac.nondeg_determinant(y1, y2, k1, k2))


def test_spectrum_examples():
    flat = jac.spectrum(-1, 1, 0, 0, modes=[0], n=400)
    assert flat.nondegenerate and jac.nondeg_determinant(-1, 1, 0, 0) != 0
    big = jac.spectrum(-5, 5, 0, 0, modes=[0], n=400)
    assert big.morse_index >= 1 and big.eigenvalues[0][0] > 0
    for rep in (flat, big):
        assert np.all(rep.drift[0] < 1e-6)
        assert np.all(np.diff(rep.eigenvalues[0]) < 0)


def test_eigenvalues_decrease_in_mode():
    rep = jac.spectrum(-1.5, 1.5, 0.4, 0.4, modes=[0, 1, 2, 3], count=2, n=400)
    tops = [rep.eigenvalues[m][0] for m in range(4)]
    assert all(b < a for a, b in zip(tops, tops[1:]))
    seconds = [rep.eigenvalues[m][1] for m in range(4)]
    assert all(b < a for a, b in zip(seconds, seconds[1:]))


def test_morse_counts_multiplicity():
    rep = jac.spectrum(-5, 5, 0, 0, modes=[0, 1], n=400)
    assert rep.morse_index == rep.positive_counts[0] + 2 * rep.positive_counts[1]
    d = rep.to_dict()
    assert set(d["eigenvalues"]) == {"0", "1"}


def test_ball_spectrum(ball_placement):
    yb = ball_placement.y_bar
    k1, k2 = ball_placement.kappa_chart
    axial = jac.spectrum(-yb, yb, k1, k2, modes=[0])
    assert axial.nondegenerate
    # rotations about horizontal axes are a genuine mode-1 kernel
    full = jac.spectrum(-yb, yb, k1, k2, modes=[0, 1, 2, 3])
    assert abs(full.eigenvalues[1]).min() < jac.ZERO_TOL
    assert not full.nondegenerate


def test_spectrum_errors():
    with pytest.raises(DomainError):
        jac.spectrum(-1, 1, 0, 0, count=0)
    with pytest.raises(DomainError):
        jac.spectrum(1, -1, 0, 0)


def test_stability_certificate_small_piece():
    y0 = cat.Y_STAR
    z = jac.jacobi_combination(0.0, -1.0)
    cert = jac.stability_certificate(-0.5, 0.5, -1.5, -1.5, z, samples=100)
    assert 0.5 < y0
    assert cert.certified and cert.margin > 0
    assert cert.q_min >= 0
    assert cert.identity_error < 1e-6


def test_stability_certificate_refusal():
    z = jac.jacobi_combination(0.0, -1.0)
    cert = jac.stability_certificate(-0.5, 0.5, 1.0, 1.0, z, samples=20)
    assert not cert.certified and cert.margin < 0
    assert cert.identity_error < 1e-6


def test_stability_preconditions():
    with pytest.raises(DomainError):
        jac.stability_certificate(-2, 2, 0, 0, jac.jacobi_combination(0.0, -1.0))
    bad = lambda y: (1 + 0 * np.asarray(y), 0 * np.asarray(y), 0 * np.asarray(y))  # noqa: E731
    with pytest.raises(DomainError):
        jac.stability_certificate(-1, 1, 0, 0, bad)


@settings(max_examples=15, deadline=None)
@given(st.floats(-1.4, -0.1), st.floats(0.1, 1.4), st.floats(-3, 1), st.floats(-3, 1), st.floats(-0.5, 0.5),
       st.integers(0, 1000))
def test_ground_state_identity(y1, y2, k1, k2, A, seed):
    z = jac.jacobi_combination(A, -1.0)
    zz = z(np.linspace(y1, y2, 401))[0]
    if np.min(zz) <= 0.05:
        return
    cert = jac.stability_certificate(y1, y2, k1, k2, z, samples=5, seed=seed)
    assert cert.identity_error < 1e-6
    if cert.certified:
        assert cert.q_min >= -1e-10


def test_quadratic_form_of_jacobi_field_is_boundary_only():
    # Q(z, z) reduces to the boundary term for a Jacobi field
    z = jac.jacobi_combination(0.3, -1.0)
    y1, y2, k1, k2 = -0.7, 0.9, 0.2, -0.1
    Q, _ = jac.quadratic_form(y1, y2, k1, k2, lambda y: z(y)[0], lambda y: z(y)[1])
    zb, dzb, _ = z(np.array([y1, y2]))
    p = np.sqrt(1 + np.array([y1, y2]) ** 2)
    expected = p[1] * zb[1] * dzb[1] - p[0] * zb[0] * dzb[0] - p[0] * k1 * zb[0] ** 2 - p[1] * k2 * zb[1] ** 2
    assert Q == pytest.approx(expected, abs=1e-12)


def test_reduced_h(ball_placement, constants):
    zero = jac.solve_reduced_h(ball_placement, 0.0, constants)
    assert np.max(np.abs(zero.h)) == 0
    h1 = jac.solve_reduced_h(ball_placement, 0.1, constants)
    h2 = jac.solve_reduced_h(ball_placement, 0.2, constants)
    assert np.max(np.abs(h2.h - 2 * h1.h)) < 1e-12
    assert np.max(np.abs(h1.h)) <= h1.bound * 0.1
    fine = jac.solve_reduced_h(ball_placement, 0.1, constants, n=1600)
    assert fine.bound == pytest.approx(h1.bound, rel=1e-3)
    # boundary conditions hold in chart units
    c, k = ball_placement.c, ball_placement.I * ball_placement.c
    g = c * 0.1 * constants.c1 * ball_placement.I * ball_placement.m1
    yb = ball_placement.y_bar
    hh, dh, _ = h1(np.array([-yb, yb]), derivatives=True)
    assert dh[0] + k * hh[0] == pytest.approx(g, abs=1e-12)
    assert -dh[1] + k * hh[1] == pytest.approx(g, abs=1e-12)
    # the FD path gives the same displacement
    fd = jac.solve_robin(jac.RobinProblem(-yb, yb, 0, k, k, None, g, g), n=800)
    assert np.max(np.abs(fd.h - h1(fd.y))) < 1e-4 * np.max(np.abs(h1.h))
    assert abs(h1.A) < 1e-10
    with pytest.raises(DomainError):
        jac.solve_reduced_h(ball_placement, -0.1, constants)


def test_ball_family_degenerates_only_at_one():
    # balls with K c = y/(1+y^2) on the symmetric piece [-y, y]
    fam = lambda y: jac.nondeg_determinant(-y, y, y / (1 + y * y), y / (1 + y * y))  # noqa: E731
    ys = np.linspace(0.05, 4, 800)
    d = np.array([fam(y) for y in ys])
    assert np.count_nonzero(np.sign(d[:-1]) != np.sign(d[1:])) == 1
    assert optimize.brentq(fam, 0.8, 1.2, xtol=1e-15) == pytest.approx(1.0, abs=1e-12)
    assert abs(fam(cat.Y_STAR)) > 0.1 and abs(fam(1 / np.sqrt(2))) > 0.1
