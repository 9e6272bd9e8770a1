import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from catenoid_ac import catenoid as cat
from catenoid_ac.errors import DomainError, NoConvergenceError

ys = st.floats(-4, 4, allow_nan=False)
thetas = st.floats(0, 2 * np.pi, allow_nan=False, exclude_max=True)
scales = st.floats(0.2, 5, allow_nan=False)


def test_chart_neck():
    X, nu, g, A2, K = cat.chart_eval(1.0, 0.0, 0.0)
    assert np.allclose(X, [1, 0, 0]) and np.allclose(nu, [-1, 0, 0])
    assert A2 == 2.0 and K == -1.0


def test_chart_at_y_one():
    X, *_ = cat.chart_eval(1.0, 1.0, np.pi / 2)
    assert np.allclose(X, [0, np.sqrt(2), np.arcsinh(1)], atol=1e-15)
    assert X[2] == pytest.approx(0.8814, abs=5e-5)


def test_gauss_equation_example():
    *_, A2, K = cat.chart_eval(2.0, 0.7, 1.3)
    assert abs(A2 + 2 * K) < 1e-16


@given(scales, ys, thetas)
def test_meridian_is_catenary(c, y, th):
    X, nu, g, A2, K = cat.chart_eval(c, y, th)
    r = np.hypot(X[0], X[1])
    assert r == pytest.approx(c * np.cosh(X[2] / c), rel=1e-12)
    assert np.linalg.norm(nu) == pytest.approx(1, abs=1e-14)
    assert np.all(np.linalg.eigvalsh(g) > 0) and g[0, 1] == g[1, 0]


@settings(max_examples=40)
@given(scales, ys, thetas)
def test_metric_and_normal_by_finite_differences(c, y, th):
    h = 1e-5
    P = lambda yy, tt: cat.chart_eval(c, yy, tt)[0]  # noqa: E731
    Xy = (P(y + h, th) - P(y - h, th)) / (2 * h)
    Xt = (P(y, th + h) - P(y, th - h)) / (2 * h)
    g = cat.chart_eval(c, y, th)[2]
    G = np.array([[Xy @ Xy, Xy @ Xt], [Xt @ Xy, Xt @ Xt]])
    assert np.allclose(G, g, rtol=1e-8, atol=1e-8 * c * c)
    nu = cat.chart_eval(c, y, th)[1]
    assert abs(nu @ Xy) < 1e-8 * c and abs(nu @ Xt) < 1e-8 * c * (1 + y * y)


def test_normal_points_toward_axis():
    # at the neck, moving along nu reaches the axis after distance c
    c = 1.7
    X, nu, *_ = cat.chart_eval(c, 0.0, 0.4)
    assert np.allclose(X + c * nu, 0, atol=1e-14)


@settings(max_examples=40)
@given(scales, ys)
def test_principal_curvatures_by_finite_differences(c, y):
    h = 1e-4
    nu = lambda yy: cat.chart_eval(c, yy, 0.0)[1]  # noqa: E731
    X = lambda yy: cat.chart_eval(c, yy, 0.0)[0]  # noqa: E731
    nuy = (nu(y + h) - nu(y - h)) / (2 * h)
    Xy = (X(y + h) - X(y - h)) / (2 * h)
    Xyy = (X(y + h) - 2 * X(y) + X(y - h)) / h**2
    # second fundamental form along the meridian, both ways
    k_mer = -(nuy @ Xy) / (Xy @ Xy)
    k_mer2 = (Xyy @ nu(y)) / (Xy @ Xy)
    k1, k2 = cat.principal_curvatures(c, y)
    assert k_mer == pytest.approx(k1, rel=1e-6, abs=1e-8)
    assert k_mer2 == pytest.approx(k1, rel=1e-5, abs=1e-7)
    assert abs(k1 + k2) < 1e-15
    A2 = cat.chart_eval(c, y, 0.0)[3]
    assert abs(k1**2 + k2**2 - A2) < 1e-8


def test_jacobi_field_examples():
    j = cat.jacobi_fields(0.0)
    assert (j.z1, j.z2, j.dz1) == (0.0, -1.0, 1.0)
    j = cat.jacobi_fields(1.0)
    assert j.z1 == pytest.approx(1 / np.sqrt(2), abs=1e-15)
    assert j.z2 == pytest.approx(-0.37678, abs=1e-5)
    assert j.z2 == pytest.approx(np.arcsinh(1) / np.sqrt(2) - 1, abs=1e-15)


def test_z2_root_against_brentq():
    root = optimize.brentq(lambda y: y / np.sqrt(1 + y * y) * np.arcsinh(y) - 1, 1, 2, xtol=1e-15)
    assert cat.z2_root() == pytest.approx(root, abs=1e-14)
    assert cat.Y_STAR == pytest.approx(root, abs=1e-14)
    assert cat.Y_STAR == pytest.approx(1.5089, abs=5e-5)


def test_jacobi_fields_annihilated():
    y = np.linspace(-8, 8, 3201)
    j = cat.jacobi_fields(y)
    L = lambda z, dz, d2z: d2z + y / (1 + y * y) * dz + 2 / (1 + y * y) ** 2 * z  # noqa: E731
    assert np.max(np.abs(L(j.z1, j.dz1, j.d2z1))) < 1e-10
    assert np.max(np.abs(L(j.z2, j.dz2, j.d2z2))) < 1e-10


def test_jacobi_derivatives_by_finite_differences():
    y = np.linspace(-3, 3, 61)
    h = 1e-5
    jp, jm, j = cat.jacobi_fields(y + h), cat.jacobi_fields(y - h), cat.jacobi_fields(y)
    assert np.allclose((jp.z1 - jm.z1) / (2 * h), j.dz1, atol=1e-9)
    assert np.allclose((jp.z2 - jm.z2) / (2 * h), j.dz2, atol=1e-9)
    assert np.allclose((jp.dz1 - jm.dz1) / (2 * h), j.d2z1, atol=1e-9)
    assert np.allclose((jp.dz2 - jm.dz2) / (2 * h), j.d2z2, atol=1e-9)
    assert np.allclose(j.dz1, (1 + y * y) ** -1.5)


@given(st.floats(0, 6))
def test_jacobi_parity_and_monotonicity(y):
    j, jm = cat.jacobi_fields(y), cat.jacobi_fields(-y)
    assert jm.z1 == -j.z1 and jm.z2 == j.z2
    if y > 0:
        assert j.dz1 > 0 and j.dz2 > 0


def test_wronskian():
    y = np.linspace(-5, 5, 101)
    j = cat.jacobi_fields(y)
    W = j.z1 * j.dz2 - j.dz1 * j.z2
    assert np.allclose(W, 1 / np.sqrt(1 + y * y), atol=1e-14)


def test_total_curvature_examples():
    assert cat.total_curvature(1, -1, 1) == pytest.approx(-4 * np.pi / np.sqrt(2), abs=1e-14)
    assert cat.total_curvature(1, -1, 1) == pytest.approx(-8.8858, abs=5e-5)
    assert abs(cat.total_curvature(1, -1e3, 1e3) + 4 * np.pi) < 1e-5
    Ys = [1, 10, 100, 1e3]
    vals = [cat.total_curvature(1, -Y, Y) for Y in Ys]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_area_example():
    a = cat.area(1, -cat.Y_STAR, cat.Y_STAR)
    assert a == pytest.approx(24.699, abs=1e-3)
    # the stated 24.702 is reproduced by the ball-critical neck at R = 2.1717
    assert a == pytest.approx(24.702, abs=5e-3)


@settings(max_examples=20)
@given(scales, st.floats(-3, 3), st.floats(0.1, 3))
def test_integrals_against_quadrature(c, ya, width):
    yb = ya + width
    q_area = integrate.quad(lambda y: 2 * np.pi * c * c * np.sqrt(1 + y * y), ya, yb, epsabs=1e-13)[0]
    q_curv = integrate.quad(
        lambda y: cat.chart_eval(c, y, 0)[4] * 2 * np.pi * c * c * np.sqrt(1 + y * y), ya, yb, epsabs=1e-13
    )[0]
    assert cat.area(c, ya, yb) == pytest.approx(q_area, rel=1e-11)
    assert cat.total_curvature(c, ya, yb) == pytest.approx(q_curv, abs=1e-11)


def test_integral_preconditions():
    with pytest.raises(DomainError):
        cat.area(1, 1, 0)
    with pytest.raises(DomainError):
        cat.total_curvature(1, 0, 0)
    with pytest.raises(DomainError):
        cat.chart_eval(0, 0, 0)


def test_fermi_map_examples():
    assert np.allclose(cat.fermi_map(1, 0.3, 1.1, 0.0), cat.chart_eval(1, 0.3, 1.1)[0], atol=0)
    assert np.allclose(cat.fermi_map(1, 0, 0, 0.3), [0.7, 0, 0], atol=1e-15)
    with pytest.raises(DomainError):
        cat.fermi_map(1, 0, 0, 1.0)


def test_fermi_invert_examples():
    p = cat.fermi_invert(1.0, [1, 0, 0])
    assert abs(p.y) < 1e-14 and p.theta == 0 and abs(p.z) < 1e-14
    assert cat.fermi_invert(1.0, [0.7, 0, 0]).z == pytest.approx(0.3, abs=1e-13)
    y0 = np.sinh(1.0)
    n = np.array([1.0, -y0]) / np.sqrt(1 + y0 * y0)  # outward, away from the axis
    pos = [np.cosh(1) + 0.1 * n[0], 0, 1 + 0.1 * n[1]]
    fp = cat.fermi_invert(1.0, pos)
    assert fp.z == pytest.approx(-0.1, abs=1e-12) and fp.y == pytest.approx(y0, abs=1e-12)
    pos = [np.cosh(1) - 0.1 * n[0], 0, 1 - 0.1 * n[1]]
    assert cat.fermi_invert(1.0, pos).z == pytest.approx(0.1, abs=1e-12)


def test_fermi_invert_errors():
    with pytest.raises(DomainError):
        cat.fermi_invert(1.0, [0, 0, 0.5])
    with pytest.raises(NoConvergenceError):
        cat.fermi_invert(1.0, [5.0, 0, 0])


@settings(max_examples=60)
@given(scales, ys, thetas, st.floats(-0.45, 0.45))
def test_fermi_round_trip(c, y, th, frac):
    chart = cat.CatenoidChart(c, eta=10 * c, delta=0)
    z = frac * float(chart.focal_radius(y))
    z = np.clip(z, -0.45 * c, 0.45 * c)
    fp = cat.fermi_invert(chart, cat.fermi_map(c, y, th, z))
    assert abs(fp.y - y) < 1e-12 * (1 + abs(y)) * max(1, 1 / c)
    assert abs(fp.z - z) < 1e-12 * max(c, 1)
    assert abs(np.angle(np.exp(1j * (fp.theta - th)))) < 1e-12


@settings(max_examples=30)
@given(st.floats(-2, 2), thetas, st.floats(-0.4, 0.4))
def test_offset_is_distance(y, th, z):
    # brute-force distance to the surface
    P = cat.fermi_map(1.0, y, th, z)
    yy, tt = np.meshgrid(np.linspace(y - 1, y + 1, 801), th + np.linspace(-0.6, 0.6, 241), indexing="ij")
    d = np.min(np.linalg.norm(cat.chart_eval(1.0, yy, tt)[0] - P, axis=-1))
    assert d == pytest.approx(abs(z), abs=3e-5)


def test_chart_defaults():
    ch = cat.CatenoidChart(2.0)
    assert ch.eta == 1.0 and ch.delta == 0.5
    with pytest.raises(DomainError):
        cat.CatenoidChart(-1)
