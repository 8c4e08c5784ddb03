import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from oscgraph.free_resolvent import (GaussianSource, Grid, GridSource, PiecewiseSource, QuadratureError, apply_phi,
                                     apply_phi_circ, apply_phi_circ_derivative, apply_phi_derivative, apply_q,
                                     cubic_bump, g_pairing, q_operator_norm, schur_norm_bound)
from oscgraph.params import zeta_branch
from oscgraph.piecewise import PiecewiseExp, kernel_g


def quad_c(f, a, b, points=()):
    pts = sorted(p for p in points if a < p < b)
    edges = [a, *pts, b]
    tot = 0j
    for lo, hi in zip(edges, edges[1:]):
        tot += integrate.quad(lambda t: complex(f(t)).real, lo, hi, limit=200, epsabs=1e-15, epsrel=1e-13)[0]
        tot += 1j * integrate.quad(lambda t: complex(f(t)).imag, lo, hi, limit=200, epsabs=1e-15, epsrel=1e-13)[0]
    return tot


def phi_oracle(zeta, f, x, lo, hi, points=()):
    return quad_c(lambda t: np.exp(-zeta * abs(x - t)) * f(t), lo, hi, (x, *points)) / (2 * zeta)


def circ_oracle(zeta, f, x, lo, hi):
    if x == 0:
        return 0j
    s = np.sign(x)
    k = lambda t: (np.exp(-zeta * abs(x - t)) - np.exp(-zeta * (abs(x) + abs(t)))) if t * s > 0 else 0.0
    return quad_c(lambda t: k(t) * f(t), lo, hi, (x, 0.0)) / (2 * zeta)


GAUSS = GaussianSource(1.0 - 0.5j, 0.4, 0.3)
BUMP = cubic_bump(-0.2, 0.9, 2.0)
ZETAS = [1.0, 0.7 - 0.6j, 2.5 + 1.5j]


@pytest.mark.parametrize("zeta", ZETAS)
@pytest.mark.parametrize("x", [-2.0, -1.0, 0.0, 0.35, 1.0, 3.0])
def test_apply_phi_vs_quad(zeta, x):
    g = lambda t: complex(GAUSS(np.array([t]))[0])
    ref = phi_oracle(zeta, g, x, -8, 8)
    assert apply_phi(zeta, GAUSS, x) == pytest.approx(ref, rel=1e-10, abs=1e-15)
    b = lambda t: complex(BUMP(np.array([t]))[0])
    ref = phi_oracle(zeta, b, x, -1.1, 0.7, (-0.65, -0.2, 0.25))
    assert apply_phi(zeta, BUMP, x) == pytest.approx(ref, rel=1e-10, abs=1e-15)


@pytest.mark.parametrize("zeta", ZETAS)
def test_apply_phi_circ_vs_quad(zeta):
    g = lambda t: complex(GAUSS(np.array([t]))[0])
    for x in (-1.5, -0.2, 0.3, 1.0, 2.0):
        assert apply_phi_circ(zeta, GAUSS, x) == pytest.approx(circ_oracle(zeta, g, x, -8, 8), rel=1e-10, abs=1e-15)
    assert abs(apply_phi_circ(zeta, GAUSS, 0.0)) < 1e-12


def test_phi_with_g_source_solves_ode():
    z = 1.1 - 0.4j
    f = PiecewiseSource(kernel_g(z))
    xs = np.array([-2.0, -0.5, 0.4, 1.5])
    h = 1e-3
    u = lambda x: np.asarray(apply_phi(z, f, x))
    d2 = (-u(xs + 2 * h) + 16 * u(xs + h) - 30 * u(xs) + 16 * u(xs - h) - u(xs - 2 * h)) / (12 * h * h)
    assert np.max(np.abs(-d2 + z * z * u(xs) - f(xs))) < 1e-8
    # u(0) = (2 zeta)^-1 int exp(-2 zeta |t|) dt = 1 / (2 zeta^2)
    assert apply_phi(z, f, 0.0) == pytest.approx(1 / (2 * z * z), rel=1e-13)


def test_zero_source():
    f = PiecewiseSource(PiecewiseExp.zero())
    assert apply_phi(1 + 1j, f, 0.3) == 0
    assert apply_phi_circ(1 + 1j, f, -0.3) == 0


def test_no_jump_at_pm1():
    z = 0.9 + 0.3j
    for x0 in (1.0, -1.0):
        d_plus = apply_phi_derivative(z, GAUSS, x0 + 1e-12)
        d_minus = apply_phi_derivative(z, GAUSS, x0 - 1e-12)
        assert abs(d_plus - d_minus) < 1e-8


def test_derivatives_vs_fd():
    z = 1.3 - 0.2j
    h = 1e-5
    for x in (-1.3, 0.2, 0.9):
        fd = (apply_phi(z, GAUSS, x + h) - apply_phi(z, GAUSS, x - h)) / (2 * h)
        assert apply_phi_derivative(z, GAUSS, x) == pytest.approx(fd, rel=1e-7)
        fd = (apply_phi_circ(z, GAUSS, x + h) - apply_phi_circ(z, GAUSS, x - h)) / (2 * h)
        assert apply_phi_circ_derivative(z, GAUSS, x) == pytest.approx(fd, rel=1e-7)


def test_circ_vanishes_on_other_side():
    z = 1.0 + 0.5j
    f = cubic_bump(1.0, 0.5)
    xs = np.array([-3.0, -1.0, -0.1])
    assert np.all(np.asarray(apply_phi_circ(z, f, xs)) == 0)


def test_circ_residual():
    z = 0.8 - 0.5j
    xs = np.array([-1.7, -0.6, 0.5, 1.4])
    h = 1e-3
    u = lambda x: np.asarray(apply_phi_circ(z, GAUSS, x))
    d2 = (-u(xs + 2 * h) + 16 * u(xs + h) - 30 * u(xs) + 16 * u(xs - h) - u(xs - 2 * h)) / (12 * h * h)
    assert np.max(np.abs(-d2 + z * z * u(xs) - GAUSS(xs))) < 1e-8


@pytest.mark.parametrize("zeta", ZETAS)
def test_q_identity(zeta):
    coef, Q = apply_q(zeta, GAUSS)
    xs = np.linspace(-3, 3, 25)
    diff = np.asarray(apply_phi_circ(zeta, GAUSS, xs)) - np.asarray(apply_phi(zeta, GAUSS, xs))
    assert np.allclose(diff, Q(xs), atol=1e-9, rtol=0)
    assert coef == pytest.approx(-g_pairing(zeta, GAUSS) / (2 * zeta), rel=1e-14)


def test_q_kills_odd_sources():
    odd = PiecewiseSource(PiecewiseExp.polynomial([0.0, 1.0], -1.0, 1.0))
    coef, _ = apply_q(1.3 + 0.4j, odd)
    assert abs(coef) < 1e-15


def test_q_norm_example():
    z = zeta_branch(1, 1j)
    assert q_operator_norm(z) == pytest.approx(1 / (2 * 1.18921 * 1.09868), rel=1e-4)
    assert q_operator_norm(z) == pytest.approx(0.38270, abs=2e-5)


def test_q_norm_discretized_rank_one():
    z = 0.9 - 0.7j
    t, v = np.polynomial.legendre.leggauss(300)
    # one panel per side of the kink at 0
    x = np.concatenate((15 * (t - 1), 15 * (t + 1)))
    w = np.concatenate((15 * v, 15 * v))
    K = -np.outer(np.exp(-z * np.abs(x)), np.exp(-z * np.abs(x))) / (2 * z)
    s = np.linalg.svd(np.sqrt(w)[:, None] * K * np.sqrt(w)[None, :], compute_uv=False)
    assert s[1] < 1e-12 * s[0]
    assert s[0] == pytest.approx(q_operator_norm(z), rel=1e-6)


def test_schur_bound():
    assert schur_norm_bound(2.0) == pytest.approx(0.25)
    gs = np.linspace(0.5, 10, 20)
    assert np.all(np.diff([schur_norm_bound(g) for g in gs]) < 0)
    r = np.arange(1, 51, dtype=float)
    b = np.array([schur_norm_bound(zeta_branch(x, 1j)) for x in r])
    slope = np.polyfit(np.log(r), np.log(b), 1)[0]
    assert abs(slope + 1) <= 0.05


def test_reflection_symmetry():
    z = 1.2 + 0.7j
    for x in (-1.5, 0.3, 2.0):
        assert apply_phi(z, GAUSS.reflect(), -x) == pytest.approx(apply_phi(z, GAUSS, x), rel=1e-13)
        assert apply_phi(z, BUMP.reflect(), -x) == pytest.approx(apply_phi(z, BUMP, x), rel=1e-12, abs=1e-16)


def test_decay_outside_support():
    z = 1.4 + 0.3j
    f = cubic_bump(0.0, 1.0)
    for x in (2.0, 4.0, 8.0):
        bound = f.l2_norm() * math.sqrt(1 / z.real) / (2 * abs(z)) * math.exp(-z.real * (x - 1))
        assert abs(apply_phi(z, f, x)) <= bound * (1 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-2, 2), w=st.floats(0.1, 1.0), x=st.floats(-3, 3), zr=st.floats(0.3, 4), zi=st.floats(-3, 3))
def test_gaussian_closed_form_property(c, w, x, zr, zi):
    z = complex(zr, zi)
    f = GaussianSource(1.0, c, w)
    g = lambda t: complex(f(np.array([t]))[0])
    ref = phi_oracle(z, g, x, c - 12 * w, c + 12 * w)
    assert abs(apply_phi(z, f, x) - ref) <= 1e-10 * max(abs(ref), 1e-6)


def test_grid_source():
    grid = Grid(-4.0, 4.0, 0.005)
    src = GridSource(grid, GAUSS(grid.points))
    z = 1.1 - 0.3j
    for x in (-1.0, 0.0, 0.6):
        assert apply_phi(z, src, x) == pytest.approx(apply_phi(z, GAUSS, x), rel=1e-8)
    coarse = GridSource(Grid(-4.0, 4.0, 0.1), GAUSS(Grid(-4.0, 4.0, 0.1).points))
    with pytest.raises(QuadratureError):
        apply_phi(z, coarse, 0.3, tol=1e-12)


def test_grid_validation():
    g = Grid(-2.0, 3.0, 0.25)
    assert {-1.0, 0.0, 1.0} <= set(g.points.tolist())
    with pytest.raises(ValueError):
        Grid(-2.0, 2.0, 0.3)
    with pytest.raises(ValueError):
        Grid(-0.5, 2.0, 0.1)
