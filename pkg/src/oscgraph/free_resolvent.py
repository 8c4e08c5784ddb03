"""Decoupled per-channel resolvents on the line.

For Re zeta > 0 and a source f these evaluate

* ``apply_phi``:      u = (2 zeta)^-1 int exp(-zeta |x - t|) f(t) dt, the L^2 solution of -u'' + zeta^2 u = f;
* ``apply_phi_circ``: the same equation with the extra condition u(0) = 0, via image kernels;
* ``apply_q``:        the rank-one difference Phi_circ - Phi = coef * g with g = exp(-zeta |x|).

Every source type exposes ``kernel_integral(kappa, shift, a, b)``, the integral of
exp(kappa (t - shift)) f(t) over [a, b]. Shifting by the evaluation point keeps
every exponent bounded, which is what makes large Re zeta safe.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate, special

from .piecewise import INF, PiecewiseExp

DEFAULT_GRID_TOL = 1e-8


class QuadratureError(RuntimeError):
    """Grid quadrature could not reach the requested tolerance."""

    def __init__(self, achieved: float, requested: float):
        super().__init__(f"quadrature error estimate {achieved:.3g} exceeds tolerance {requested:.3g}")
        self.achieved = achieved
        self.requested = requested


def _check_zeta(zeta) -> complex:
    zeta = complex(zeta)
    if not zeta.real > 0:
        raise ValueError(f"need Re zeta > 0, got {zeta}")
    return zeta


# ---------------------------------------------------------------- sources


class SourceFunction:
    """Base class for per-channel sources f(t)."""

    #: closed interval outside which f vanishes (possibly infinite)
    support: tuple[float, float] = (-INF, INF)

    def __call__(self, t):
        raise NotImplementedError

    def kernel_integral(self, kappa, shift, a, b):
        """(value, error estimate) of int_a^b exp(kappa (t - shift)) f(t) dt, broadcasting shift, a, b."""
        raise NotImplementedError

    def l2_norm(self) -> float:
        raise NotImplementedError

    def conj(self) -> "SourceFunction":
        """Complex conjugate source."""
        raise NotImplementedError

    def reflect(self) -> "SourceFunction":
        """The source t -> f(-t)."""
        raise NotImplementedError


@dataclass(frozen=True)
class PiecewiseSource(SourceFunction):
    """Source given by a piecewise exponential-polynomial; integrals are exact."""

    pw: PiecewiseExp

    @property
    def support(self):
        nz = [i for i, (c, _, _) in enumerate(self.pw.pieces) if c.size and np.any(c != 0)]
        if not nz:
            return (0.0, 0.0)
        return (float(self.pw.breaks[nz[0]]), float(self.pw.breaks[nz[-1] + 1]))

    def __call__(self, t):
        return self.pw(t)

    def kernel_integral(self, kappa, shift, a, b):
        val = self.pw.exp_integral(kappa, a, b, shift)
        return val, np.zeros(np.shape(val))

    def l2_norm(self) -> float:
        return self.pw.norm()

    def conj(self):
        return PiecewiseSource(self.pw.conj())

    def reflect(self):
        return PiecewiseSource(self.pw.reflect())


def cubic_bump(center: float = 0.0, half_width: float = 1.0, amp: complex = 1.0) -> PiecewiseSource:
    """C^2 cubic B-spline bump supported on [center - half_width, center + half_width].

    The mass is ``amp * half_width / 2``. Pieces are stored as polynomials in
    absolute x, so relative accuracy degrades like 1e-16 * (|center| / half_width)**3.
    """
    if 1e-14 * (abs(center) / half_width) ** 3 > 1e-8:
        warnings.warn(f"cubic_bump(center={center}, half_width={half_width}) loses accuracy to cancellation; "
                      "shrink |center| / half_width below about 100", RuntimeWarning, stacklevel=2)
    h = half_width / 2.0  # B-spline knot spacing
    c = center
    # pieces in u = (x - c)/h, as polynomials in u
    polys = [
        (-2, -1, [8 / 6, 2.0, 1.0, 1 / 6]),      # (2+u)^3/6
        (-1, 0, [4 / 6, 0.0, -1.0, -0.5]),       # (4 - 6u^2 - 3u^3)/6
        (0, 1, [4 / 6, 0.0, -1.0, 0.5]),         # (4 - 6u^2 + 3u^3)/6
        (1, 2, [8 / 6, -2.0, 1.0, -1 / 6]),      # (2-u)^3/6
    ]
    pw = PiecewiseExp.zero()
    for ua, ub, co in polys:
        coeffs = [amp * cj / h**j for j, cj in enumerate(co)]
        pw = pw + PiecewiseExp.polynomial(coeffs, c + ua * h, c + ub * h, center=c)
    return PiecewiseSource(pw)


def _erfc_scaled_diff(P, za, zb):
    """exp(P) * (erfc(za) - erfc(zb)) without overflow, for Re za <= Re zb.

    ``za`` may be -inf and ``zb`` may be +inf (real infinities).
    """
    P, za, zb = np.broadcast_arrays(np.asarray(P, complex), np.asarray(za, complex), np.asarray(zb, complex))
    out = np.zeros(P.shape, complex)
    a_inf = np.isinf(za.real)
    b_inf = np.isinf(zb.real)
    za_f = np.where(a_inf, 0.0, za)
    zb_f = np.where(b_inf, 0.0, zb)

    def scaled(z, sign):
        # exp(P - z^2) erfcx(sign z) = exp(P) erfc(sign z)
        return np.exp(P - z * z) * special.erfcx(sign * z)

    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        a_neg = a_inf | (za.real < 0)
        b_neg = ~b_inf & (zb.real < 0)
        # both left of the peak: erfc(za) - erfc(zb) = erfc(-zb) - erfc(-za)
        both = a_neg & b_neg
        tb = scaled(zb_f, -1)
        ta = np.where(a_inf, 0.0, scaled(za_f, -1))
        out = np.where(both, tb - ta, out)
        # both right of the peak
        right = ~a_neg
        ta_r = scaled(za_f, 1)
        tb_r = np.where(b_inf, 0.0, scaled(zb_f, 1))
        out = np.where(right, ta_r - tb_r, out)
        # straddling: 2 - erfc(-za) - erfc(zb)
        mixed = a_neg & ~b_neg
        out = np.where(mixed, 2 * np.exp(P) - ta - tb_r, out)
    return out


@dataclass(frozen=True)
class GaussianSource(SourceFunction):
    """f(t) = amp * exp(-(t - center)^2 / (2 width^2)); kernel integrals in closed form via erfcx."""

    amp: complex = 1.0
    center: float = 0.0
    width: float = 0.25

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("width must be positive")

    @property
    def support(self):
        return (-INF, INF)

    @property
    def effective_support(self):
        return (self.center - 9 * self.width, self.center + 9 * self.width)

    def __call__(self, t):
        t = np.asarray(t, float)
        return self.amp * np.exp(-((t - self.center) ** 2) / (2 * self.width**2)) + 0j

    def kernel_integral(self, kappa, shift, a, b):
        kappa = complex(kappa)
        s, c = self.width, self.center
        shift, a, b = np.broadcast_arrays(np.asarray(shift, float), np.asarray(a, float), np.asarray(b, float))
        P = kappa * (c - shift) + kappa**2 * s**2 / 2
        beta = kappa * s / math.sqrt(2)
        r2s = s * math.sqrt(2)
        with np.errstate(invalid="ignore"):
            za = np.where(np.isinf(a), a, (a - c) / r2s) - beta
            zb = np.where(np.isinf(b), b, (b - c) / r2s) - beta
        za = np.where(np.isinf(a), a + 0j, za)
        zb = np.where(np.isinf(b), b + 0j, zb)
        val = self.amp * r2s * (math.sqrt(math.pi) / 2) * _erfc_scaled_diff(P, za, zb)
        val = np.where(a < b, val, 0.0)
        return (val if val.ndim else complex(val)), np.zeros(val.shape)

    def l2_norm(self) -> float:
        return abs(self.amp) * math.sqrt(self.width * math.sqrt(math.pi))

    def conj(self):
        return GaussianSource(complex(self.amp).conjugate(), self.center, self.width)

    def reflect(self):
        return GaussianSource(self.amp, -self.center, self.width)


@dataclass(frozen=True)
class Grid:
    """Uniform sample points on [lo, hi] that contain -1, 0 and 1 exactly."""

    lo: float = -4.0
    hi: float = 4.0
    h: float = 0.1
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.h > 0 or not self.lo < -1 or not self.hi > 1:
            raise ValueError("grid must satisfy h > 0 and lo < -1 < 1 < hi")
        k = 1.0 / self.h
        if abs(k - round(k)) > 1e-9 or abs(self.lo * k - round(self.lo * k)) > 1e-6 \
                or abs(self.hi * k - round(self.hi * k)) > 1e-6:
            raise ValueError("1/h, lo/h and hi/h must be integers so that -1, 0, 1 are grid points")
        n = int(round((self.hi - self.lo) / self.h))
        pts = self.lo + self.h * np.arange(n + 1)
        for v in (-1.0, 0.0, 1.0):  # pin the special points exactly
            pts[np.argmin(np.abs(pts - v))] = v
        object.__setattr__(self, "points", pts)


def _simpson_richardson(t, y):
    """Composite Simpson value and |S_h - S_2h|/15 as the error estimate."""
    if t.size < 2:
        return 0j, 0.0
    fine = integrate.simpson(y, x=t)
    if t.size < 5:
        coarse = integrate.trapezoid(y, x=t)
        return fine, abs(fine - coarse)
    sl = slice(None, None, 2) if t.size % 2 == 1 else np.r_[0:t.size - 1:2, t.size - 1]
    coarse = integrate.simpson(y[sl], x=t[sl])
    return fine, abs(fine - coarse) / 15.0


@dataclass(frozen=True)
class GridSource(SourceFunction):
    """Source sampled on a :class:`Grid`, zero outside it; integrals by composite Simpson."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, complex)
        if v.shape != self.grid.points.shape:
            raise ValueError("values must match the grid")
        object.__setattr__(self, "values", v)

    @property
    def support(self):
        return (self.grid.lo, self.grid.hi)

    def _interp(self, t):
        t = np.asarray(t, float)
        spl_r = interpolate.CubicSpline(self.grid.points, self.values.real)
        spl_i = interpolate.CubicSpline(self.grid.points, self.values.imag)
        inside = (t >= self.grid.lo) & (t <= self.grid.hi)
        return np.where(inside, spl_r(t) + 1j * spl_i(t), 0.0)

    def __call__(self, t):
        return self._interp(t)

    def kernel_integral(self, kappa, shift, a, b):
        kappa = complex(kappa)
        shift, a, b = np.broadcast_arrays(np.asarray(shift, float), np.asarray(a, float), np.asarray(b, float))
        val = np.zeros(shift.shape, complex)
        err = np.zeros(shift.shape)
        pts = self.grid.points
        for idx in np.ndindex(shift.shape):
            lo, hi = max(a[idx], self.grid.lo), min(b[idx], self.grid.hi)
            if not lo < hi:
                continue
            # grid points within roundoff of an endpoint would create a sliver panel
            eps = 1e-6 * self.grid.h
            sel = (pts > lo + eps) & (pts < hi - eps)
            t = np.concatenate(([lo], pts[sel], [hi]))
            ends = self._interp(np.array([lo, hi]))
            y = np.concatenate(([ends[0]], self.values[sel], [ends[1]]))
            with np.errstate(under="ignore"):
                y = y * np.exp(kappa * (t - shift[idx]))
            val[idx], err[idx] = _simpson_richardson(t, y)
        return (val if val.ndim else complex(val)), err

    def l2_norm(self) -> float:
        v, _ = _simpson_richardson(self.grid.points, np.abs(self.values) ** 2)
        return math.sqrt(abs(v))

    def conj(self):
        return GridSource(self.grid, self.values.conj())

    def reflect(self):
        g = Grid(-self.grid.hi, -self.grid.lo, self.grid.h)
        return GridSource(g, self.values[::-1])


def as_source(f) -> SourceFunction:
    if isinstance(f, SourceFunction):
        return f
    if isinstance(f, PiecewiseExp):
        return PiecewiseSource(f)
    raise TypeError(f"cannot use {type(f).__name__} as a source")


# ---------------------------------------------------------------- operators


def _checked(val, err, tol):
    err = np.asarray(err)
    if tol is not None and err.size:
        scale = np.maximum(1.0, np.abs(val))
        worst = float(np.max(err / scale))
        if worst > tol:
            raise QuadratureError(worst, tol)
    return val


def _left_right(src, zeta, x, a=-INF, b=INF):
    """(int_a^x e^{zeta(t-x)} f, int_x^b e^{-zeta(t-x)} f) with errors summed."""
    lo = np.minimum(x, b)
    hi = np.maximum(x, a)
    left, e1 = src.kernel_integral(zeta, x, a, lo)
    right, e2 = src.kernel_integral(-zeta, x, hi, b)
    return np.asarray(left), np.asarray(right), np.asarray(e1) + np.asarray(e2)


def apply_phi(zeta, f, x, tol=DEFAULT_GRID_TOL):
    """Full-line resolvent (2 zeta)^-1 int exp(-zeta|x-t|) f(t) dt at the points ``x``."""
    zeta = _check_zeta(zeta)
    src = as_source(f)
    x = np.asarray(x, float)
    left, right, err = _left_right(src, zeta, x)
    val = (left + right) / (2 * zeta)
    _checked(val, err / (2 * abs(zeta)), tol)
    return val if val.ndim else complex(val)


def apply_phi_derivative(zeta, f, x, tol=DEFAULT_GRID_TOL):
    """d/dx of :func:`apply_phi`; continuous everywhere since Phi f has no jumps."""
    zeta = _check_zeta(zeta)
    src = as_source(f)
    x = np.asarray(x, float)
    left, right, err = _left_right(src, zeta, x)
    val = (right - left) / 2
    _checked(val, err, tol)
    return val if val.ndim else complex(val)


def _circ_parts(src, zeta, x):
    """Value and derivative pieces of the Dirichlet resolvent, split by sign of x."""
    pos = x >= 0
    xs = np.where(pos, x, 0.0)
    xn = np.where(pos, 0.0, x)
    # x >= 0: kernel exp(-zeta|x-t|) - exp(-zeta(x+t)) on t > 0
    lp, rp, ep = _left_right(src, zeta, xs, a=0.0)
    ip, eip = src.kernel_integral(-zeta, -xs, 0.0, INF)
    # x < 0: kernel exp(-zeta|x-t|) - exp(zeta(x+t)) on t < 0
    ln, rn, en = _left_right(src, zeta, xn, b=0.0)
    in_, ein = src.kernel_integral(zeta, -xn, -INF, 0.0)
    val = np.where(pos, lp + rp - ip, ln + rn - in_)
    der = np.where(pos, rp - lp + np.asarray(ip), rn - ln - np.asarray(in_))
    err = np.where(pos, ep + eip, en + ein)
    return val, der, err


def apply_phi_circ(zeta, f, x, tol=DEFAULT_GRID_TOL):
    """Resolvent on the line cut at 0 with u(0) = 0, from the half-line image kernels."""
    zeta = _check_zeta(zeta)
    src = as_source(f)
    x = np.asarray(x, float)
    val, _, err = _circ_parts(src, zeta, x)
    val = val / (2 * zeta)
    _checked(val, err / (2 * abs(zeta)), tol)
    return val if val.ndim else complex(val)


def apply_phi_circ_derivative(zeta, f, x, tol=DEFAULT_GRID_TOL):
    """One-sided (x = 0 counts as the right side) derivative of :func:`apply_phi_circ`."""
    zeta = _check_zeta(zeta)
    src = as_source(f)
    x = np.asarray(x, float)
    _, der, err = _circ_parts(src, zeta, x)
    val = der / 2
    _checked(val, err, tol)
    return val if val.ndim else complex(val)


@dataclass(frozen=True)
class RankOneQ:
    """Q f = coefficient * g_zeta with g_zeta(x) = exp(-zeta|x|)."""

    coefficient: complex
    zeta: complex

    def __call__(self, x):
        x = np.asarray(x, float)
        return self.coefficient * np.exp(-self.zeta * np.abs(x))

    def kernel(self) -> PiecewiseExp:
        return PiecewiseExp.exponentials([(1.0, self.zeta, 0.0, -INF, 0.0), (1.0, -self.zeta, 0.0, 0.0, INF)])


def g_pairing(zeta, f, tol=DEFAULT_GRID_TOL) -> complex:
    """Bilinear pairing int g_zeta f (no conjugation)."""
    zeta = _check_zeta(zeta)
    src = as_source(f)
    left, e1 = src.kernel_integral(zeta, 0.0, -INF, 0.0)
    right, e2 = src.kernel_integral(-zeta, 0.0, 0.0, INF)
    val = complex(left + right)
    _checked(val, np.asarray(e1) + np.asarray(e2), tol)
    return val


def apply_q(zeta, f, tol=DEFAULT_GRID_TOL):
    """(coefficient, kernel handle) with Q f = coefficient * g_zeta."""
    zeta = _check_zeta(zeta)
    coef = -g_pairing(zeta, f, tol) / (2 * zeta)
    return coef, RankOneQ(coef, zeta)


def q_operator_norm(zeta) -> float:
    """||Q|| = |2 zeta|^-1 ||g||^2 = (2 |zeta| Re zeta)^-1."""
    zeta = _check_zeta(zeta)
    return 1.0 / (2 * abs(zeta) * zeta.real)


def schur_norm_bound(zeta) -> float:
    """Schur-test bound for the kernel (2 zeta)^-1 exp(-zeta|x-t|): both row and column integrals are 1/(|zeta| Re zeta)."""
    zeta = _check_zeta(zeta)
    return 1.0 / (abs(zeta) * zeta.real)


def gaussian_phi_pairing(zeta, f: GaussianSource, h: GaussianSource) -> complex:
    """int h(x) (Phi f)(x) dx for two Gaussian sources, in closed form.

    The cross-correlation of two Gaussians is a Gaussian, so the double integral
    collapses to one exponential-kernel integral of that Gaussian.
    """
    zeta = _check_zeta(zeta)
    S = math.hypot(f.width, h.width)
    amp = f.amp * h.amp * math.sqrt(2 * math.pi) * f.width * h.width / S
    cross = GaussianSource(amp, h.center - f.center, S)
    return g_pairing(zeta, cross) / (2 * zeta)


__all__ = [
    "QuadratureError", "SourceFunction", "PiecewiseSource", "GaussianSource", "GridSource", "Grid",
    "cubic_bump", "as_source", "apply_phi", "apply_phi_derivative", "apply_phi_circ",
    "apply_phi_circ_derivative", "apply_q", "g_pairing", "RankOneQ", "q_operator_norm",
    "schur_norm_bound", "gaussian_phi_pairing",
]
