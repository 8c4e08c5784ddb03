"""Piecewise exponential-polynomial functions on the real line.

Every function the model produces in closed form (the bases phi, the kernel
g = exp(-zeta|x|), the free resolvents applied to them, compactly supported
polynomial bumps) is a finite sum of terms ``c * x**k * exp(s * x)`` on each
interval between breakpoints. Products, integrals and the free Green operators
act on this class exactly through antiderivatives.
"""

from __future__ import annotations

import math

import numpy as np

INF = math.inf

# |s| * span below this switches to the power series of exp(s t)
_SERIES_SWITCH = 1.0
_SERIES_TERMS = 48


def _antiderivative_terms(k: int, s: complex):
    """Terms (coef, power) with d/dt[exp(s t) * sum coef t**power] = t**k exp(s t)."""
    out = []
    fact = 1.0
    for j in range(k + 1):
        out.append(((-1) ** j * fact / s ** (j + 1), k - j))
        fact *= k - j
    return out


def power_exp_integral(k: int, s, lo, hi, offset=0.0):
    """Integral of t**k * exp(s t + offset) over [lo, hi], broadcasting s, lo, hi, offset.

    Infinite endpoints are allowed when the integrand decays there; otherwise
    ``ValueError`` is raised.
    """
    s, lo, hi, offset = np.broadcast_arrays(
        np.asarray(s, dtype=complex), np.asarray(lo, dtype=float),
        np.asarray(hi, dtype=float), np.asarray(offset, dtype=complex))
    out = np.zeros(s.shape, dtype=complex)
    finite = np.isfinite(lo) & np.isfinite(hi)
    span = np.where(finite, np.maximum(np.abs(np.where(finite, lo, 0.0)),
                                       np.abs(np.where(finite, hi, 0.0))), INF)
    small = finite & (np.abs(s) * np.where(finite, span, 1.0) < _SERIES_SWITCH)
    if np.any(small):
        ss, lo_s, hi_s = s[small], lo[small], hi[small]
        acc = np.zeros(ss.shape, dtype=complex)
        term = np.ones(ss.shape, dtype=complex)
        for j in range(_SERIES_TERMS):
            p = k + j + 1
            acc += term * (hi_s**p - lo_s**p) / p
            term = term * ss / (j + 1)
        out[small] = acc * np.exp(offset[small])
    big = ~small
    if np.any(big):
        sb, lo_b, hi_b, off = s[big], lo[big], hi[big], offset[big]
        if np.any((sb == 0) & ~(np.isfinite(lo_b) & np.isfinite(hi_b))):
            raise ValueError("divergent integral: polynomial term on an infinite interval")
        if np.any(np.isposinf(hi_b) & (sb.real >= 0)) or np.any(np.isneginf(lo_b) & (sb.real <= 0)):
            raise ValueError("divergent integral: non-decaying exponential on an infinite interval")
        val = np.zeros(sb.shape, dtype=complex)
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            for bound, sign in ((hi_b, 1.0), (lo_b, -1.0)):
                fin = np.isfinite(bound)
                if not np.any(fin):
                    continue
                t = bound[fin]
                sv = sb[fin]
                e = np.exp(sv * t + off[fin])
                poly = np.zeros(t.shape, dtype=complex)
                fact = 1.0
                for j in range(k + 1):
                    poly += (-1) ** j * fact * t ** (k - j) / sv ** (j + 1)
                    fact *= k - j
                contrib = np.zeros(sb.shape, dtype=complex)
                contrib[fin] = e * poly
                val += sign * contrib
        out[big] = val
    return out


def _empty():
    return (np.zeros(0, complex), np.zeros(0, int), np.zeros(0, complex))


class PiecewiseExp:
    """Sum of ``c * x**k * exp(s * x)`` terms on each interval between ``breaks``.

    ``breaks`` starts with -inf and ends with +inf; ``pieces[i]`` holds the term
    arrays (c, k, s) valid on (breaks[i], breaks[i + 1]).
    """

    __slots__ = ("breaks", "pieces")

    def __init__(self, breaks, pieces):
        self.breaks = tuple(float(b) for b in breaks)
        if self.breaks[0] != -INF or self.breaks[-1] != INF:
            raise ValueError("breaks must start at -inf and end at +inf")
        if len(pieces) != len(self.breaks) - 1:
            raise ValueError("need one piece per interval")
        self.pieces = [(np.asarray(c, complex).ravel(), np.asarray(k, int).ravel(),
                        np.asarray(s, complex).ravel()) for c, k, s in pieces]

    # -- construction -------------------------------------------------
    @classmethod
    def zero(cls):
        return cls((-INF, INF), [_empty()])

    @classmethod
    def from_terms(cls, terms):
        """Build from ``(coef, power, rate, a, b)``: coef * x**power * exp(rate x) on [a, b]."""
        pts = sorted({float(t[3]) for t in terms} | {float(t[4]) for t in terms} | {-INF, INF})
        pieces = []
        for lo, hi in zip(pts[:-1], pts[1:]):
            sel = [t for t in terms if t[3] <= lo and hi <= t[4]]
            pieces.append((np.array([t[0] for t in sel], complex), np.array([t[1] for t in sel], int),
                           np.array([t[2] for t in sel], complex)))
        return cls(pts, pieces)

    @classmethod
    def exponentials(cls, terms):
        """Build from ``(coef, rate, shift, a, b)``: coef * exp(rate (x - shift)) on [a, b]."""
        return cls.from_terms([(c * np.exp(-rate * shift), 0, rate, a, b) for c, rate, shift, a, b in terms])

    @classmethod
    def polynomial(cls, coeffs, a: float, b: float, center: float = 0.0):
        """sum_j coeffs[j] * (x - center)**j on [a, b], zero elsewhere."""
        pw = np.zeros(len(coeffs), complex)
        for j, cj in enumerate(coeffs):
            for i in range(j + 1):
                pw[i] += cj * math.comb(j, i) * (-center) ** (j - i)
        return cls.from_terms([(pw[i], i, 0.0, a, b) for i in range(len(pw)) if pw[i] != 0])

    # -- structure ------------------------------------------------------
    def refine(self, points) -> "PiecewiseExp":
        pts = sorted(set(self.breaks) | {float(p) for p in points})
        if len(pts) == len(self.breaks):
            return self
        pieces = []
        for lo, hi in zip(pts[:-1], pts[1:]):
            i = self._piece_index(0.5 * (lo + hi) if np.isfinite(lo + hi) else (hi - 1 if np.isfinite(hi) else lo + 1))
            pieces.append(self.pieces[i])
        return PiecewiseExp(pts, pieces)

    def _piece_index(self, x: float, side: int = 1) -> int:
        b = np.asarray(self.breaks[1:-1])
        return int(np.searchsorted(b, x, side="right" if side > 0 else "left"))

    def _aligned(self, other: "PiecewiseExp"):
        pts = set(self.breaks) | set(other.breaks)
        return self.refine(pts), other.refine(pts)

    def simplify(self, tol: float = 0.0) -> "PiecewiseExp":
        """Merge terms with equal (power, rate) and drop zero coefficients."""
        pieces = []
        for c, k, s in self.pieces:
            acc: dict = {}
            for ci, ki, si in zip(c, k, s):
                key = (int(ki), si.real, si.imag)
                acc[key] = acc.get(key, 0) + ci
            keys = [key for key, v in acc.items() if abs(v) > tol]
            pieces.append((np.array([acc[key] for key in keys], complex), np.array([key[0] for key in keys], int),
                           np.array([complex(key[1], key[2]) for key in keys], complex)))
        return PiecewiseExp(self.breaks, pieces)

    def restrict(self, lo: float, hi: float) -> "PiecewiseExp":
        f = self.refine([p for p in (lo, hi) if np.isfinite(p)])
        pieces = [pc if (a >= lo and b <= hi) else _empty()
                  for pc, a, b in zip(f.pieces, f.breaks[:-1], f.breaks[1:])]
        return PiecewiseExp(f.breaks, pieces)

    def reflect(self) -> "PiecewiseExp":
        """x -> -x."""
        breaks = [-b for b in reversed(self.breaks)]
        pieces = [(c * (-1.0) ** k, k, -s) for c, k, s in reversed(self.pieces)]
        return PiecewiseExp(breaks, pieces)

    # -- arithmetic -----------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, PiecewiseExp):
            return NotImplemented
        a, b = self._aligned(other)
        pieces = [(np.concatenate([pa[0], pb[0]]), np.concatenate([pa[1], pb[1]]), np.concatenate([pa[2], pb[2]]))
                  for pa, pb in zip(a.pieces, b.pieces)]
        return PiecewiseExp(a.breaks, pieces).simplify()

    def __neg__(self):
        return PiecewiseExp(self.breaks, [(-c, k, s) for c, k, s in self.pieces])

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, PiecewiseExp):
            return self.times(scalar)
        return PiecewiseExp(self.breaks, [(c * scalar, k, s) for c, k, s in self.pieces])

    __rmul__ = __mul__

    def times(self, other: "PiecewiseExp") -> "PiecewiseExp":
        a, b = self._aligned(other)
        pieces = []
        for (ca, ka, sa), (cb, kb, sb) in zip(a.pieces, b.pieces):
            pieces.append(((ca[:, None] * cb[None, :]).ravel(), (ka[:, None] + kb[None, :]).ravel(),
                           (sa[:, None] + sb[None, :]).ravel()))
        return PiecewiseExp(a.breaks, pieces).simplify()

    def conj(self) -> "PiecewiseExp":
        return PiecewiseExp(self.breaks, [(c.conj(), k, s.conj()) for c, k, s in self.pieces])

    # -- evaluation -----------------------------------------------------
    def __call__(self, x, side: int = 1):
        """Values at ``x``; at a breakpoint ``side`` picks the right (+1) or left (-1) limit."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        b = np.asarray(self.breaks[1:-1])
        idx = np.searchsorted(b, x, side="right" if side > 0 else "left")
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            for i, (c, k, s) in enumerate(self.pieces):
                sel = idx == i
                if not np.any(sel) or c.size == 0:
                    continue
                xs = x[sel][:, None]
                out[sel] = np.sum(c * xs**k * np.exp(s * xs), axis=1)
        return out

    def derivative(self) -> "PiecewiseExp":
        pieces = []
        for c, k, s in self.pieces:
            keep = k > 0
            pieces.append((np.concatenate([c[keep] * k[keep], c * s]), np.concatenate([k[keep] - 1, k]),
                           np.concatenate([s[keep], s])))
        return PiecewiseExp(self.breaks, pieces).simplify()

    # -- integrals ------------------------------------------------------
    def integral(self, lo: float = -INF, hi: float = INF) -> complex:
        total = 0j
        for (c, k, s), a, b in zip(self.pieces, self.breaks[:-1], self.breaks[1:]):
            a, b = max(a, lo), min(b, hi)
            if a >= b or c.size == 0:
                continue
            for kk in np.unique(k):
                sel = k == kk
                total += np.sum(c[sel] * power_exp_integral(int(kk), s[sel], a, b))
        return complex(total)

    def bilinear(self, other: "PiecewiseExp") -> complex:
        """Integral of self * other (no conjugation)."""
        return self.times(other).integral()

    def inner(self, other: "PiecewiseExp") -> complex:
        """L^2 scalar product: integral of self * conj(other)."""
        return self.times(other.conj()).integral()

    def norm_sq(self) -> float:
        return float(self.inner(self).real)

    def norm(self) -> float:
        return math.sqrt(max(self.norm_sq(), 0.0))

    def exp_integral(self, kappa, a=-INF, b=INF, shift=0.0):
        """Integral of exp(kappa (t - shift)) * self(t) over [a, b]; broadcasts a, b, shift."""
        a, b, shift = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(shift, float))
        out = np.zeros(a.shape, dtype=complex)
        kappa = complex(kappa)
        for (c, k, s), lo_p, hi_p in zip(self.pieces, self.breaks[:-1], self.breaks[1:]):
            if c.size == 0:
                continue
            lo = np.maximum(a, lo_p)
            hi = np.minimum(b, hi_p)
            ok = lo < hi
            if not np.any(ok):
                continue
            for ci, ki, si in zip(c, k, s):
                val = power_exp_integral(int(ki), si + kappa, lo[ok], hi[ok], -kappa * shift[ok])
                out[ok] += ci * val
        return out if out.ndim else complex(out)

    def __repr__(self):
        n = sum(len(p[0]) for p in self.pieces)
        return f"PiecewiseExp({len(self.pieces)} pieces, {n} terms)"


def _green_half(f: PiecewiseExp, zeta: complex, lo: float, hi: float) -> PiecewiseExp:
    """(2 zeta)^-1 * integral_lo^hi exp(-zeta |x - t|) f(t) dt for x in [lo, hi]."""
    f = f.restrict(lo, hi)
    breaks = f.breaks
    inside = [(i, a, b) for i, (a, b) in enumerate(zip(breaks[:-1], breaks[1:])) if a >= lo and b <= hi]
    # accumulated integrals of exp(+zeta t) f from the left and exp(-zeta t) f from the right
    left = {}
    acc = 0j
    for j, (i, a, b) in enumerate(inside):
        left[i] = acc
        if j < len(inside) - 1:
            acc += f.exp_integral(zeta, a, b)
    right = {}
    acc = 0j
    for j, (i, a, b) in enumerate(reversed(inside)):
        right[i] = acc
        if j < len(inside) - 1:
            acc += f.exp_integral(-zeta, a, b)

    pref = 1.0 / (2.0 * zeta)
    pieces = [_empty() for _ in f.pieces]
    for i, a, b in inside:
        c, k, s = f.pieces[i]
        cs, ks, ss = [], [], []
        # exp(-zeta x) * [A_i + integral_a^x exp(zeta t) f]
        const_left = left[i]
        for ci, ki, si in zip(c, k, s):
            sig = si + zeta
            if abs(sig) <= 1e-13 * abs(zeta):
                cs.append(ci / (ki + 1)); ks.append(ki + 1); ss.append(-zeta)
                if np.isfinite(a):
                    const_left -= ci * a ** (ki + 1) / (ki + 1)
            else:
                for coef, pw in _antiderivative_terms(int(ki), sig):
                    cs.append(ci * coef); ks.append(pw); ss.append(si)
                    if np.isfinite(a):
                        const_left -= ci * coef * a**pw * np.exp(sig * a)
        cs.append(const_left); ks.append(0); ss.append(-zeta)
        # exp(zeta x) * [B_i + integral_x^b exp(-zeta t) f]
        const_right = right[i]
        for ci, ki, si in zip(c, k, s):
            sig = si - zeta
            if abs(sig) <= 1e-13 * abs(zeta):
                cs.append(-ci / (ki + 1)); ks.append(ki + 1); ss.append(zeta)
                if np.isfinite(b):
                    const_right += ci * b ** (ki + 1) / (ki + 1)
            else:
                for coef, pw in _antiderivative_terms(int(ki), sig):
                    cs.append(-ci * coef); ks.append(pw); ss.append(si)
                    if np.isfinite(b):
                        const_right += ci * coef * b**pw * np.exp(sig * b)
        cs.append(const_right); ks.append(0); ss.append(zeta)
        pieces[i] = (pref * np.array(cs, complex), np.array(ks, int), np.array(ss, complex))
    return PiecewiseExp(breaks, pieces).simplify()


def green_full(f: PiecewiseExp, zeta: complex) -> PiecewiseExp:
    """Free full-line resolvent: (2 zeta)^-1 * integral exp(-zeta |x - t|) f(t) dt."""
    return _green_half(f, complex(zeta), -INF, INF)


def green_dirichlet(f: PiecewiseExp, zeta: complex) -> PiecewiseExp:
    """Free resolvent with u(0) = 0, built from the image kernels on each half-line."""
    zeta = complex(zeta)
    f = f.refine([0.0])
    out = _green_half(f, zeta, 0.0, INF) + _green_half(f, zeta, -INF, 0.0)
    b0 = f.exp_integral(-zeta, 0.0, INF)
    a0 = f.exp_integral(zeta, -INF, 0.0)
    pref = 1.0 / (2.0 * zeta)
    image = PiecewiseExp.from_terms([(-pref * b0, 0, -zeta, 0.0, INF), (-pref * a0, 0, zeta, -INF, 0.0)])
    return out + image


def kernel_g(zeta: complex) -> PiecewiseExp:
    """g(x) = exp(-zeta |x|)."""
    zeta = complex(zeta)
    return PiecewiseExp.from_terms([(1.0, 0, zeta, -INF, 0.0), (1.0, 0, -zeta, 0.0, INF)])


def rank_one_q(f: PiecewiseExp, zeta: complex) -> PiecewiseExp:
    """Q f = -(2 zeta)^-1 g * integral g f, the difference of the two free resolvents."""
    zeta = complex(zeta)
    g = kernel_g(zeta)
    return g * (-g.bilinear(f) / (2.0 * zeta))
