"""Homogeneous-solution bases on the line and on the half-lines.

``FULL_PLUS`` equals 1 at x = 1 and 0 at x = -1 and solves -v'' + zeta^2 v = 0
off x = +-1; ``HALF_PLUS`` is its counterpart that also vanishes at x = 0.
``FULL_MINUS``/``HALF_MINUS`` are the reflections x -> -x, and
``GAUSSIAN_KERNEL`` is g(x) = exp(-zeta |x|).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .piecewise import INF, PiecewiseExp

RESONANCE_TOL = 1e-12


class InteriorResonanceError(ValueError):
    """sinh(2 zeta) (full line) or sinh(zeta) (half line) is numerically zero."""


class BasisKind(enum.Enum):
    FULL_PLUS = "full+"
    FULL_MINUS = "full-"
    HALF_PLUS = "half+"
    HALF_MINUS = "half-"
    GAUSSIAN_KERNEL = "g"


def _check_zeta(zeta: complex) -> complex:
    zeta = complex(zeta)
    if not zeta.real > 0:
        raise ValueError(f"need Re zeta > 0, got {zeta}")
    return zeta


def _check_resonance(zeta: complex, half: bool):
    arg = zeta if half else 2 * zeta
    if arg.real < 20:  # beyond this |sinh| is astronomically large
        if abs(np.sinh(arg)) < RESONANCE_TOL:
            raise InteriorResonanceError(f"interior resonance at zeta = {zeta}")


@dataclass(frozen=True)
class BasisFunction:
    kind: BasisKind
    zeta: complex

    def __post_init__(self):
        z = _check_zeta(self.zeta)
        object.__setattr__(self, "zeta", z)
        if self.kind in (BasisKind.FULL_PLUS, BasisKind.FULL_MINUS):
            _check_resonance(z, half=False)
        elif self.kind in (BasisKind.HALF_PLUS, BasisKind.HALF_MINUS):
            _check_resonance(z, half=True)

    def exp_terms(self):
        """Pieces ``(coef, rate, shift, a, b)`` meaning coef * exp(rate (x - shift)) on [a, b].

        Shifts keep every exponent nonpositive on its interval, so evaluation
        never overflows however large Re zeta is.
        """
        z = self.zeta
        kind = self.kind
        if kind is BasisKind.GAUSSIAN_KERNEL:
            return [(1.0, z, 0.0, -INF, 0.0), (1.0, -z, 0.0, 0.0, INF)]
        if kind in (BasisKind.FULL_PLUS, BasisKind.FULL_MINUS):
            d = 1.0 / (1.0 - np.exp(-4 * z))
            # sinh(z(x+1))/sinh(2z) = (e^{z(x-1)} - e^{-z(x+3)}) / (1 - e^{-4z})
            terms = [(d, z, 1.0, -1.0, 1.0), (-d, -z, -3.0, -1.0, 1.0), (1.0, -z, 1.0, 1.0, INF)]
        else:
            d = 1.0 / (1.0 - np.exp(-2 * z))
            # sinh(zx)/sinh(z) = (e^{z(x-1)} - e^{-z(x+1)}) / (1 - e^{-2z})
            terms = [(d, z, 1.0, 0.0, 1.0), (-d, -z, -1.0, 0.0, 1.0), (1.0, -z, 1.0, 1.0, INF)]
        if kind in (BasisKind.FULL_MINUS, BasisKind.HALF_MINUS):
            terms = [(c, -rate, -shift, -b, -a) for c, rate, shift, a, b in terms]
        return terms

    def __call__(self, x, side: int = 1):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        with np.errstate(under="ignore"):
            for c, rate, shift, a, b in self.exp_terms():
                sel = _in_piece(x, a, b, side)
                out[sel] += c * np.exp(rate * (x[sel] - shift))
        return out

    def derivative(self, x, side: int = 1):
        """One-sided derivative; ``side`` = +1 takes the right limit at breakpoints."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        with np.errstate(under="ignore"):
            for c, rate, shift, a, b in self.exp_terms():
                sel = _in_piece(x, a, b, side)
                out[sel] += c * rate * np.exp(rate * (x[sel] - shift))
        return out

    def to_piecewise(self) -> PiecewiseExp:
        return PiecewiseExp.exponentials(self.exp_terms())


def _in_piece(x, a, b, side):
    if side > 0:
        return (x >= a) & (x < b) if np.isfinite(b) else (x >= a)
    return (x > a) & (x <= b) if np.isfinite(a) else (x <= b)


def full_pair(zeta):
    return BasisFunction(BasisKind.FULL_PLUS, zeta), BasisFunction(BasisKind.FULL_MINUS, zeta)


def half_pair(zeta):
    return BasisFunction(BasisKind.HALF_PLUS, zeta), BasisFunction(BasisKind.HALF_MINUS, zeta)


def evaluate(b: BasisFunction, x):
    return b(x)


def norm_sq_full(zeta):
    """||phi^+||^2 = 1/(2g) + (g^-1 sinh 4g - d^-1 sin 4d) / (4 (sinh^2 2g + sin^2 2d)).

    Written with e = exp(-4 gamma) factored out so it stays finite for large
    gamma; at delta = 0 the ratio sin(4 delta)/delta is replaced by its limit 4
    (via ``np.sinc``). Vectorises over ``zeta``.
    """
    zeta = np.asarray(zeta, dtype=complex)
    g, d = zeta.real, zeta.imag
    e = np.exp(-4 * g)
    sin4_over_d = 4 * np.sinc(4 * d / np.pi)
    s2 = np.sin(2 * d) ** 2
    val = 0.5 / g + (0.5 * (1 - e * e) / g - sin4_over_d * e) / ((1 - e) ** 2 + 4 * s2 * e)
    return float(val) if val.ndim == 0 else val


def overlap_full(zeta):
    """(phi^+, phi^-) in L^2; real by reflection symmetry. Vectorises over ``zeta``.

    Closed form [cosh 2g sin 2d / d - cos 2d sinh 2g / g] / (2 |sinh 2 zeta|^2),
    rescaled by exp(-4 gamma) for stability.
    """
    zeta = np.asarray(zeta, dtype=complex)
    g, d = zeta.real, zeta.imag
    e = np.exp(-4 * g)
    sin2_over_d = 2 * np.sinc(2 * d / np.pi)
    num = 0.5 * (1 + e) * sin2_over_d - np.cos(2 * d) * (1 - e) / (2 * g)
    den = 2 * (0.25 * (1 - e) ** 2 + e * np.sin(2 * d) ** 2)
    val = np.exp(-2 * g) * num / den
    return float(val) if val.ndim == 0 else val


def norm_sq_half(zeta):
    """||phi^{o,+}||^2 = 1/(2g) + (sinh 2g/(2g) - sin 2d/(2d)) / (2 (sinh^2 g + sin^2 d))."""
    zeta = np.asarray(zeta, dtype=complex)
    g, d = zeta.real, zeta.imag
    e = np.exp(-2 * g)
    sin_ratio = np.sinc(2 * d / np.pi)
    val = 0.5 / g + (0.5 * (1 - e * e) / (2 * g) - sin_ratio * e) / (0.5 * ((1 - e) ** 2 + 4 * np.sin(d) ** 2 * e))
    return float(val) if val.ndim == 0 else val


def gram_full(zeta) -> np.ndarray:
    """Gram matrix G_ij = (phi_j, phi_i) of (phi^+, phi^-), shape zeta.shape + (2, 2)."""
    a = np.asarray(norm_sq_full(zeta))
    b = np.asarray(overlap_full(zeta))
    return np.stack([np.stack([a, b], -1), np.stack([b, a], -1)], -2).astype(complex)


def gram_half(zeta) -> np.ndarray:
    """Gram matrix of (phi^{o,+}, phi^{o,-}); diagonal because the supports are disjoint."""
    a = np.asarray(norm_sq_half(zeta))
    z = np.zeros_like(a)
    return np.stack([np.stack([a, z], -1), np.stack([z, a], -1)], -2).astype(complex)


def jump_full(C_plus, C_minus, zeta):
    """([v'](1), [v'](-1)) for v = C_+ phi^+ + C_- phi^-, using v(1) = C_+, v(-1) = C_-."""
    zeta = np.asarray(zeta, dtype=complex)
    e2 = np.exp(-2 * zeta)
    f = -2 * zeta / (1 - e2 * e2)
    return f * (C_plus - e2 * C_minus), f * (C_minus - e2 * C_plus)


def jump_half(C, zeta, side: int = 1):
    """[v'](side) for v in the half-line space with v(side) = C."""
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    zeta = np.asarray(zeta, dtype=complex)
    return -2 * zeta / (1 - np.exp(-2 * zeta)) * C


def basis_distance(zeta) -> float:
    """||phi^{o,+} - phi^+||_{L^2}, equal for the minus pair by reflection."""
    zeta = _check_zeta(zeta)
    diff = BasisFunction(BasisKind.HALF_PLUS, zeta).to_piecewise() - BasisFunction(BasisKind.FULL_PLUS, zeta).to_piecewise()
    return diff.norm()


def coeff_norm_bounds(C_plus, C_minus, zeta):
    """(gamma ||v||^2, |C_+|^2 + |C_-|^2) for v = C_+ phi^+ + C_- phi^-."""
    zeta = _check_zeta(zeta)
    c = np.array([C_plus, C_minus], dtype=complex)
    G = gram_full(zeta)
    v2 = float(np.real(c.conj() @ G.T @ c))
    return zeta.real * v2, float(np.sum(np.abs(c) ** 2))


def g_norm_sq(zeta) -> float:
    """||exp(-zeta|x|)||^2 = 1/Re zeta."""
    return 1.0 / _check_zeta(zeta).real


__all__ = [
    "BasisKind", "BasisFunction", "InteriorResonanceError", "full_pair", "half_pair", "evaluate",
    "norm_sq_full", "overlap_full", "norm_sq_half", "gram_full", "gram_half", "jump_full",
    "jump_half", "basis_distance", "coeff_norm_bounds", "g_norm_sq",
]
