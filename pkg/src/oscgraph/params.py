"""Model parameters, channel scalars, the square-root branch and Hermite functions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

SQRT2 = math.sqrt(2.0)


class BranchPointError(ValueError):
    """Raised when r - Lambda vanishes or lies on the branch cut."""


class MuUndefinedError(ValueError):
    """Raised when a formula needs mu = sqrt(2)/alpha but alpha = 0."""


@dataclass(frozen=True)
class ModelParams:
    """Coupling strengths and oscillator frequencies of the two-oscillator model.

    The couplings may be given as ints, floats, ``fractions.Fraction`` or sympy
    numbers; regime classification keeps them exact, numerical code casts to float.
    """

    alpha_plus: float = 0.0
    alpha_minus: float = 0.0
    nu_plus: float = 1.0
    nu_minus: float = 1.0

    def __post_init__(self):
        if not (self.nu_plus > 0 and self.nu_minus > 0):
            raise ValueError("oscillator frequencies must be positive")
        if self.alpha_plus < 0 or self.alpha_minus < 0:
            raise ValueError("couplings must be nonnegative (use |alpha|, the sign is irrelevant)")

    @property
    def mu_plus(self) -> float:
        return _mu(self.alpha_plus)

    @property
    def mu_minus(self) -> float:
        return _mu(self.alpha_minus)

    @property
    def floats(self) -> tuple[float, float, float, float]:
        return (float(self.alpha_plus), float(self.alpha_minus),
                float(self.nu_plus), float(self.nu_minus))

    @property
    def coupled(self) -> bool:
        return float(self.alpha_plus) > 0 and float(self.alpha_minus) > 0

    def mirrored(self) -> "ModelParams":
        """Parameters after x -> -x, which swaps the two oscillators."""
        return ModelParams(self.alpha_minus, self.alpha_plus, self.nu_minus, self.nu_plus)


def _mu(alpha) -> float:
    a = float(alpha)
    if a == 0.0:
        raise MuUndefinedError("mu undefined: alpha = 0 (use the decoupled path)")
    return SQRT2 / a


class ChannelIndex(NamedTuple):
    m: int
    n: int


class ChannelScalars(NamedTuple):
    r: float
    zeta: complex
    p: complex
    q_plus: float
    q_minus: float


def channel_energy(params: ModelParams, idx) -> float:
    """Threshold r_{m,n} = nu_+^2 (m + 1/2) + nu_-^2 (n + 1/2). Vectorises over m, n."""
    m, n = idx
    _, _, nup, num = params.floats
    return nup**2 * (m + 0.5) + num**2 * (n + 0.5)


def zeta_branch(r, Lambda):
    """Square root of r - Lambda with Re > 0 and Im(Lambda) * Im(zeta) <= 0.

    Accepts scalar or array ``r``. Raises :class:`BranchPointError` when
    r - Lambda is zero or a nonpositive real number.
    """
    w = np.asarray(r, dtype=float) - complex(Lambda)
    bad = (w.imag == 0) & (w.real <= 0)
    if np.any(bad):
        raise BranchPointError(f"branch point: r - Lambda = {w[bad].ravel()[0]} is not in C minus (-inf, 0]")
    z = np.sqrt(w)
    # principal root already has Re > 0 off the cut; the flip only guards roundoff
    z = np.where(z.real < 0, -z, z)
    if np.any(complex(Lambda).imag * z.imag > 0):
        raise AssertionError("branch rule violated")
    return complex(z) if z.ndim == 0 else z


def q_plus(params: ModelParams, m, n):
    """Off-diagonal entry m^{1/2} r_{m,n}^{1/4} r_{m-1,n}^{1/4}; zero for m = 0."""
    m = np.asarray(m)
    r = channel_energy(params, (m, n))
    r_prev = channel_energy(params, (np.maximum(m - 1, 0), n))
    return np.sqrt(m) * r**0.25 * r_prev**0.25


def q_minus(params: ModelParams, m, n):
    n = np.asarray(n)
    r = channel_energy(params, (m, n))
    r_prev = channel_energy(params, (m, np.maximum(n - 1, 0)))
    return np.sqrt(n) * r**0.25 * r_prev**0.25


def channel_scalars(params: ModelParams, idx, Lambda) -> ChannelScalars:
    m, n = idx
    if m < 0 or n < 0:
        raise ValueError("channel indices must be nonnegative")
    r = float(channel_energy(params, (m, n)))
    z = zeta_branch(r, Lambda)
    return ChannelScalars(r, z, z * math.sqrt(r), float(q_plus(params, m, n)),
                          float(q_minus(params, m, n)))


def hermite_chi(n: int, q):
    """L^2-normalised Hermite function chi_n(q) by the upward three-term recurrence."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return hermite_chi_all(n, q)[n]


def hermite_chi_all(n_max: int, q) -> np.ndarray:
    """Rows chi_0 .. chi_{n_max} evaluated at ``q`` (shape (n_max + 1,) + shape(q))."""
    q = np.asarray(q, dtype=float)
    out = np.empty((n_max + 1,) + q.shape)
    out[0] = np.pi**-0.25 * np.exp(-0.5 * q * q)
    if n_max >= 1:
        out[1] = SQRT2 * q * out[0]
    for k in range(1, n_max):
        out[k + 1] = (SQRT2 * q * out[k] - math.sqrt(k) * out[k - 1]) / math.sqrt(k + 1)
    return out
