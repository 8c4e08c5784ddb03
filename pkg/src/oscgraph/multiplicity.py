"""Multiplicity of the absolutely continuous spectrum and the coupling regimes.

Thresholds use the left-closed convention: a channel with threshold t counts
for lambda >= t. Below the a.c. spectrum the multiplicity is 0.

Regime boundaries sit at alpha / nu = sqrt(2), i.e. alpha^2 = 2 nu^2. The
comparison is exact for ints, ``fractions.Fraction`` and sympy numbers (so
``sympy.sqrt(2)`` is recognised as critical); plain floats are compared with
the relative tolerance :data:`CRIT_TOL`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

from .params import ModelParams

CRIT_TOL = 1e-12
INF = math.inf


class RegimeTag(enum.Enum):
    SubSub = "SubSub"
    CritSub = "CritSub"
    SubCrit = "SubCrit"
    CritCrit = "CritCrit"
    Supercritical = "Supercritical"


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    edge: float  # bottom of the a.c. spectrum, -inf when it is the whole line


def _is_sympy(x) -> bool:
    return type(x).__module__.startswith("sympy")


def criticality(alpha, nu) -> int:
    """Sign of alpha^2 - 2 nu^2: -1 subcritical, 0 critical, +1 supercritical."""
    if _is_sympy(alpha) or _is_sympy(nu):
        import sympy

        d = sympy.nsimplify(sympy.sympify(alpha) ** 2 - 2 * sympy.sympify(nu) ** 2)
        d = sympy.simplify(d)
        if d == 0:
            return 0
        return 1 if d > 0 else -1
    if isinstance(alpha, (int, Rational)) and isinstance(nu, (int, Rational)):
        d = Fraction(alpha) ** 2 - 2 * Fraction(nu) ** 2
        return (d > 0) - (d < 0)
    a, n = float(alpha), float(nu)
    d = a * a - 2 * n * n
    if abs(d) <= CRIT_TOL * max(1.0, 2 * n * n):
        return 0
    return 1 if d > 0 else -1


def classify(params: ModelParams, force: RegimeTag | str | None = None) -> Regime:
    """Regime and spectral edge; ``force`` overrides the detected tag (edge follows the tag)."""
    cp = criticality(params.alpha_plus, params.nu_plus)
    cm = criticality(params.alpha_minus, params.nu_minus)
    if force is not None:
        tag = RegimeTag(force) if not isinstance(force, RegimeTag) else force
    elif cp > 0 or cm > 0:
        tag = RegimeTag.Supercritical
    elif cp == 0 and cm == 0:
        tag = RegimeTag.CritCrit
    elif cp == 0:
        tag = RegimeTag.CritSub
    elif cm == 0:
        tag = RegimeTag.SubCrit
    else:
        tag = RegimeTag.SubSub
    nup2 = float(params.nu_plus) ** 2
    num2 = float(params.nu_minus) ** 2
    edge = {
        RegimeTag.SubSub: (nup2 + num2) / 2,
        RegimeTag.CritSub: num2 / 2,
        RegimeTag.SubCrit: nup2 / 2,
        RegimeTag.CritCrit: 0.0,
        RegimeTag.Supercritical: -INF,
    }[tag]
    return Regime(tag, edge)


def _free_one_osc(lam: float, nu: float) -> int:
    """Number of n >= 1 with lambda >= nu^2 (n - 1/2); the bracket -nu^2/2 <= lambda - nu^2 n < nu^2/2."""
    nu2 = nu * nu
    if lam < nu2 / 2:
        return 0
    return int(math.floor(lam / nu2 + 0.5))


def mult_one_osc(lam, alpha, nu, crit: int | None = None):
    """Multiplicity for one oscillator with coupling alpha and frequency nu.

    ``crit`` (-1, 0, +1) overrides the detected criticality of alpha / nu.
    """
    lam = float(lam)
    if float(nu) <= 0:
        raise ValueError("nu must be positive")
    free = _free_one_osc(lam, float(nu))
    c = crit if crit is not None else (criticality(alpha, nu) if float(alpha) > 0 else -1)
    if c < 0:
        return free
    if c == 0:
        return free + 1 if lam >= 0 else 0
    return free + 1


def _one_osc_edge(nu, c: int) -> float:
    return float(nu) ** 2 / 2 if c < 0 else (0.0 if c == 0 else -INF)


_TAG_CRIT = {
    RegimeTag.SubSub: (-1, -1), RegimeTag.CritSub: (0, -1), RegimeTag.SubCrit: (-1, 0),
    RegimeTag.CritCrit: (0, 0),
}


def mult_two_osc(lam, params: ModelParams, force: RegimeTag | str | None = None):
    """Sum over the transverse levels of the one-oscillator multiplicities; inf when supercritical.

    ``force`` imposes a regime tag instead of detecting it from the parameters.
    """
    tag = classify(params, force).tag
    if tag is RegimeTag.Supercritical:
        return INF
    cp, cm = _TAG_CRIT[tag]
    lam = float(lam)
    ap, am, nup, num = params.alpha_plus, params.alpha_minus, float(params.nu_plus), float(params.nu_minus)
    total = 0
    for alpha, nu, other, c in ((ap, nup, num, cp), (am, num, nup, cm)):
        edge = _one_osc_edge(nu, c)
        k = 0
        while lam - other**2 * (k + 0.5) >= edge:
            total += mult_one_osc(lam - other**2 * (k + 0.5), alpha, nu, crit=c)
            k += 1
    return total


def mult_free_full_line(lam, params: ModelParams) -> int:
    """2 #{(m, n): r_{m,n} <= lambda}; each open channel of the decoupled operator counts twice."""
    lam = float(lam)
    nup2, num2 = float(params.nu_plus) ** 2, float(params.nu_minus) ** 2
    count = 0
    m = 0
    while nup2 * (m + 0.5) + num2 * 0.5 <= lam:
        rest = lam - nup2 * (m + 0.5)
        count += int(math.floor(rest / num2 - 0.5)) + 1
        m += 1
    return 2 * count


def thresholds_two_osc(params: ModelParams, lam_max: float):
    """Sorted jump locations of :func:`mult_two_osc` below ``lam_max`` in the subcritical regime."""
    nup2, num2 = float(params.nu_plus) ** 2, float(params.nu_minus) ** 2
    pts = set()
    for a, b in ((nup2, num2), (num2, nup2)):
        k = 0
        while b * (k + 0.5) + a / 2 <= lam_max:
            j = 1
            while b * (k + 0.5) + a * (j - 0.5) <= lam_max:
                pts.add(b * (k + 0.5) + a * (j - 0.5))
                j += 1
            k += 1
    return sorted(pts)


def format_multiplicity(value) -> str:
    return "inf" if value == INF else str(int(value))


__all__ = [
    "CRIT_TOL", "RegimeTag", "Regime", "criticality", "classify", "mult_one_osc", "mult_two_osc",
    "mult_free_full_line", "thresholds_two_osc", "format_multiplicity",
]
