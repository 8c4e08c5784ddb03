"""Invariant suites run by ``oscgraph verify``: each check yields one pass/fail record."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from ._fit import exp_rate_fit
from .basis import (BasisKind, BasisFunction, basis_distance, coeff_norm_bounds, full_pair, g_norm_sq, gram_full,
                    half_pair, jump_full, jump_half, norm_sq_full, overlap_full)
from .boundary import TruncationBox, invertibility_scan
from .params import ModelParams
from .traceclass import cube_difference_report, factor_difference_report, fin_products_report, q_block_report

SUITES = ("basis", "jacobi", "traceclass")
JACOBI_TAUS = (10.0, 40.0, 160.0)


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def as_dict(self):
        return asdict(self)


def _le(suite, name, value, threshold, detail=""):
    value = float(value)
    return Check(suite, name, value, float(threshold), bool(math.isfinite(value) and value <= threshold), detail)


def _band(suite, name, value, target, rel, detail=""):
    dev = abs(value - target) / abs(target)
    ok = math.isfinite(value) and dev <= rel
    return Check(suite, name, float(value), float(target), bool(ok), detail or f"band +-{rel:.0%}")


def _quad_sq(f, zeta_real):
    """int |f|^2 over R split at the kinks, with a finite cut far in the tails."""
    L = 1.0 + 60.0 / zeta_real
    pts = [-L, -1.0, 0.0, 1.0, L]
    total = 0.0
    for a, b in zip(pts, pts[1:]):
        total += integrate.quad(lambda x: abs(f(x)) ** 2, a, b, epsabs=0, epsrel=1e-13, limit=200)[0]
    return total


def _quad_pair(f, h, zeta_real):
    L = 1.0 + 60.0 / zeta_real
    pts = [-L, -1.0, 0.0, 1.0, L]
    re = im = 0.0
    for a, b in zip(pts, pts[1:]):
        re += integrate.quad(lambda x: (f(x) * np.conj(h(x))).real, a, b, epsabs=0, epsrel=1e-13, limit=200)[0]
        im += integrate.quad(lambda x: (f(x) * np.conj(h(x))).imag, a, b, epsabs=0, epsrel=1e-13, limit=200)[0]
    return complex(re, im)


def _scalar(b):
    return lambda x: complex(b(np.array([x]))[0])


def basis_suite() -> list[Check]:
    s = "basis"
    out = []
    for z in (1.0, 2 + 1j, 5 - 3j):
        fp = _scalar(BasisFunction(BasisKind.FULL_PLUS, z))
        q = _quad_sq(fp, complex(z).real)
        out.append(_le(s, f"norm_sq_full_vs_quad[zeta={z}]", abs(norm_sq_full(z) - q) / q, 1e-10))

    fp, fm = full_pair(1.5)
    q = _quad_pair(_scalar(fp), _scalar(fm), 1.5).real
    out.append(_le(s, "overlap_vs_quad[zeta=1.5]", abs(overlap_full(1.5) - q) / abs(q), 1e-10))

    h, f = half_pair(3.0)[0], full_pair(3.0)[0]
    q = math.sqrt(_quad_sq(lambda x: _scalar(h)(x) - _scalar(f)(x), 3.0))
    out.append(_le(s, "distance_vs_quad[zeta=3]", abs(basis_distance(3.0) - q) / q, 1e-9))

    # decay rates in gamma; the log(gamma) term of the fit absorbs power-law prefactors
    for delta in (0.0, 0.7):
        g = np.linspace(2, 8, 25)
        y = np.abs(norm_sq_full(g + 1j * delta) - 1 / g)
        out.append(_band(s, f"norm_sq_minus_inverse_gamma_rate[delta={delta}]", exp_rate_fit(g, y).slope, -4.0, 0.05))
        y = np.abs(overlap_full(g + 1j * delta))
        out.append(_band(s, f"overlap_rate[delta={delta}]", exp_rate_fit(g, y).slope, -2.0, 0.05))
        g = np.linspace(2, 10, 33)
        y = np.array([basis_distance(x + 1j * delta) for x in g])
        out.append(_band(s, f"distance_rate[delta={delta}]", exp_rate_fit(g, y).slope, -1.0, 0.05))

    z = 2 + 1j
    step = 1e-6
    fp, fm = full_pair(z)
    for Cp, Cm in ((1, 0), (0, 1), (0.3 - 0.2j, 1.1 + 0.5j)):
        v = lambda x: Cp * fp(x) + Cm * fm(x)
        fd = [(v(np.array([x + step])) - v(np.array([x])))[0] / step
              - (v(np.array([x])) - v(np.array([x - step])))[0] / step for x in (1.0, -1.0)]
        jp, jm = jump_full(Cp, Cm, z)
        out.append(_le(s, f"jump_full_vs_fd[C=({Cp},{Cm})]", max(abs(jp - fd[0]), abs(jm - fd[1])), 1e-5))
    hp, hm = half_pair(z)
    for side, b in ((1, hp), (-1, hm)):
        x = float(side)
        fd = ((b(np.array([x + step])) - b(np.array([x])))[0] - (b(np.array([x])) - b(np.array([x - step])))[0]) / step
        out.append(_le(s, f"jump_half_vs_fd[side={side}]", abs(jump_half(1.0, z, side) - fd), 1e-5))

    for z in (0.5, 1.0, 3.0, 10.0):
        k = BasisFunction(BasisKind.GAUSSIAN_KERNEL, z).to_piecewise()
        out.append(_le(s, f"g_norm_sq[zeta={z}]", abs(k.norm_sq() - 1 / z) * z, 1e-12))
        out.append(_le(s, f"g_norm_sq_closed_form[zeta={z}]", abs(g_norm_sq(z) - 1 / z) * z, 1e-12))
    z = 1.2 - 0.8j
    q = _quad_sq(_scalar(BasisFunction(BasisKind.GAUSSIAN_KERNEL, z)), z.real)
    out.append(_le(s, "g_norm_sq_vs_quad[zeta=1.2-0.8i]", abs(g_norm_sq(z) - q) / q, 1e-10))

    worst = 0.0
    for z in (0.3 + 2j, 1.0, 2 + 1j, 5 - 3j):
        for kind in BasisKind:
            b = BasisFunction(kind, z)
            for x in (-1.0, 0.0, 1.0):
                worst = max(worst, abs(b(np.array([x]), 1)[0] - b(np.array([x]), -1)[0]))
    out.append(_le(s, "continuity_at_breakpoints", worst, 1e-12))

    eigs = [np.linalg.eigvalsh(gram_full(z)).min() for z in (0.1 + 3j, 0.5, 1 + 1j, 4 - 2j, 20.0)]
    out.append(Check(s, "gram_positive_definite", float(min(eigs)), 0.0, bool(min(eigs) > 0)))

    rng = np.random.default_rng(0)
    ratios = []
    for g in (2.0, 4.0, 8.0):
        for _ in range(20):
            c = rng.normal(size=2) + 1j * rng.normal(size=2)
            c /= np.linalg.norm(c)
            a, b = coeff_norm_bounds(c[0], c[1], g + 1j * rng.uniform(-3, 3))
            ratios.append(a / b)
    worst = max(max(ratios), 1 / min(ratios))
    out.append(_le(s, "coefficient_norm_ratio_within_factor_2", worst, 2.0))
    return out


def _coupled(params):
    params = params if params is not None else ModelParams(1, 1, 1, 1)
    if not params.coupled:
        raise ValueError("this suite needs both couplings positive")
    return params


def jacobi_suite(params: ModelParams | None = None, box: TruncationBox = TruncationBox(40, 40),
                 taus=JACOBI_TAUS) -> list[Check]:
    s = "jacobi"
    params = _coupled(params)
    scan = invertibility_scan(params, taus, box)
    out = [_band(s, "sigma_min_growth_exponent", scan.slope, 0.5, 0.2, "0.5 +- 0.1")]
    for row in scan.rows:
        out.append(Check(s, f"sigma_min_above_imag_bound[tau={row.tau:g}]", row.sigma_min, row.imag_bound,
                         bool(row.sigma_min >= row.imag_bound * (1 - 1e-12))))
        out.append(Check(s, f"im_p_sign_definite[tau={row.tau:g}]", row.min_abs_im_p, 0.0, row.im_p_sign_definite))
    return out


def traceclass_suite(params: ModelParams | None = None, Lambda: complex = 1j,
                     box: TruncationBox = TruncationBox(40, 40), discretize: bool = True) -> list[Check]:
    s = "traceclass"
    params = _coupled(params)
    out = []
    q = q_block_report(params, Lambda, box, discretize=discretize)
    out.append(_band(s, "Q_slope", q.slope, -1.0, 0.05))
    if discretize:
        out.append(_le(s, "Q_exact_vs_discretized", q.extra["max_rel_disagreement"], 1e-6))
        out.append(_le(s, "Q_rank_one", q.extra["max_rank_ratio"], 1e-12))
    for order in (3, 2):
        rep = cube_difference_report(params, Lambda, box, order=order, discretize=discretize)
        out.append(_band(s, f"{rep.name}_slope", rep.slope, -float(order), 0.10))
        out.append(Check(s, f"{rep.name}_partial_sums_monotone", float(rep.partial_sums_monotone), 1.0,
                         rep.partial_sums_monotone))
        if order == 3:
            out.append(Check(s, "cube_cauchy_within_envelope", float(rep.cauchy_ok), 1.0, rep.cauchy_ok))
        if discretize:
            out.append(_le(s, f"{rep.name}_rank", rep.extra["max_rank_ratio"], 1e-10))
            out.append(_le(s, f"{rep.name}_telescoping", rep.extra["max_telescoping_defect"], 1e-10))
    for name, rep in {**factor_difference_report(params, Lambda, box), **fin_products_report(params, Lambda, box)}.items():
        out.append(_band(s, f"{name}_rate", rep.slope, rep.expected, rep.rel_tol))
        out.append(Check(s, f"{name}_partial_sums_monotone", float(rep.partial_sums_monotone), 1.0,
                         rep.partial_sums_monotone))
        if "R_minus_N_identity" in rep.extra:
            out.append(_le(s, "R_diff_equals_N_diff", rep.extra["R_minus_N_identity"], 1e-12))
    return out


def run_suite(suite: str, params: ModelParams | None = None, Lambda: complex = 1j,
              box: TruncationBox = TruncationBox(40, 40)) -> list[Check]:
    if suite == "all":
        return [c for name in SUITES for c in run_suite(name, params, Lambda, box)]
    if suite == "basis":
        return basis_suite()
    if suite == "jacobi":
        return jacobi_suite(params, box)
    if suite == "traceclass":
        return traceclass_suite(params, Lambda, box)
    raise ValueError(f"unknown suite {suite!r}; choose from {SUITES + ('all',)}")


__all__ = ["Check", "SUITES", "JACOBI_TAUS", "basis_suite", "jacobi_suite", "traceclass_suite", "run_suite"]
