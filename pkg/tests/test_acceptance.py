"""Acceptance suite: one marked test per exit criterion.

Run ``pytest tests/test_acceptance.py`` and read the "acceptance criteria"
section of the terminal summary for one PASS/FAIL line per criterion.
"""

import math
import os
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest
import sympy

from oscgraph.boundary import TruncationBox, invertibility_scan
from oscgraph.free_resolvent import GaussianSource, cubic_bump
from oscgraph.multiplicity import (RegimeTag, classify, mult_free_full_line, mult_one_osc, mult_two_osc,
                                   thresholds_two_osc)
from oscgraph.params import ModelParams
from oscgraph.resolvent import ChannelFunctionSet, resolve_circ, resolve_full, solution_inner, solution_norm
from oscgraph.verify import basis_suite, traceclass_suite

SQ2 = sympy.sqrt(2)


def _detail(record_property, text):
    record_property("detail", text)


# ---------------------------------------------------------------- 1


@pytest.mark.acceptance(1, "one-oscillator multiplicity vs threshold count")
def test_criterion_1_one_oscillator_law(record_property):
    rng = np.random.default_rng(12345)
    lam = rng.uniform(-5.0, 40.0, 10_000)
    nu = rng.uniform(0.3, 3.0, 10_000)
    # oracle: count the open levels nu^2 (n + 1/2) <= lambda by brute force
    levels = np.arange(2000)[None, :] + 0.5
    oracle = np.sum(nu[:, None] ** 2 * levels <= lam[:, None], axis=1)
    t0 = time.perf_counter()
    got = np.array([mult_one_osc(x, 0, v) for x, v in zip(lam, nu)])
    dt = time.perf_counter() - t0
    mismatches = int(np.sum(got != oracle))
    _detail(record_property, f"{mismatches} mismatches in 10000 samples, {dt:.2f} s")
    assert mismatches == 0
    assert dt < 1.0


# ---------------------------------------------------------------- 2


def _sweep():
    """20 parameter sets with alpha / nu = t sqrt(2) for t below, at and above 1 (exact)."""
    ts = [Fraction(4, 5), Fraction(1), Fraction(6, 5)]
    out = []
    for nup, num in ((Fraction(1), Fraction(1)), (Fraction(2), Fraction(3, 2))):
        for tp in ts:
            for tm in ts:
                out.append((tp, tm, nup, num))
    out += [(Fraction(0), Fraction(1), Fraction(1), Fraction(1, 2)), (Fraction(0), Fraction(0), Fraction(3), 1)]
    return out


@pytest.mark.acceptance(2, "regime table and spectral edges")
def test_criterion_2_regime_table(record_property):
    cases = _sweep()
    assert len(cases) == 20
    params = [ModelParams(tp * nup * SQ2, tm * num * SQ2, nup, num) for tp, tm, nup, num in cases]
    t0 = time.perf_counter()
    regimes = [classify(p) for p in params]
    dt = time.perf_counter() - t0
    seen = set()
    for (tp, tm, nup, num), reg in zip(cases, regimes):
        if tp > 1 or tm > 1:
            tag, edge = RegimeTag.Supercritical, -math.inf
        elif tp == 1 and tm == 1:
            tag, edge = RegimeTag.CritCrit, 0.0
        elif tp == 1:
            tag, edge = RegimeTag.CritSub, float(num) ** 2 / 2
        elif tm == 1:
            tag, edge = RegimeTag.SubCrit, float(nup) ** 2 / 2
        else:
            tag, edge = RegimeTag.SubSub, (float(nup) ** 2 + float(num) ** 2) / 2
        assert reg.tag is tag and reg.edge == edge, (tp, tm, nup, num)
        seen.add(tag)
    assert seen == set(RegimeTag)
    _detail(record_property, f"20 cases, all five tags, {dt:.2f} s")
    assert dt < 1.0


# ---------------------------------------------------------------- 3


@pytest.mark.acceptance(3, "two-oscillator sum at zero coupling vs free full line")
@pytest.mark.parametrize("nu", [(1, 1), (1, Fraction(3, 2)), (Fraction(7, 10), 2)])
def test_criterion_3_two_oscillator_sum(record_property, nu):
    p = ModelParams(0, 0, *nu)
    th = np.array(thresholds_two_osc(p, 11.0))
    grid = np.round(np.arange(0, 10 + 5e-4, 1e-3), 12)
    t0 = time.perf_counter()
    a = [mult_two_osc(x, p) for x in grid]
    b = [mult_free_full_line(x, p) for x in grid]
    dt = time.perf_counter() - t0
    off = np.min(np.abs(grid[:, None] - th[None, :]), axis=1) > 1e-9
    bad = int(sum(1 for x, y, keep in zip(a, b, off) if keep and x != y))
    _detail(record_property, f"nu={tuple(map(str, nu))}: {bad} mismatches on {int(off.sum())} points, {dt:.2f} s")
    assert bad == 0
    assert dt < 1.0


# ---------------------------------------------------------------- 4


@pytest.mark.acceptance(4, "basis identities")
def test_criterion_4_basis_identities(record_property):
    t0 = time.perf_counter()
    checks = basis_suite()
    dt = time.perf_counter() - t0
    failed = [c.name for c in checks if not c.passed]
    _detail(record_property, f"{len(checks) - len(failed)}/{len(checks)} checks, {dt:.1f} s"
            + (f", failed: {failed}" if failed else ""))
    assert not failed
    assert dt < 10.0


# ---------------------------------------------------------------- 5


def _sources():
    return {(0, 0): GaussianSource(1.0, 0.5, 0.3), (1, 2): cubic_bump(-0.8, 0.6, 0.5 - 0.3j),
            (3, 0): cubic_bump(1.4, 0.4, 0.7j)}


@pytest.mark.acceptance(5, "resolvent correctness at box 24x24")
def test_criterion_5_resolvent_correctness(record_property):
    box = TruncationBox(24, 24)
    worst = dict(ode=0.0, matching=0.0, dirichlet=0.0, change=0.0)
    t0 = time.perf_counter()
    for ap in (0.5, 1.0):
        for am in (0.5, 1.0):
            p = ModelParams(ap, am, 1, 1)
            for Lam in (1j, 2j):
                for circ in (False, True):
                    out = (resolve_circ if circ else resolve_full)(p, Lam, _sources(), box, convergence_tol=math.inf)
                    d = out.diagnostics
                    worst["ode"] = max(worst["ode"], d["ode_residual"])
                    worst["matching"] = max(worst["matching"], d["matching_residual"])
                    worst["change"] = max(worst["change"], d["box_doubling_change"])
                    if circ:
                        worst["dirichlet"] = max(worst["dirichlet"], d["dirichlet_value"])
    dt = time.perf_counter() - t0
    _detail(record_property, ", ".join(f"max {k} {v:.2e}" for k, v in worst.items()) + f", {dt:.0f} s")
    assert worst["ode"] < 1e-6
    assert worst["matching"] < 1e-7
    assert worst["dirichlet"] < 1e-10
    assert worst["change"] < 1e-6
    assert dt < 120.0


# ---------------------------------------------------------------- 6


def _random_sources(rng, box, k=4):
    chans = set()
    while len(chans) < k:
        chans.add((int(rng.integers(0, 6)), int(rng.integers(0, 6))))
    return {mn: cubic_bump(rng.uniform(-2, 2), rng.uniform(0.2, 1.0), complex(*rng.normal(size=2)))
            for mn in sorted(chans)}


@pytest.mark.acceptance(6, "self-adjointness witnesses")
def test_criterion_6_adjoint_and_norm_bound(record_property):
    rng = np.random.default_rng(2024)
    box = TruncationBox(24, 24)
    worst_adj = 0.0
    worst_ratio = 0.0
    t0 = time.perf_counter()
    for trial in range(8):
        p = ModelParams(*rng.uniform(0.2, 1.3, 2), 1, 1)
        Lam = complex(rng.uniform(-3, 5), rng.choice([-1, 1]) * rng.uniform(0.2, 2.5))
        circ = bool(trial % 2)
        solve = resolve_circ if circ else resolve_full
        F, G = _random_sources(rng, box), _random_sources(rng, box)
        uF = solve(p, Lam, F, box, check_condition=False)
        uG = solve(p, Lam.conjugate(), G, box, check_condition=False)
        lhs = solution_inner(uF, G)
        rhs = np.conj(solution_inner(uG, F))
        worst_adj = max(worst_adj, abs(lhs - rhs) / max(1.0, abs(lhs)))
        bound = ChannelFunctionSet(box, F).norm() / abs(Lam.imag)
        worst_ratio = max(worst_ratio, solution_norm(uF) / bound)
    dt = time.perf_counter() - t0
    _detail(record_property, f"max adjoint defect {worst_adj:.1e}, max norm/bound {worst_ratio:.4f}, {dt:.0f} s")
    assert worst_adj < 1e-8
    assert worst_ratio <= 1.05
    assert dt < 60.0


# ---------------------------------------------------------------- 7


@pytest.mark.acceptance(7, "Jacobi invertibility growth")
def test_criterion_7_jacobi_growth(record_property):
    t0 = time.perf_counter()
    scan = invertibility_scan(ModelParams(1, 1, 1, 1), (10, 40, 160, 640), TruncationBox(40, 40))
    dt = time.perf_counter() - t0
    _detail(record_property, f"slope {scan.slope:.3f}, {dt:.1f} s")
    assert abs(scan.slope - 0.5) <= 0.1
    assert all(r.sigma_min >= r.imag_bound * (1 - 1e-12) for r in scan.rows)
    assert dt < 30.0


# ---------------------------------------------------------------- 8


@pytest.mark.acceptance(8, "trace-class evidence at box 40x40")
def test_criterion_8_traceclass(record_property):
    t0 = time.perf_counter()
    checks = traceclass_suite(ModelParams(1, 1, 1, 1), 1j, TruncationBox(40, 40))
    dt = time.perf_counter() - t0
    failed = [f"{c.name}={c.value:.4g}" for c in checks if not c.passed]
    slopes = {c.name: round(c.value, 3) for c in checks if c.name.endswith(("_slope", "_rate"))}
    _detail(record_property, f"{len(checks) - len(failed)}/{len(checks)} checks, {dt:.0f} s, {slopes}"
            + (f", failed: {failed}" if failed else ""))
    assert not failed
    assert dt < 180.0


# ---------------------------------------------------------------- 9


CONFIG = """\
alpha_plus = 0.8
alpha_minus = 1.1
Lambda = 0.5,1
box = 20x20
lambda_start = 0
lambda_stop = 3
lambda_step = 0.125
source = gaussian:0,0,1,0,0.5,0.3; bump:1,2,0.5,-0.25,-0.7,0.5
taus = 10,40,160
"""


def _cli(args, seed):
    env = dict(os.environ, PYTHONHASHSEED=str(seed))
    return subprocess.run([sys.executable, "-m", "oscgraph.cli", *args], env=env, capture_output=True, check=False)


@pytest.mark.acceptance(9, "deterministic CLI output")
def test_criterion_9_determinism(record_property, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(CONFIG)
    runs = [("multiplicity", "csv"), ("multiplicity", "json"), ("resolve", "csv"), ("resolve", "json"),
            ("jacobi-scan", "csv"), ("convergence", "json")]
    identical = 0
    for cmd, fmt in runs:
        outs = []
        for seed in (0, 1):
            res = _cli([cmd, "--config", str(cfg), "--format", fmt], seed)
            assert res.returncode == 0, res.stderr.decode()
            outs.append(res.stdout)
        assert outs[0] == outs[1], (cmd, fmt)
        identical += 1
    # writing to a file gives the same bytes as stdout
    out = tmp_path / "o.csv"
    res = _cli(["multiplicity", "--config", str(cfg), "--out", str(out)], 3)
    assert res.returncode == 0 and out.read_bytes() == _cli(["multiplicity", "--config", str(cfg)], 4).stdout
    _detail(record_property, f"{identical}/{len(runs)} command/format pairs byte-identical across processes")
