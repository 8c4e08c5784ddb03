import math

import numpy as np
import pytest

from oscgraph.boundary import BoundaryVector, TruncationBox
from oscgraph.free_resolvent import GaussianSource, apply_phi, apply_phi_circ, cubic_bump
from oscgraph.params import ModelParams, zeta_branch
from oscgraph.resolvent import (ChannelFunctionSet, NonConvergentBoxError, _assemble, convergence_study,
                                matching_residual, resolve_circ, resolve_full, shell_profile, solution_inner,
                                solution_norm)

XS = np.array([-3.0, -1.7, -1.0, -0.4, 0.2, 0.9, 1.0, 1.3, 2.5])
BOX = TruncationBox(10, 10)


def _sources(seed=0, k=3, box=BOX):
    rng = np.random.default_rng(seed)
    chans = set()
    while len(chans) < k:
        chans.add((int(rng.integers(0, box.m_max // 2)), int(rng.integers(0, box.n_max // 2))))
    return {mn: cubic_bump(rng.uniform(-1.5, 1.5), rng.uniform(0.3, 0.8), complex(*rng.normal(size=2)))
            for mn in sorted(chans)}


def _krein_oracle(params, Lambda, F, box, xs):
    """Direct point-interaction solve: u = u0 + a+ G(., 1) + a- G(., -1) in every channel.

    G(x, y) = exp(-zeta |x - y|) / (2 zeta); the derivative jump of u at +-1 is -a+-,
    and the coupling conditions give a+ = -(alpha+/sqrt2) J+ u(1), a- = -(alpha-/sqrt2) J- u(-1).
    """
    ap, am, nup, num = params.floats
    chans = [(m, n) for m in range(box.m_max + 1) for n in range(box.n_max + 1)]
    idx = {c: i for i, c in enumerate(chans)}
    N = len(chans)
    zeta = np.array([zeta_branch(nup**2 * (m + .5) + num**2 * (n + .5), Lambda) for m, n in chans])
    Jp = np.zeros((N, N))
    Jm = np.zeros((N, N))
    for (m, n), i in idx.items():
        if (m + 1, n) in idx:
            Jp[i, idx[(m + 1, n)]] = Jp[idx[(m + 1, n)], i] = math.sqrt(m + 1)
        if (m, n + 1) in idx:
            Jm[i, idx[(m, n + 1)]] = Jm[idx[(m, n + 1)], i] = math.sqrt(n + 1)
    w = np.zeros((2, N), complex)
    for c, f in F.items():
        w[:, idx[c]] = apply_phi(zeta[idx[c]], f, np.array([1.0, -1.0]))
    g0 = 1 / (2 * zeta)
    g2 = np.exp(-2 * zeta) / (2 * zeta)
    Ap = -ap / math.sqrt(2) * Jp
    Am = -am / math.sqrt(2) * Jm
    # v+ = w+ + g0 Ap v+ + g2 Am v-, v- = w- + g2 Ap v+ + g0 Am v-
    K = np.block([[np.eye(N) - g0[:, None] * Ap, -g2[:, None] * Am],
                  [-g2[:, None] * Ap, np.eye(N) - g0[:, None] * Am]])
    v = np.linalg.solve(K, np.concatenate(w))
    a_p, a_m = Ap @ v[:N], Am @ v[N:]
    out = {}
    for c, i in idx.items():
        z = zeta[i]
        u = a_p[i] * np.exp(-z * np.abs(xs - 1)) / (2 * z) + a_m[i] * np.exp(-z * np.abs(xs + 1)) / (2 * z)
        if c in F:
            u = u + apply_phi(z, F[c], xs)
        out[c] = u
    return out


def _half_line_oracle(alpha, nu_p, nu_m, Lambda, F, m_max, n, xs):
    """One oscillator on the half-line x > 0 with u(0) = 0 and coupling at x = 1, channels (m, n) for fixed n."""
    ms = np.arange(m_max + 1)
    zeta = np.array([zeta_branch(nu_p**2 * (m + .5) + nu_m**2 * (n + .5), Lambda) for m in ms])
    G11 = (1 - np.exp(-2 * zeta)) / (2 * zeta)
    J = np.diag(np.sqrt(ms[1:].astype(float)), 1) + np.diag(np.sqrt(ms[1:].astype(float)), -1)
    w = np.array([apply_phi_circ(zeta[m], F[(m, n)], np.array([1.0]))[0] if (m, n) in F else 0j for m in ms])
    # -(v - w)/G11 = alpha/sqrt2 J v
    v = np.linalg.solve(np.diag(1 / G11) + alpha / math.sqrt(2) * J, w / G11)
    a = (v - w) / G11
    out = {}
    for m in ms:
        z = zeta[m]
        G = (np.exp(-z * np.abs(xs - 1)) - np.exp(-z * (xs + 1))) / (2 * z)
        u = a[m] * G
        if (m, n) in F:
            u = u + apply_phi_circ(z, F[(m, n)], xs)
        out[m] = u
    return out


@pytest.mark.parametrize("circ", [False, True])
def test_alpha_zero_is_decoupled(circ):
    p = ModelParams(0, 0, 1, 1)
    F = _sources()
    out = (resolve_circ if circ else resolve_full)(p, 1j, F, BOX)
    assert out.boundary.norm() == 0
    phi = apply_phi_circ if circ else apply_phi
    for (m, n), f in F.items():
        u = out.channel(m, n)
        assert np.array_equal(u(XS), phi(u.zeta, f, XS))
    assert out.diagnostics["matching_residual"] <= 1e-10


@pytest.mark.parametrize("params", [ModelParams(1, 1, 1, 1), ModelParams(0.5, 1.2, 1.0, 1.5),
                                    ModelParams(0.7, 0, 1.1, 0.9)])
@pytest.mark.parametrize("Lambda", [1j, -1 + 2j, 3 - 0.5j])
def test_against_krein_oracle(params, Lambda):
    F = _sources(1)
    out = resolve_full(params, Lambda, F, BOX, check_condition=False)
    ref = _krein_oracle(params, Lambda, F, BOX, XS)
    scale = max(np.abs(u).max() for u in ref.values())
    worst = max(np.abs(out.channel(*c)(XS) - u).max() for c, u in ref.items())
    assert worst <= 1e-10 * scale


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.3])
def test_circ_matches_half_line_one_oscillator(alpha):
    p = ModelParams(alpha, 0, 1.0, 1.3)
    F = _sources(2)
    out = resolve_circ(p, 2j, F, BOX, check_condition=False)
    xs = XS[XS > 0]
    for n in range(BOX.n_max + 1):
        ref = _half_line_oracle(alpha, 1.0, 1.3, 2j, F, BOX.m_max, n, xs)
        for m, u in ref.items():
            assert np.abs(out.channel(m, n)(xs) - u).max() <= 1e-10 * (1 + np.abs(u).max())
    # the left half-line carries the free Dirichlet solution only
    xl = XS[XS < 0]
    for (m, n), u in out.solution.items():
        f = F.get((m, n))
        ref = apply_phi_circ(u.zeta, f, xl) if f is not None else 0
        assert np.abs(u(xl) - ref).max() <= 1e-12


@pytest.mark.parametrize("Lambda", [1j, 2j])
def test_diagnostics(Lambda):
    p = ModelParams(1, 1, 1, 1)
    F = {(0, 0): GaussianSource(1.0, 0.5, 0.3)}
    out = resolve_full(p, Lambda, F, TruncationBox(16, 16), convergence_tol=1e-6)
    d = out.diagnostics
    assert d["ode_residual"] < 1e-6
    assert d["matching_residual"] < 1e-7
    assert d["solver_residual"] < 1e-10
    assert d["converged"]
    assert all(math.isfinite(v) for k, v in d.items() if k != "converged")


def test_circ_dirichlet_value():
    p = ModelParams(1, 0.5, 1, 1)
    out = resolve_circ(p, 1j, _sources(3), BOX)
    assert out.diagnostics["dirichlet_value"] < 1e-10
    assert out.diagnostics["matching_residual"] < 1e-7


def test_corrupted_coefficients_raise_matching_residual():
    p = ModelParams(1, 1, 1, 1)
    F = {(0, 0): cubic_bump(0.8, 0.5)}
    out = resolve_full(p, 1j, F, BOX)
    base = matching_residual(out.solution, p)
    data = out.boundary.data.copy()
    k = int(np.argmax(np.abs(data[:, 0])))
    data[k, 0] *= 1.1
    bad = _assemble(p, 1j, ChannelFunctionSet(BOX, F), BOX, False, BoundaryVector(BOX, data))
    assert matching_residual(bad, p) - base > 1e-3


@pytest.mark.parametrize("circ", [False, True])
def test_conjugation_symmetry(circ):
    p = ModelParams(0.8, 1.1, 1.0, 1.2)
    F = _sources(4)
    solve = resolve_circ if circ else resolve_full
    a = solve(p, 1 + 1j, F, BOX)
    b = solve(p, 1 - 1j, {c: f.conj() for c, f in F.items()}, BOX)
    for c, u in a.solution.items():
        assert np.abs(np.conj(u(XS)) - b.channel(*c)(XS)).max() <= 1e-10


def test_mirror_symmetry():
    p = ModelParams(0.6, 1.2, 1.0, 1.4)
    box = TruncationBox(10, 8)
    F = ChannelFunctionSet(box, _sources(5, box=box))
    a = resolve_full(p, 1j, F, box)
    b = resolve_full(p.mirrored(), 1j, F.mirrored(), TruncationBox(8, 10))
    for (m, n), u in a.solution.items():
        assert np.abs(u(XS) - b.channel(n, m)(-XS)).max() <= 1e-9


@pytest.mark.parametrize("circ", [False, True])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_adjoint_probe_and_norm_bound(circ, seed):
    p = ModelParams(1, 0.7, 1, 1.2)
    Lam = complex(*np.random.default_rng(seed).normal(size=2))
    solve = resolve_circ if circ else resolve_full
    F, G = _sources(10 + seed), _sources(20 + seed)
    uF = solve(p, Lam, F, BOX, check_condition=False)
    uG = solve(p, Lam.conjugate(), G, BOX, check_condition=False)
    lhs = solution_inner(uF, G)
    rhs = np.conj(solution_inner(uG, F))
    assert abs(lhs - rhs) <= 1e-8 * max(1.0, abs(lhs))
    Fn = ChannelFunctionSet(BOX, F).norm()
    assert solution_norm(uF) <= 1.05 * Fn / abs(Lam.imag)


def test_zero_source_gives_zero():
    p = ModelParams(1, 1, 1, 1)
    for solve in (resolve_full, resolve_circ):
        out = solve(p, 1j, {}, BOX)
        assert out.boundary.norm() == 0
        assert all(np.all(u(XS) == 0) for _, u in out.solution.items())


def test_nonconvergent_box_raises():
    p = ModelParams(1, 1, 1, 1)
    with pytest.raises(NonConvergentBoxError):
        resolve_full(p, 1j, {(0, 0): cubic_bump(0.9, 0.4)}, TruncationBox(2, 2), convergence_tol=1e-12)


def test_convergence_study_alpha_zero_is_flat():
    rows = convergence_study(ModelParams(0, 0, 1, 1), 1j, _sources(), [TruncationBox(5, 5), BOX,
                                                                       TruncationBox(20, 20)])
    assert [r["change"] for r in rows[1:]] == [0.0, 0.0]


def test_convergence_study_small_alpha_monotone():
    boxes = [TruncationBox(k, k) for k in (4, 8, 16, 32)]
    rows = convergence_study(ModelParams(0.25, 0.25, 1, 1), 1j, {(0, 0): cubic_bump(0.5, 0.5)}, boxes)
    changes = [r["change"] for r in rows[1:]]
    assert all(b < a for a, b in zip(changes, changes[1:]))
    assert rows[-1]["monotone"]


def test_coefficient_tail_decays():
    out = resolve_full(ModelParams(1, 1, 1, 1), 2j, {(0, 0): cubic_bump(0.5, 0.5)}, TruncationBox(24, 24))
    prof = shell_profile(out.boundary)
    assert prof[30] < 1e-3 * prof[0]
    assert prof[40] < prof[20] < prof[5]
