"""Resolvents of the coupled model, assembled from the boundary system.

For a finite family of channel sources F the solution is

    U = U_0 + T C,    C = (2 R^-1 M - P^-1) S F,

where U_0 is the decoupled resolvent applied channel by channel and T C adds
the homogeneous solutions r^{1/4} (C^+ phi^+ + C^- phi^-) in every boxed
channel. ``circ=True`` switches to the problem with the extra Dirichlet
condition at x = 0 (half-line basis, image kernels).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .basis import BasisFunction, BasisKind, gram_full, gram_half
from .boundary import (BoundaryVector, ChannelTable, OpKind, TruncationBox, build, build_S, solve,
                       solver_residual)
from .free_resolvent import (Grid, PiecewiseSource, SourceFunction, apply_phi, apply_phi_circ,
                             apply_phi_circ_derivative, apply_phi_derivative, as_source)
from .params import SQRT2, ModelParams
from .piecewise import INF, PiecewiseExp, green_dirichlet, green_full

FD_STEP = 1e-3


class NonConvergentBoxError(RuntimeError):
    """Doubling the truncation box changed the solution by more than the tolerance."""

    def __init__(self, change: float, tol: float):
        super().__init__(f"box doubling changed the solution by {change:.3g} > {tol:.3g}")
        self.change = change
        self.tol = tol


@dataclass
class ChannelFunctionSet:
    """Per-channel functions on a box; channels absent from ``functions`` are zero."""

    box: TruncationBox
    functions: dict = field(default_factory=dict)

    def __post_init__(self):
        self.functions = {(int(m), int(n)): (as_source(f) if isinstance(f, PiecewiseExp) else f)
                          for (m, n), f in self.functions.items()}
        for m, n in self.functions:
            if not self.box.contains(m, n):
                raise ValueError(f"channel ({m}, {n}) lies outside the box")

    def items(self):
        return self.functions.items()

    def __getitem__(self, mn):
        return self.functions.get(tuple(mn))

    def __len__(self):
        return len(self.functions)

    def norm(self) -> float:
        """l^2 over channels of the L^2 norms."""
        total = 0.0
        for f in self.functions.values():
            total += (f.l2_norm() if isinstance(f, SourceFunction) else f.norm()) ** 2
        return math.sqrt(total)

    def on_box(self, box: TruncationBox) -> "ChannelFunctionSet":
        return ChannelFunctionSet(box, {k: v for k, v in self.functions.items() if box.contains(*k)})

    def conj(self) -> "ChannelFunctionSet":
        return ChannelFunctionSet(self.box, {k: f.conj() for k, f in self.functions.items()})

    def mirrored(self) -> "ChannelFunctionSet":
        """Image under x -> -x together with the channel swap (m, n) -> (n, m)."""
        box = TruncationBox(self.box.n_max, self.box.m_max)
        return ChannelFunctionSet(box, {(n, m): f.reflect() for (m, n), f in self.functions.items()})


def _basis(circ):
    return (BasisKind.HALF_PLUS, BasisKind.HALF_MINUS) if circ else (BasisKind.FULL_PLUS, BasisKind.FULL_MINUS)


@dataclass(frozen=True)
class ChannelSolution:
    """u = u_0 + r^{1/4} (C^+ phi^+ + C^- phi^-) in one channel."""

    m: int
    n: int
    r: float
    zeta: complex
    C_plus: complex
    C_minus: complex
    source: SourceFunction | None = None
    circ: bool = False

    @property
    def weight(self) -> float:
        return self.r ** 0.25

    def _pair(self):
        kp, km = _basis(self.circ)
        return BasisFunction(kp, self.zeta), BasisFunction(km, self.zeta)

    def free_part(self, x):
        x = np.asarray(x, float)
        if self.source is None:
            return np.zeros(x.shape, complex)
        return np.asarray((apply_phi_circ if self.circ else apply_phi)(self.zeta, self.source, x))

    def homogeneous_part(self, x, side: int = 1):
        bp, bm = self._pair()
        return self.weight * (self.C_plus * bp(x, side) + self.C_minus * bm(x, side))

    def __call__(self, x, side: int = 1):
        return self.free_part(x) + self.homogeneous_part(x, side)

    def derivative(self, x, side: int = 1):
        """One-sided derivative (``side`` = +1 right limit, -1 left limit)."""
        x = np.asarray(x, float)
        bp, bm = self._pair()
        d = self.weight * (self.C_plus * bp.derivative(x, side) + self.C_minus * bm.derivative(x, side))
        if self.source is not None:
            if self.circ:
                # the free part has a kink only at 0; evaluate its one-sided limit there
                xs = np.where(x == 0, side * 1e-300, x) if side < 0 else x
                d = d + np.asarray(apply_phi_circ_derivative(self.zeta, self.source, xs))
            else:
                d = d + np.asarray(apply_phi_derivative(self.zeta, self.source, x))
        return d

    def jump(self, x0: float):
        """[u'](x0) = u'(x0+) - u'(x0-)."""
        return complex(self.derivative(np.array([x0]), 1)[0] - self.derivative(np.array([x0]), -1)[0])

    def homogeneous_piecewise(self) -> PiecewiseExp:
        bp, bm = self._pair()
        return bp.to_piecewise() * (self.weight * self.C_plus) + bm.to_piecewise() * (self.weight * self.C_minus)

    def piecewise(self) -> PiecewiseExp | None:
        """Exact representation when the source is piecewise (or absent), else None."""
        hom = self.homogeneous_piecewise()
        if self.source is None:
            return hom
        if isinstance(self.source, PiecewiseSource):
            green = green_dirichlet if self.circ else green_full
            return green(self.source.pw, self.zeta) + hom
        return None

    def norm(self) -> float:
        pw = self.piecewise()
        if pw is not None:
            return pw.norm()
        return math.sqrt(max(_quad_inner(self, self, self.source).real, 0.0))

    def inner(self, h) -> complex:
        """(u, h) = int u conj(h) for a source or channel function h."""
        pw = self.piecewise()
        if isinstance(h, SourceFunction):
            if pw is not None and isinstance(h, PiecewiseSource):
                return pw.inner(h.pw)
        elif isinstance(h, ChannelSolution):
            pw2 = h.piecewise()
            if pw is not None and pw2 is not None:
                return pw.inner(pw2)
        return _quad_inner(self, h, self.source, getattr(h, "source", h))


def _breakpoints(*funcs):
    pts = {-1.0, 0.0, 1.0}
    for f in funcs:
        if f is None:
            continue
        sup = getattr(f, "effective_support", None) or getattr(f, "support", None)
        if sup is not None:
            pts.update(float(s) for s in sup if np.isfinite(s))
    return sorted(pts)


def _quad_inner(u, h, *sources) -> complex:
    """Adaptive quadrature of int u conj(h) split at all kinks; for sources without closed forms."""
    pts = _breakpoints(*sources)
    edges = [-INF] + pts + [INF]
    total = 0j
    for a, b in zip(edges[:-1], edges[1:]):
        def integrand(x, part):
            v = complex(np.asarray(u(np.array([x])))[0] * np.conj(np.asarray(h(np.array([x])))[0]))
            return v.real if part == 0 else v.imag
        re = integrate.quad(integrand, a, b, args=(0,), limit=200, epsabs=1e-14, epsrel=1e-12)[0]
        im = integrate.quad(integrand, a, b, args=(1,), limit=200, epsabs=1e-14, epsrel=1e-12)[0]
        total += re + 1j * im
    return total


@dataclass
class ResolventOutput:
    params: ModelParams
    Lambda: complex
    box: TruncationBox
    circ: bool
    solution: ChannelFunctionSet
    boundary: BoundaryVector
    diagnostics: dict

    def channel(self, m, n) -> ChannelSolution:
        return self.solution[(m, n)]

    def sample(self, xs):
        """Rows (m, n, x, u) for every channel carrying a nonzero solution."""
        xs = np.asarray(xs, float)
        rows = []
        for (m, n), u in sorted(self.solution.items()):
            if u.source is None and u.C_plus == 0 and u.C_minus == 0:
                continue
            vals = u(xs)
            rows.extend((m, n, float(x), complex(v)) for x, v in zip(xs, vals))
        return rows


def default_grid(params: ModelParams, Lambda: complex, box: TruncationBox, h: float = 0.02) -> Grid:
    """Uniform grid on [-L, L] with L = 1 + 12 / min Re zeta, rounded outward to the spacing."""
    ch = ChannelTable.build(params, Lambda, box)
    L = 1.0 + 12.0 / float(np.min(ch.zeta.real))
    L = math.ceil(L / h - 1e-9) * h
    return Grid(-L, L, h)


def _as_functions(F, box) -> ChannelFunctionSet:
    if isinstance(F, ChannelFunctionSet):
        return F.on_box(box) if F.box != box else F
    return ChannelFunctionSet(box, dict(F))


def _solve_coefficients(params, Lambda, Fs: ChannelFunctionSet, box, circ, check_condition=True):
    """C = (2 R^-1 M - P^-1) S F plus the solver residual."""
    ap, am, _, _ = params.floats
    if ap == 0 and am == 0:
        return BoundaryVector.zeros(box), 0.0
    scaled = not params.coupled
    S = build_S(params, Lambda, box, circ=circ)(Fs.functions)
    R = build(OpKind.Rcirc if circ else OpKind.R, params, Lambda, box, scaled=scaled)
    M = build(OpKind.Mcirc if circ else OpKind.M, params, Lambda, box, scaled=scaled)
    Pinv = build(OpKind.Pinv, params, Lambda, box)
    rhs = 2 * (M.matrix @ S.flat)
    Z = solve(R, rhs, check_condition=check_condition)
    X = Pinv.matrix @ S.flat
    return BoundaryVector.from_flat(box, Z - X), solver_residual(R, Z, rhs)


def _assemble(params, Lambda, Fs, box, circ, C) -> ChannelFunctionSet:
    ch = ChannelTable.build(params, Lambda, box)
    funcs = {}
    for k in range(box.n_channels):
        m, n = int(ch.m[k]), int(ch.n[k])
        funcs[(m, n)] = ChannelSolution(m, n, float(ch.r[k]), complex(ch.zeta[k]), complex(C.data[k, 0]),
                                        complex(C.data[k, 1]), Fs[(m, n)], circ)
    out = ChannelFunctionSet(box)
    out.functions = funcs
    return out


def _resolve(params, Lambda, F, box, circ, grid=None, convergence_tol=None, check_condition=True,
             diagnostics=True) -> ResolventOutput:
    Lambda = complex(Lambda)
    Fs = _as_functions(F, box)
    C, res = _solve_coefficients(params, Lambda, Fs, box, circ, check_condition)
    U = _assemble(params, Lambda, Fs, box, circ, C)
    diag = {"solver_residual": res}
    out = ResolventOutput(params, Lambda, box, circ, U, C, diag)
    if diagnostics:
        grid = grid or default_grid(params, Lambda, box)
        diag["ode_residual"] = ode_residual(out, grid)
        diag["matching_residual"] = matching_residual(U, params)
        diag["edge_residual"] = edge_residual(U, params)
        if circ:
            diag["dirichlet_value"] = dirichlet_value(U)
    if convergence_tol is not None:
        big = _resolve(params, Lambda, F, box.doubled(), circ, check_condition=check_condition, diagnostics=False)
        change = solution_difference(out, big)
        diag["box_doubling_change"] = change
        diag["converged"] = bool(change <= convergence_tol)
        if change > convergence_tol:
            raise NonConvergentBoxError(change, convergence_tol)
    return out


def resolve_full(params: ModelParams, Lambda: complex, F, box: TruncationBox, grid: Grid | None = None,
                 convergence_tol: float | None = None, check_condition: bool = True) -> ResolventOutput:
    """Apply the resolvent of the coupled model on the full line to the channel sources ``F``."""
    return _resolve(params, Lambda, F, box, False, grid, convergence_tol, check_condition)


def resolve_circ(params: ModelParams, Lambda: complex, F, box: TruncationBox, grid: Grid | None = None,
                 convergence_tol: float | None = None, check_condition: bool = True) -> ResolventOutput:
    """As :func:`resolve_full` with the additional Dirichlet condition at x = 0."""
    return _resolve(params, Lambda, F, box, True, grid, convergence_tol, check_condition)


# ---------------------------------------------------------------- diagnostics


def _values_at(U: ChannelFunctionSet, x0: float):
    """u_{m,n}(x0) for all channels as an (m_max+1, n_max+1) array."""
    box = U.box
    out = np.zeros((box.m_max + 1, box.n_max + 1), complex)
    for (m, n), u in U.items():
        out[m, n] = u(np.array([x0]))[0]
    return out


def _channel_residuals(U: ChannelFunctionSet, params: ModelParams):
    box = U.box
    ap, am, _, _ = params.floats
    up = _values_at(U, 1.0)
    um = _values_at(U, -1.0)
    res_p = np.zeros_like(up, dtype=float)
    res_m = np.zeros_like(up, dtype=float)
    for (m, n), u in U.items():
        nb = (math.sqrt(m + 1) * up[m + 1, n] if m < box.m_max else 0) + (math.sqrt(m) * up[m - 1, n] if m else 0)
        res_p[m, n] = abs(u.jump(1.0) - ap / SQRT2 * nb)
        nb = (math.sqrt(n + 1) * um[m, n + 1] if n < box.n_max else 0) + (math.sqrt(n) * um[m, n - 1] if n else 0)
        res_m[m, n] = abs(u.jump(-1.0) - am / SQRT2 * nb)
    return res_p, res_m, up, um


def matching_residual(U: ChannelFunctionSet, params: ModelParams) -> float:
    """Max over interior channels of the defect in the derivative-jump conditions at x = +-1.

    Channels with m = m_max or n = n_max are left out; their defect measures the
    truncation and is reported by :func:`edge_residual`.
    """
    res_p, res_m, _, _ = _channel_residuals(U, params)
    inner = (slice(0, U.box.m_max), slice(0, U.box.n_max))
    return float(max(res_p[inner].max(), res_m[inner].max()))


def edge_residual(U: ChannelFunctionSet, params: ModelParams) -> float:
    """Size of the coupling to channels just outside the box that truncation drops."""
    ap, am, _, _ = params.floats
    box = U.box
    up = _values_at(U, 1.0)
    um = _values_at(U, -1.0)
    e_p = ap / SQRT2 * math.sqrt(box.m_max + 1) * np.abs(up[box.m_max, :]).max()
    e_m = am / SQRT2 * math.sqrt(box.n_max + 1) * np.abs(um[:, box.n_max]).max()
    return float(max(e_p, e_m))


def dirichlet_value(U: ChannelFunctionSet) -> float:
    return float(max(abs(u(np.array([0.0]))[0]) for _, u in U.items()))


def _residual_points(grid: Grid, circ: bool, max_points: int = 241):
    pts = grid.points
    keep = np.ones(pts.size, bool)
    for b in (-1.0, 0.0, 1.0):
        if b == 0.0 and not circ:
            continue
        keep &= np.abs(pts - b) > 3 * FD_STEP
    pts = pts[keep]
    stride = max(1, pts.size // max_points)
    return pts[::stride]


def ode_residual(out: ResolventOutput, grid: Grid) -> float:
    """Max |-u'' + zeta^2 u - f| over channels and grid points, u'' by a 4th-order stencil."""
    xs = _residual_points(grid, out.circ)
    h = FD_STEP
    worst = 0.0
    for (m, n), u in out.solution.items():
        if u.source is None and u.C_plus == 0 and u.C_minus == 0:
            continue
        stencil = np.stack([u(xs + k * h) for k in (-2, -1, 0, 1, 2)])
        d2 = (-stencil[0] + 16 * stencil[1] - 30 * stencil[2] + 16 * stencil[3] - stencil[4]) / (12 * h * h)
        f = u.source(xs) if u.source is not None else 0.0
        worst = max(worst, float(np.max(np.abs(-d2 + u.zeta**2 * stencil[2] - f))))
    return worst


def _channel_gram(zeta, circ):
    return gram_half(zeta) if circ else gram_full(zeta)


def solution_difference(a: ResolventOutput, b: ResolventOutput) -> float:
    """||U_a - U_b|| for two solves that differ only in the box (same sources).

    The free parts coincide, so the difference is sum r^{1/2} dC^H G dC over channels.
    """
    if a.circ != b.circ:
        raise ValueError("cannot compare full-line and Dirichlet solutions")
    big = TruncationBox(max(a.box.m_max, b.box.m_max), max(a.box.n_max, b.box.n_max))
    dC = (a.boundary.embed(big).data - b.boundary.embed(big).data)
    ch = ChannelTable.build(a.params, a.Lambda, big)
    G = _channel_gram(ch.zeta, a.circ)
    quad = np.einsum("ki,kij,kj->k", dC.conj(), G, dC).real
    return float(math.sqrt(max(float(np.sum(np.sqrt(ch.r) * quad)), 0.0)))


def solution_norm(out: ResolventOutput) -> float:
    """||U||, exact for piecewise sources and for all source-free channels."""
    ch = ChannelTable.build(out.params, out.Lambda, out.box)
    G = _channel_gram(ch.zeta, out.circ)
    C = out.boundary.data
    quad = np.sqrt(ch.r) * np.einsum("ki,kij,kj->k", C.conj(), G, C).real
    total = 0.0
    for k, ((m, n), u) in enumerate(sorted(out.solution.items())):
        total += u.norm() ** 2 if u.source is not None else quad[k]
    return math.sqrt(max(total, 0.0))


def solution_inner(out: ResolventOutput, H) -> complex:
    """(U, H) = sum over channels of int u_{m,n} conj(h_{m,n})."""
    H = _as_functions(H, out.box)
    return sum((out.solution[k].inner(h) for k, h in H.items()), 0j)


def shell_profile(C: BoundaryVector):
    """max |C_{m,n}| on each shell m + n = k."""
    box = C.box
    m, n = box.channels()
    mags = np.abs(C.data).max(axis=1)
    shells = m + n
    return np.array([mags[shells == k].max() for k in range(box.m_max + box.n_max + 1)])


def convergence_study(params: ModelParams, Lambda: complex, F, box_sequence, circ: bool = False):
    """Successive-box changes ||U(B_{k+1}) - U(B_k)|| and coefficient tail norms.

    Each row also records whether the changes so far decrease monotonically.
    """
    boxes = list(box_sequence)
    if any(b2.m_max < b1.m_max or b2.n_max < b1.n_max for b1, b2 in zip(boxes, boxes[1:])):
        raise ValueError("boxes must be increasing")
    rows = []
    prev = None
    changes = []
    for box in boxes:
        cur = _resolve(params, Lambda, F, box, circ, diagnostics=False)
        m, n = box.channels()
        outer = (m > box.m_max // 2) | (n > box.n_max // 2)
        tail = float(np.linalg.norm(cur.boundary.data[outer]))
        change = solution_difference(prev, cur) if prev is not None else math.nan
        if prev is not None:
            changes.append(change)
        decreasing = all(c2 <= c1 for c1, c2 in zip(changes, changes[1:])) if len(changes) > 1 else True
        rows.append(dict(m_max=box.m_max, n_max=box.n_max, change=change, tail_norm=tail,
                         boundary_norm=cur.boundary.norm(), monotone=decreasing))
        prev = cur
    return rows


__all__ = [
    "NonConvergentBoxError", "ChannelFunctionSet", "ChannelSolution", "ResolventOutput", "default_grid",
    "resolve_full", "resolve_circ", "matching_residual", "edge_residual", "dirichlet_value", "ode_residual",
    "solution_difference", "solution_norm", "solution_inner", "shell_profile", "convergence_study",
]
