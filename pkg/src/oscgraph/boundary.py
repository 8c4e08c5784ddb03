"""Truncated boundary-value systems for the coefficients C^{+-}_{m,n}.

Unknowns are ordered row-major in (m, n) with the (+, -) pair adjacent:
index(m, n, s) = 2 (m (n_max + 1) + n) + s, s = 0 for the value at x = +1.

The "+" equations couple C^+_{m-1,n}, C^+_{m,n}, C^+_{m+1,n} (a Jacobi matrix in m
for every fixed n), the "-" equations do the same in n; the per-channel 2x2
blocks carry the exponentially small cross terms between C^+ and C^-.

Two normalisations are offered. The default multiplies the matching
conditions so that the Jacobi diagonals read 2 mu p with mu = sqrt(2)/alpha;
``scaled=True`` divides every row by mu instead, which remains meaningful
when a coupling vanishes (the row then reduces to C = 0).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from .params import (BranchPointError, ModelParams, MuUndefinedError, SQRT2, channel_energy, q_minus,
                     q_plus, zeta_branch)

COND_LIMIT = 1e12
RESIDUAL_TOL = 1e-10


class IllConditionedError(RuntimeError):
    """Estimated condition number above :data:`COND_LIMIT`."""

    def __init__(self, cond: float):
        super().__init__(f"estimated condition number {cond:.3g} exceeds {COND_LIMIT:.0e}")
        self.cond = cond


class OpKind(enum.Enum):
    R = "R"
    Rprime = "Rprime"
    N = "N"
    Rcirc = "Rcirc"
    Ncirc = "Ncirc"
    M = "M"
    Mcirc = "Mcirc"
    P = "P"
    Pinv = "Pinv"


_MU_KINDS = {OpKind.R, OpKind.Rprime, OpKind.N, OpKind.Rcirc, OpKind.Ncirc, OpKind.M, OpKind.Mcirc}


@dataclass(frozen=True)
class TruncationBox:
    m_max: int
    n_max: int

    def __post_init__(self):
        if self.m_max < 1 or self.n_max < 1:
            raise ValueError("box sizes must be at least 1")

    @property
    def n_channels(self) -> int:
        return (self.m_max + 1) * (self.n_max + 1)

    @property
    def dim(self) -> int:
        return 2 * self.n_channels

    def index(self, m, n, s=0):
        return 2 * (np.asarray(m) * (self.n_max + 1) + np.asarray(n)) + s

    def channels(self):
        """Arrays (m, n) of all boxed channels in storage order."""
        m, n = np.meshgrid(np.arange(self.m_max + 1), np.arange(self.n_max + 1), indexing="ij")
        return m.ravel(), n.ravel()

    def contains(self, m, n) -> bool:
        return 0 <= m <= self.m_max and 0 <= n <= self.n_max

    def doubled(self) -> "TruncationBox":
        return TruncationBox(2 * self.m_max, 2 * self.n_max)

    @classmethod
    def parse(cls, text: str) -> "TruncationBox":
        m, _, n = text.lower().partition("x")
        return cls(int(m), int(n))


@dataclass(frozen=True)
class BoundaryVector:
    """Coefficient pairs (C^+, C^-) for every boxed channel; ``data`` has shape (n_channels, 2)."""

    box: TruncationBox
    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, complex).reshape(self.box.n_channels, 2)
        object.__setattr__(self, "data", d)

    @classmethod
    def from_flat(cls, box, flat):
        return cls(box, np.asarray(flat, complex).reshape(-1, 2))

    @classmethod
    def zeros(cls, box):
        return cls(box, np.zeros((box.n_channels, 2), complex))

    @property
    def flat(self) -> np.ndarray:
        return self.data.ravel()

    def at(self, m, n):
        return self.data[m * (self.box.n_max + 1) + n]

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def embed(self, box: TruncationBox) -> "BoundaryVector":
        """Zero-padded (or cropped) copy on another box."""
        out = np.zeros((box.m_max + 1, box.n_max + 1, 2), complex)
        src = self.data.reshape(self.box.m_max + 1, self.box.n_max + 1, 2)
        mm, nn = min(box.m_max, self.box.m_max) + 1, min(box.n_max, self.box.n_max) + 1
        out[:mm, :nn] = src[:mm, :nn]
        return BoundaryVector(box, out.reshape(-1, 2))


@dataclass(frozen=True)
class ChannelTable:
    """Per-channel scalars on a box, all arrays in storage order."""

    m: np.ndarray
    n: np.ndarray
    r: np.ndarray
    zeta: np.ndarray
    p: np.ndarray
    e: np.ndarray  # exp(-2 zeta)

    @classmethod
    def build(cls, params: ModelParams, Lambda: complex, box: TruncationBox) -> "ChannelTable":
        m, n = box.channels()
        r = channel_energy(params, (m, n))
        zeta = zeta_branch(r, Lambda)
        p = zeta * np.sqrt(r)
        return cls(m, n, r, zeta, p, np.exp(-2 * zeta))


@dataclass
class TruncatedOperator:
    kind: OpKind
    matrix: sparse.csr_matrix
    params: ModelParams
    Lambda: complex
    box: TruncationBox
    scaled: bool = False
    _lu: object = field(default=None, repr=False, compare=False)
    _cond: float | None = field(default=None, repr=False, compare=False)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, v):
        if isinstance(v, BoundaryVector):
            return BoundaryVector.from_flat(self.box, self.matrix @ v.flat)
        return self.matrix @ v

    def jacobi_blocks(self):
        """Tridiagonal lanes (sign, k, diag, off) of the Jacobi part, one per block.

        ``sign`` is '+' (block in m at fixed n = k) or '-' (block in n at fixed m = k).
        """
        A = self.matrix
        box = self.box
        out = []
        for k in range(box.n_max + 1):
            idx = box.index(np.arange(box.m_max + 1), k, 0)
            sub = A[idx][:, idx].toarray()
            out.append(("+", k, np.diag(sub).copy(), np.diag(sub, 1).copy(), np.diag(sub, -1).copy()))
        for k in range(box.m_max + 1):
            idx = box.index(k, np.arange(box.n_max + 1), 1)
            sub = A[idx][:, idx].toarray()
            out.append(("-", k, np.diag(sub).copy(), np.diag(sub, 1).copy(), np.diag(sub, -1).copy()))
        return out

    def factorize(self):
        if self._lu is None:
            self._lu = splinalg.splu(self.matrix.tocsc())
        return self._lu

    def condition_estimate(self) -> float:
        """1-norm condition number estimate ||A||_1 ||A^-1||_1 (Hager-Higham)."""
        if self._cond is None:
            lu = self.factorize()
            A = self.matrix.tocsc()
            n = A.shape[0]
            inv = splinalg.LinearOperator((n, n), matvec=lu.solve, rmatvec=lambda v: lu.solve(v, trans="H"),
                                          dtype=complex)
            norm_a = splinalg.norm(A, 1)
            norm_inv = splinalg.onenormest(inv) if n > 1 else abs(1 / A[0, 0])
            self._cond = float(norm_a * norm_inv)
        return self._cond


def build(kind, params: ModelParams, Lambda: complex, box: TruncationBox, scaled: bool = False) -> TruncatedOperator:
    """Assemble one of the truncated operators as a sparse matrix."""
    kind = OpKind(kind) if not isinstance(kind, OpKind) else kind
    Lambda = complex(Lambda)
    ap, am, _, _ = params.floats
    if kind in _MU_KINDS and not scaled:
        if ap == 0 or am == 0:
            raise MuUndefinedError(f"{kind.value} needs mu = sqrt(2)/alpha with both alpha > 0; use scaled=True")
        w_plus, w_minus = params.mu_plus, params.mu_minus
        cpl_plus = cpl_minus = 1.0
    else:
        # every row divided by mu, i.e. multiplied by alpha/sqrt(2)
        w_plus = w_minus = 1.0
        cpl_plus, cpl_minus = ap / SQRT2, am / SQRT2
    ch = ChannelTable.build(params, Lambda, box)
    N2 = box.dim
    rows, cols, vals = [], [], []

    def add(i, j, v):
        rows.append(np.atleast_1d(i))
        cols.append(np.atleast_1d(j))
        vals.append(np.broadcast_to(np.asarray(v, complex), np.atleast_1d(i).shape))

    ip = box.index(ch.m, ch.n, 0)
    im = box.index(ch.m, ch.n, 1)
    e = ch.e
    with np.errstate(under="ignore"):
        if kind in (OpKind.R, OpKind.Rprime, OpKind.Rcirc):
            add(ip, ip, 2 * w_plus * ch.p)
            add(im, im, 2 * w_minus * ch.p)
            # couplings within the box: (m, m+1) and (n, n+1) with q evaluated at the larger index
            sel = ch.m < box.m_max
            qp = q_plus(params, ch.m[sel] + 1, ch.n[sel])
            add(ip[sel], box.index(ch.m[sel] + 1, ch.n[sel], 0), cpl_plus * qp)
            add(box.index(ch.m[sel] + 1, ch.n[sel], 0), ip[sel], cpl_plus * qp)
            sel = ch.n < box.n_max
            qm = q_minus(params, ch.m[sel], ch.n[sel] + 1)
            add(im[sel], box.index(ch.m[sel], ch.n[sel] + 1, 1), cpl_minus * qm)
            add(box.index(ch.m[sel], ch.n[sel] + 1, 1), im[sel], cpl_minus * qm)
        if kind in (OpKind.R, OpKind.N):
            f = 2 * ch.p * e / (1 - e * e)
            add(ip, ip, f * w_plus * e)
            add(ip, im, -f * w_plus)
            add(im, ip, -f * w_minus)
            add(im, im, f * w_minus * e)
        if kind in (OpKind.Rcirc, OpKind.Ncirc):
            f = 2 * ch.p * e / (1 - e)
            add(ip, ip, f * w_plus)
            add(im, im, f * w_minus)
        if kind is OpKind.M:
            f = 1 / (1 - e * e)
            add(ip, ip, f * w_plus)
            add(ip, im, -f * w_plus * e)
            add(im, ip, -f * w_minus * e)
            add(im, im, f * w_minus)
        if kind is OpKind.Mcirc:
            f = 1 / (1 - e)
            add(ip, ip, f * w_plus)
            add(im, im, f * w_minus)
        if kind is OpKind.P:
            add(ip, ip, ch.p)
            add(im, im, ch.p)
        if kind is OpKind.Pinv:
            add(ip, ip, 1 / ch.p)
            add(im, im, 1 / ch.p)
    if rows:
        A = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N2, N2))
    else:
        A = sparse.coo_matrix((N2, N2), dtype=complex)
    return TruncatedOperator(kind, A.tocsr(), params, Lambda, box, scaled)


def _solve_rprime(op: TruncatedOperator, rhs: np.ndarray) -> np.ndarray:
    """Independent banded solves, one per Jacobi block."""
    box = op.box
    out = np.zeros_like(rhs)
    for sign, k, d, up, lo in op.jacobi_blocks():
        if sign == "+":
            idx = box.index(np.arange(box.m_max + 1), k, 0)
        else:
            idx = box.index(k, np.arange(box.n_max + 1), 1)
        ab = np.zeros((3, d.size), complex)
        ab[0, 1:] = up
        ab[1] = d
        ab[2, :-1] = lo
        out[idx] = linalg.solve_banded((1, 1), ab, rhs[idx])
    return out


def solve(op: TruncatedOperator, rhs, check_condition: bool = True):
    """Solve op Z = rhs for op of kind R, Rcirc or Rprime.

    Raises :class:`IllConditionedError` when the condition estimate exceeds
    :data:`COND_LIMIT`; one step of iterative refinement is applied if the
    relative residual is above :data:`RESIDUAL_TOL`.
    """
    if op.kind not in (OpKind.R, OpKind.Rcirc, OpKind.Rprime):
        raise ValueError(f"cannot solve with kind {op.kind.value}")
    as_vector = isinstance(rhs, BoundaryVector)
    b = rhs.flat if as_vector else np.asarray(rhs, complex)
    if check_condition:
        cond = op.condition_estimate()
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise IllConditionedError(cond)
    if op.kind is OpKind.Rprime:
        solver = lambda v: _solve_rprime(op, v)  # noqa: E731
    else:
        lu = op.factorize()
        solver = lu.solve
    x = solver(b)
    bn = np.linalg.norm(b)
    res = np.linalg.norm(op.matrix @ x - b)
    if bn > 0 and res > RESIDUAL_TOL * bn:
        x = x + solver(b - op.matrix @ x)
        res = np.linalg.norm(op.matrix @ x - b)
        if res > RESIDUAL_TOL * bn:
            raise IllConditionedError(op.condition_estimate())
    return BoundaryVector.from_flat(op.box, x) if as_vector else x


def solver_residual(op: TruncatedOperator, x, rhs) -> float:
    x = x.flat if isinstance(x, BoundaryVector) else x
    rhs = rhs.flat if isinstance(rhs, BoundaryVector) else rhs
    bn = np.linalg.norm(rhs)
    return float(np.linalg.norm(op.matrix @ x - rhs) / (bn if bn > 0 else 1.0))


# ---------------------------------------------------------------- S and T


def build_S(params: ModelParams, Lambda: complex, box: TruncationBox, circ: bool = False):
    """Return a callable mapping a channel source set to the BoundaryVector {p X^+, p X^-}.

    With X^{+-} = r^{-1/4} u_0(+-1) the entries equal zeta r^{1/4} u_0(+-1), where
    u_0 is the free (full-line, or Dirichlet-at-0 when ``circ``) resolvent.
    """
    from .free_resolvent import apply_phi, apply_phi_circ

    ch = ChannelTable.build(params, Lambda, box)
    phi = apply_phi_circ if circ else apply_phi

    def S(F) -> BoundaryVector:
        out = np.zeros((box.n_channels, 2), complex)
        for (m, n), f in F.items():
            if not box.contains(m, n):
                continue
            k = m * (box.n_max + 1) + n
            vals = phi(ch.zeta[k], f, np.array([1.0, -1.0]))
            out[k] = ch.zeta[k] * ch.r[k] ** 0.25 * vals
        return BoundaryVector(box, out)

    return S


def build_T(params: ModelParams, Lambda: complex, box: TruncationBox, circ: bool = False):
    """Return a callable mapping C to per-channel functions r^{1/4}(C^+ phi^+ + C^- phi^-)."""
    from .basis import BasisFunction, BasisKind

    ch = ChannelTable.build(params, Lambda, box)
    kp, km = (BasisKind.HALF_PLUS, BasisKind.HALF_MINUS) if circ else (BasisKind.FULL_PLUS, BasisKind.FULL_MINUS)

    def T(C: BoundaryVector):
        out = {}
        for k in range(box.n_channels):
            cp, cm = C.data[k]
            if cp == 0 and cm == 0:
                continue
            z = ch.zeta[k]
            w = ch.r[k] ** 0.25
            pw = BasisFunction(kp, z).to_piecewise() * (w * cp) + BasisFunction(km, z).to_piecewise() * (w * cm)
            out[(int(ch.m[k]), int(ch.n[k]))] = pw
        return out

    return T


# ---------------------------------------------------------------- diagnostics


@dataclass(frozen=True)
class ScanRow:
    tau: float
    sigma_min: float
    min_abs_im_p: float
    imag_bound: float
    im_p_sign_definite: bool


@dataclass(frozen=True)
class ScanResult:
    rows: list
    slope: float
    intercept: float
    c_fit: float

    def as_table(self):
        return [dict(tau=r.tau, sigma_min=r.sigma_min, min_abs_im_p=r.min_abs_im_p,
                     imag_bound=r.imag_bound, im_p_sign_definite=r.im_p_sign_definite,
                     sigma_over_sqrt_tau=r.sigma_min / math.sqrt(abs(r.tau))) for r in self.rows]


def jacobi_sigma_min(params: ModelParams, Lambda: complex, box: TruncationBox) -> float:
    """Smallest singular value of the truncated Jacobi part, the minimum over its blocks."""
    op = build(OpKind.Rprime, params, Lambda, box)
    best = math.inf
    for _, _, d, up, lo in op.jacobi_blocks():
        J = np.diag(d) + np.diag(up, 1) + np.diag(lo, -1)
        best = min(best, float(linalg.svdvals(J)[-1]))
    return best


def invertibility_scan(params: ModelParams, tau_list, box: TruncationBox) -> ScanResult:
    """Smallest singular value of the Jacobi part at Lambda = i tau, with the imaginary-part bound.

    ``imag_bound`` is 2 min(mu_+, mu_-) min |Im p|, a lower bound for sigma_min because
    each block has imaginary part 2 mu diag(Im p) of one sign.
    """
    rows = []
    mu = min(params.mu_plus, params.mu_minus)
    for tau in tau_list:
        tau = float(tau)
        if tau == 0:
            raise BranchPointError("tau must be nonzero")
        ch = ChannelTable.build(params, 1j * tau, box)
        im_p = ch.p.imag
        sig = jacobi_sigma_min(params, 1j * tau, box)
        rows.append(ScanRow(tau, sig, float(np.min(np.abs(im_p))), float(2 * mu * np.min(np.abs(im_p))),
                            bool(np.all(im_p > 0) or np.all(im_p < 0))))
    taus = np.array([abs(r.tau) for r in rows])
    sig = np.array([r.sigma_min for r in rows])
    if len(rows) >= 2:
        slope, intercept = np.polyfit(np.log(taus), np.log(sig), 1)
    else:
        slope, intercept = math.nan, math.nan
    c_fit = float(np.min(sig / np.sqrt(taus))) if rows else math.nan
    return ScanResult(rows, float(slope), float(intercept), c_fit)


def permutation_mirror(box: TruncationBox) -> np.ndarray:
    """Index map of the reflection m <-> n, + <-> - from ``box`` to its transpose box."""
    tb = TruncationBox(box.n_max, box.m_max)
    m, n = box.channels()
    perm = np.empty(box.dim, int)
    perm[box.index(m, n, 0)] = tb.index(n, m, 1)
    perm[box.index(m, n, 1)] = tb.index(n, m, 0)
    return perm


__all__ = [
    "COND_LIMIT", "IllConditionedError", "OpKind", "TruncationBox", "BoundaryVector", "ChannelTable",
    "TruncatedOperator", "build", "solve", "solver_residual", "build_S", "build_T", "ScanRow",
    "ScanResult", "invertibility_scan", "jacobi_sigma_min", "permutation_mirror",
]
