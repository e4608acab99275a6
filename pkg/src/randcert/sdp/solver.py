"""Small dense semidefinite programs solved by a primal-dual interior-point method.

Problems are stated in moment form: free variables ``y``, linear equalities
``E y = f`` and one linear matrix inequality

    F(y) = F0 + sum_k y_k F_k  >= 0

whose matrices may be block diagonal (1x1 diagonal blocks act as ordinary
nonnegativity constraints).  The equalities are removed by a nullspace
parametrisation ``y = y0 + N z``; what remains is the standard dual form

    max  b'z   s.t.  S = C - sum_j z_j A_j >= 0,

paired with the primal ``min <C, X>  s.t.  <A_j, X> = b_j, X >= 0``.  The
iteration is an infeasible-start Mehrotra predictor-corrector with the
Nesterov-Todd search direction (HKM is available as an option).

When the iteration does not reach the tolerances, the phase-1 problem
``max t  s.t.  S(z) >= t I`` is solved.  A negative optimum proves
infeasibility and its primal solution is the certificate.  An optimum of zero
means the LMI has no interior; the phase-1 primal then exposes a face of the
cone containing every feasible ``S`` and the problem is re-solved on that face.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import scipy.linalg as sla

__all__ = [
    "SdpProblem",
    "SdpSolution",
    "SdpStatus",
    "SolverOptions",
    "InfeasibilityCertificate",
    "solve_sdp",
    "lmi_margin",
]

log = logging.getLogger(__name__)


class SdpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITER = "MaxIter"


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 200
    # stop as soon as these are met
    gap_tol: float = 1e-9
    feas_tol: float = 1e-9
    # best iterate is still reported Optimal when it meets these
    accept_gap: float = 1e-7
    accept_feas: float = 1e-8
    init_scale: float = 10.0
    infeas_tol: float = 1e-7
    max_face_steps: int = 3
    direction: str = "nt"


@dataclass
class SdpProblem:
    """``maximize c'y + c0`` (or minimize) subject to ``E y = f`` and ``F(y) >= 0``.

    ``lmi_coeffs`` has shape ``(nvars, n, n)``; every matrix must be symmetric.
    """

    objective: np.ndarray
    lmi_const: np.ndarray
    lmi_coeffs: np.ndarray
    eq_matrix: np.ndarray | None = None
    eq_rhs: np.ndarray | None = None
    objective_const: float = 0.0
    maximize: bool = True

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        self.lmi_const = np.asarray(self.lmi_const, dtype=float)
        self.lmi_coeffs = np.asarray(self.lmi_coeffs, dtype=float)
        nvars = self.objective.shape[0]
        if self.eq_matrix is None:
            self.eq_matrix = np.zeros((0, nvars))
            self.eq_rhs = np.zeros(0)
        self.eq_matrix = np.asarray(self.eq_matrix, dtype=float).reshape(-1, nvars)
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float).reshape(-1)
        n = self.lmi_const.shape[0]
        if self.lmi_const.shape != (n, n) or self.lmi_coeffs.shape != (nvars, n, n):
            raise ValueError("LMI matrices have inconsistent shapes")
        if self.eq_matrix.shape[0] != self.eq_rhs.shape[0]:
            raise ValueError("equality matrix and right-hand side disagree in length")
        if not np.allclose(self.lmi_const, self.lmi_const.T) or not np.allclose(
            self.lmi_coeffs, self.lmi_coeffs.transpose(0, 2, 1)
        ):
            raise ValueError("LMI matrices must be symmetric")

    @property
    def nvars(self) -> int:
        return self.objective.shape[0]

    @property
    def psd_dim(self) -> int:
        return self.lmi_const.shape[0]

    def lmi(self, y) -> np.ndarray:
        return self.lmi_const + np.tensordot(np.asarray(y, dtype=float), self.lmi_coeffs, axes=1)

    def value(self, y) -> float:
        return float(self.objective @ y + self.objective_const)


@dataclass(frozen=True)
class InfeasibilityCertificate:
    """``X >= 0`` with ``<A_j, X> = 0`` for all ``j`` and ``<C, X> < 0``.

    For any ``z`` this gives ``<S(z), X> = <C, X> < 0``, so ``S(z)`` cannot be
    positive semidefinite.
    """

    X: np.ndarray = field(repr=False)
    objective: float
    residual: float
    min_eig: float

    @property
    def valid(self) -> bool:
        scale = max(1.0, float(np.trace(self.X)))
        return self.objective < -1e-9 * scale and self.residual <= 1e-6 * scale and self.min_eig >= -1e-9 * scale


@dataclass
class SdpSolution:
    status: SdpStatus
    value: float
    variables: np.ndarray
    duality_gap: float
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    iterations: int = 0
    min_eig: float = float("nan")
    face_steps: int = 0
    certificate: InfeasibilityCertificate | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is SdpStatus.OPTIMAL


@dataclass
class _Dual:
    """``max b'z  s.t.  C - sum_j z_j A_j >= 0`` with ``y = y0 + N z``."""

    b: np.ndarray
    C: np.ndarray
    A: np.ndarray
    y0: np.ndarray
    N: np.ndarray

    def y(self, z) -> np.ndarray:
        return self.y0 + self.N @ z


@dataclass
class _Iterate:
    status: SdpStatus
    z: np.ndarray
    X: np.ndarray
    iterations: int
    gap: float
    rp: float
    rd: float
    rel_gap: float = float("inf")


def _affine_solve(E: np.ndarray, f: np.ndarray, tol: float = 1e-9):
    """Particular solution and nullspace basis of ``E x = f``, or ``None`` if inconsistent."""
    nv = E.shape[1]
    if E.shape[0] == 0:
        return np.zeros(nv), np.eye(nv)
    x0, *_ = np.linalg.lstsq(E, f, rcond=None)
    if np.linalg.norm(E @ x0 - f) > tol * (1 + np.linalg.norm(f)):
        return None
    return x0, sla.null_space(E, rcond=1e-12)


def _reduce(p: SdpProblem) -> _Dual | None:
    sol = _affine_solve(p.eq_matrix, p.eq_rhs)
    if sol is None:
        return None
    y0, N = sol
    sign = 1.0 if p.maximize else -1.0
    C = p.lmi(y0)
    A = -np.tensordot(N.T, p.lmi_coeffs, axes=1)
    return _Dual(b=sign * (N.T @ p.objective), C=C, A=A, y0=y0, N=N)


def _drop_constant_rows(d: _Dual) -> _Dual | None:
    """Remove scalar rows that no variable touches; ``None`` if one is negative."""
    n = d.C.shape[0]
    if n == 0:
        return d
    moving = np.abs(d.A).max(axis=(0, 2)) > 1e-14 if d.A.shape[0] else np.zeros(n, bool)
    off = np.abs(d.C - np.diag(np.diag(d.C))).max(axis=1) > 1e-14
    const = ~moving & ~off
    if np.any(np.diag(d.C)[const] < -1e-9):
        return None
    keep = ~const
    return replace(d, C=d.C[np.ix_(keep, keep)], A=d.A[:, keep][:, :, keep])


def _max_step(M: np.ndarray, dM: np.ndarray) -> float:
    """Largest ``a`` keeping ``M + a dM`` positive semidefinite, for ``M`` > 0."""
    L = np.linalg.cholesky(M)
    W = sla.solve_triangular(L, sla.solve_triangular(L, dM, lower=True).T, lower=True)
    lam = np.linalg.eigvalsh((W + W.T) / 2)[0]
    return float("inf") if lam >= 0 else -1.0 / lam


def _sym(M: np.ndarray) -> np.ndarray:
    return (M + M.T) / 2


def _nt_scaling(X: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Nesterov-Todd point ``W`` with ``W S W = X``."""
    w, V = np.linalg.eigh(S)
    if w[0] <= 0:
        raise np.linalg.LinAlgError("S is not positive definite")
    Sh = (V * np.sqrt(w)) @ V.T
    Sih = (V / np.sqrt(w)) @ V.T
    u, U = np.linalg.eigh(_sym(Sh @ X @ Sh))
    mid = (U * np.sqrt(np.clip(u, 0.0, None))) @ U.T
    return _sym(Sih @ mid @ Sih)


def _ipm(d: _Dual, opts: SolverOptions) -> _Iterate:
    A, b, C = d.A, d.b, d.C
    m, n = A.shape[0], C.shape[0]
    Af = A.reshape(m, n * n)
    scale = max(opts.init_scale, float(np.abs(C).max()))
    X = scale * np.eye(n)
    S = scale * np.eye(n)
    z = np.zeros(m)
    nb = 1.0 + np.linalg.norm(b)
    nc = 1.0 + np.linalg.norm(C)
    eye = np.eye(n)
    best: _Iterate | None = None
    stalls = 0
    it = 0
    for it in range(1, opts.max_iter + 1):
        rp = b - Af @ X.reshape(-1)
        Rd = C - np.tensordot(z, A, axes=1) - S
        pobj = float(np.vdot(C, X))
        dobj = float(b @ z)
        gap = abs(pobj - dobj)
        rel_gap = gap / (1 + abs(pobj) + abs(dobj))
        rp_n = float(np.linalg.norm(rp) / nb)
        rd_n = float(np.linalg.norm(Rd) / nc)
        cur = _Iterate(SdpStatus.MAX_ITER, z.copy(), X.copy(), it, gap, rp_n, rd_n, rel_gap)
        if best is None or max(rel_gap, rp_n, rd_n) < max(best.rel_gap, best.rp, best.rd):
            best = cur
        if rel_gap <= opts.gap_tol and rp_n <= opts.feas_tol and rd_n <= opts.feas_tol:
            cur.status = SdpStatus.OPTIMAL
            return cur
        if not (np.isfinite(pobj) and np.isfinite(dobj)) or max(abs(pobj), abs(dobj)) > 1e10:
            break
        mu = float(np.vdot(X, S)) / n
        try:
            Si = np.linalg.inv(S)
        except np.linalg.LinAlgError:
            break
        if opts.direction == "nt":
            try:
                W = _nt_scaling(X, S)
            except np.linalg.LinAlgError:
                break
            WA = W @ A  # (m, n, n)
            M = Af @ (WA @ W).reshape(m, n * n).T
        else:
            W = None
            # Schur complement M_ij = tr(A_i X A_j S^-1)
            M = Af @ (X @ A @ Si).reshape(m, n * n).T
        M = (M + M.T) / 2
        try:
            cho = sla.cho_factor(M)

            def solve_m(r):
                return sla.cho_solve(cho, r)

        except (sla.LinAlgError, ValueError):
            Mp = np.linalg.pinv(M, hermitian=True)

            def solve_m(r):
                return Mp @ r

        def direction(Rc):
            # linearised complementarity Rc = dX S + X dS (HKM) or dX + W dS W = Rc S^-1 (NT)
            if W is None:
                base = (Rc - X @ Rd) @ Si
            else:
                base = _sym(Rc @ Si) - W @ Rd @ W
            dz = solve_m(rp - Af @ base.reshape(-1))
            dS = Rd - np.tensordot(dz, A, axes=1)
            if W is None:
                dX = (Rc - X @ dS) @ Si
            else:
                dX = _sym(Rc @ Si) - W @ dS @ W
            return _sym(dX), dz, dS

        try:
            dXa, _, dSa = direction(-X @ S)
            ap = min(1.0, _max_step(X, dXa))
            ad = min(1.0, _max_step(S, dSa))
            mu_aff = float(np.vdot(X + ap * dXa, S + ad * dSa)) / n
            sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0
            dX, dz, dS = direction(sigma * mu * eye - X @ S - dXa @ dSa)
            ap = _max_step(X, dX)
            ad = _max_step(S, dS)
        except np.linalg.LinAlgError:
            break
        gamma = 0.9 + 0.09 * min(1.0, ap, ad)
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        stalls = stalls + 1 if max(ap, ad) < 1e-4 else 0
        if stalls >= 3:
            break
        X = X + ap * dX
        z = z + ad * dz
        S = S + ad * dS
        X = (X + X.T) / 2
        S = (S + S.T) / 2
    assert best is not None
    best.iterations = it
    return best


def _accepted(r: _Iterate, opts: SolverOptions) -> bool:
    return r.gap <= opts.accept_gap and r.rp <= opts.accept_feas and r.rd <= opts.accept_feas


def _phase1(d: _Dual, opts: SolverOptions) -> tuple[float, np.ndarray, bool]:
    """``max t  s.t.  C - A*(z) - t I >= 0``; returns ``(t*, X, converged)`` with ``tr X = 1``."""
    n = d.C.shape[0]
    A1 = np.concatenate([d.A, np.eye(n)[None]], axis=0)
    b1 = np.zeros(A1.shape[0])
    b1[-1] = 1.0
    r = _ipm(_Dual(b=b1, C=d.C, A=A1, y0=d.y0, N=d.N), opts)
    return float(r.z[-1]), r.X, r.status is SdpStatus.OPTIMAL or _accepted(r, opts)


def _certificate(d: _Dual, X: np.ndarray) -> InfeasibilityCertificate:
    m, n = d.A.shape[0], d.C.shape[0]
    res = float(np.linalg.norm(d.A.reshape(m, n * n) @ X.reshape(-1))) if m else 0.0
    return InfeasibilityCertificate(
        X=X, objective=float(np.vdot(d.C, X)), residual=res, min_eig=float(np.linalg.eigvalsh(X)[0])
    )


def _restrict_to_face(d: _Dual, W: np.ndarray) -> _Dual | None:
    """Restrict to ``{S >= 0 : S W = 0}`` where ``W >= 0`` is orthogonal to every feasible ``S``."""
    w, V = np.linalg.eigh((W + W.T) / 2)
    big = w > 1e-6 * max(w[-1], 1e-300)
    R = V[:, big]
    U = V[:, ~big]
    if R.shape[1] == 0 or U.shape[1] == 0:
        return None
    m = d.A.shape[0]
    # (C - sum z_j A_j) R = 0
    E = np.stack([(d.A[j] @ R).reshape(-1) for j in range(m)], axis=1) if m else np.zeros((R.size, 0))
    f = (d.C @ R).reshape(-1)
    # the face is only known to the accuracy of the phase-1 solution
    sol = _affine_solve(E, f, tol=1e-4)
    if sol is None:
        return None
    z0, N2 = sol
    C2 = U.T @ (d.C - np.tensordot(z0, d.A, axes=1)) @ U
    A2 = np.einsum("jk,kab->jab", N2.T, np.einsum("ai,kab,bl->kil", U, d.A, U))
    return _Dual(b=N2.T @ d.b, C=(C2 + C2.T) / 2, A=A2, y0=d.y(z0), N=d.N @ N2)


def _finish(p: SdpProblem, d: _Dual, r: _Iterate, status: SdpStatus, faces: int) -> SdpSolution:
    y = d.y(r.z)
    F = p.lmi(y)
    return SdpSolution(
        status=status,
        value=p.value(y),
        variables=y,
        duality_gap=float(r.gap),
        # the moment LMI is the dual side of the internal pair
        primal_residual=float(r.rd),
        dual_residual=float(r.rp),
        iterations=r.iterations,
        min_eig=float(np.linalg.eigvalsh(F)[0]) if F.size else 0.0,
        face_steps=faces,
    )


def _infeasible(p: SdpProblem, y=None, cert=None, faces: int = 0) -> SdpSolution:
    y = np.full(p.nvars, np.nan) if y is None else y
    return SdpSolution(SdpStatus.INFEASIBLE, float("nan"), y, float("nan"), face_steps=faces, certificate=cert)


def solve_sdp(p: SdpProblem, options: SolverOptions | None = None) -> SdpSolution:
    """Solve ``p``; ``value`` is in the caller's sense (max or min)."""
    opts = options or SolverOptions()
    d = _reduce(p)
    if d is None:
        return _infeasible(p)
    d = _drop_constant_rows(d)
    if d is None:
        return _infeasible(p)
    faces = 0
    while True:
        if d.C.shape[0] == 0:
            r = _Iterate(SdpStatus.OPTIMAL, np.zeros(d.A.shape[0]), np.zeros((0, 0)), 0, 0.0, 0.0, 0.0)
            return _finish(p, d, r, SdpStatus.OPTIMAL, faces)
        r = _ipm(d, opts)
        if not (r.status is SdpStatus.OPTIMAL or _accepted(r, opts)):
            # the two directions fail on different degenerate instances
            alt = replace(opts, direction="hkm" if opts.direction == "nt" else "nt")
            r2 = _ipm(d, alt)
            if max(r2.rel_gap, r2.rp, r2.rd) < max(r.rel_gap, r.rp, r.rd):
                r = r2
        if r.status is SdpStatus.OPTIMAL or _accepted(r, opts):
            return _finish(p, d, r, SdpStatus.OPTIMAL, faces)
        if opts.max_iter < 2 or faces >= opts.max_face_steps:
            break
        t_star, X1, settled = _phase1(d, opts)
        log.debug("phase-1 optimum %.3e after %d iterations", t_star, r.iterations)
        if t_star < -opts.infeas_tol:
            cert = _certificate(d, X1)
            # an unconverged phase 1 only counts if its certificate checks out
            if not (settled or cert.valid):
                break
            return _infeasible(p, d.y(r.z), cert if cert.valid else None, faces)
        if t_star > opts.infeas_tol:
            break
        nxt = _restrict_to_face(d, X1)
        if nxt is None:
            break
        nxt = _drop_constant_rows(nxt)
        if nxt is None:
            return _infeasible(p, faces=faces)
        d = nxt
        faces += 1
    return _finish(p, d, r, SdpStatus.MAX_ITER, faces)


def lmi_margin(p: SdpProblem, options: SolverOptions | None = None) -> float:
    """Largest ``t`` with ``F(y) >= t I`` over the equality-feasible ``y``.

    Nonnegative iff the problem is feasible (up to solver accuracy); ``-inf``
    when the equalities themselves are inconsistent.
    """
    opts = options or SolverOptions()
    d = _reduce(p)
    if d is None:
        return float("-inf")
    return _phase1(d, opts)[0]
