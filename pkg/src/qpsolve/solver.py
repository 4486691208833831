"""Diagonal preconditioner, C-PCG and condition-number estimates."""
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import DENSE_CAP, CompressedStiffness, DenseStiffness, apply, column_squared_norms, diagonal


class SolverBreakdown(RuntimeError):
    pass


class IncompatibleRHS(ValueError):
    pass


class SingularPreconditioner(ValueError):
    pass


@dataclass(eq=False)
class DiagonalPreconditioner:
    scale: np.ndarray
    zero_mode: int = 0

    def __call__(self, r):
        return self.scale * r


@dataclass
class SolverConfig:
    rel_tol: float = 1e-14
    max_iter: int = 1000
    record_history: bool = True

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    wall_time: float = 0.0
    peak_entry_count: int = 0
    converged: bool = False
    rhs_norm: float = 0.0

    def to_json(self):
        return json.dumps(asdict(self))


def build_preconditioner(Q):
    """M_jj = q_jj / ||Q e_j||^2, inert (1) at the zero mode."""
    if isinstance(Q, DenseStiffness):
        A = Q.matrix
        q = np.diag(A).copy()
        s = np.sum(np.abs(A) ** 2, axis=0)
        z = Q.zero_mode
    elif isinstance(Q, CompressedStiffness):
        q, s, z = diagonal(Q), column_squared_norms(Q), Q.zero_mode
    else:
        A = np.asarray(Q)
        q, s, z = np.diag(A).copy(), np.sum(np.abs(A) ** 2, axis=0), None
    off = np.ones(len(q), dtype=bool)
    if z is not None:
        off[z] = False
    if np.any(q[off] == 0):
        bad = np.nonzero(off & (q == 0))[0][:5]
        raise SingularPreconditioner(f"zero diagonal entries at {bad.tolist()}")
    scale = np.ones(len(q), dtype=q.dtype)
    scale[off] = q[off] / s[off]
    if np.all(scale.imag == 0):
        scale = scale.real.copy()
    return DiagonalPreconditioner(scale, z if z is not None else -1)


def _pcg(matvec, M, F, cfg, x0, zero_mode, entries):
    t0 = time.perf_counter()
    F = np.asarray(F, dtype=complex)
    D = len(F)
    nF = np.linalg.norm(F)
    rep = SolveReport(peak_entry_count=entries, rhs_norm=float(nF))
    if zero_mode is not None and zero_mode >= 0 and abs(F[zero_mode]) > 1e-10 * max(nF, 1e-300):
        raise IncompatibleRHS(f"right-hand side has nonzero mean {F[zero_mode]}")
    x = np.zeros(D, dtype=complex) if x0 is None else np.array(x0, dtype=complex)
    if x.shape != (D,):
        raise ValueError("x0 length mismatch")

    def proj(v):
        if zero_mode is not None and zero_mode >= 0:
            v[zero_mode] = 0
        return v

    proj(x)
    F = proj(F.copy())
    if nF == 0:
        rep.converged = True
        rep.residual_history = [0.0] if cfg.record_history else []
        rep.wall_time = time.perf_counter() - t0
        return np.zeros(D, dtype=complex), rep
    r = proj(F - matvec(x))
    z = proj(M(r))
    h = z.copy()
    rz = np.vdot(r, z)
    res = np.linalg.norm(r)
    hist = [float(res)]
    it = 0
    while res > cfg.rel_tol * nF and it < cfg.max_iter:
        Qh = proj(matvec(h))
        hQh = np.vdot(h, Qh)
        if not np.isfinite(hQh) or hQh == 0 or not np.isfinite(rz):
            raise SolverBreakdown(f"breakdown at iteration {it}: (h, Qh) = {hQh}")
        a = rz / hQh
        x += a * h
        r -= a * Qh
        z = proj(M(r))
        rz_new = np.vdot(r, z)
        h = z + (rz_new / rz) * h
        rz = rz_new
        it += 1
        res = np.linalg.norm(r)
        if cfg.record_history:
            hist.append(float(res))
    rep.iterations = it
    rep.residual_history = hist if cfg.record_history else [float(res)]
    rep.converged = bool(res <= cfg.rel_tol * nF)
    rep.wall_time = time.perf_counter() - t0
    return proj(x), rep


def cpcg_solve(Q, M, F, cfg=None, x0=None):
    """Preconditioned CG with compressed applies; zero mode projected out."""
    cfg = cfg or SolverConfig()
    return _pcg(lambda v: apply(Q, v), M, F, cfg, x0, Q.zero_mode, Q.entry_count)


def pcg_dense_solve(Qd, M, F, cfg=None, x0=None, cap=DENSE_CAP):
    cfg = cfg or SolverConfig()
    A = Qd.matrix if isinstance(Qd, DenseStiffness) else np.asarray(Qd)
    if A.shape[0] > cap:
        raise MemoryError(f"dense solve refused: D={A.shape[0]} > cap={cap}")
    z = Qd.zero_mode if isinstance(Qd, DenseStiffness) else None
    return _pcg(lambda v: A @ v, M, F, cfg, x0, z, A.size)


def _restricted(Q, M=None):
    if isinstance(Q, DenseStiffness):
        A, z = Q.matrix, Q.zero_mode
    else:
        A, z = np.asarray(Q), None
    if M is not None:
        A = A * M.scale[None, :]
    if z is not None and z >= 0:
        keep = np.ones(A.shape[0], dtype=bool)
        keep[z] = False
        A = A[np.ix_(keep, keep)]
    return A


def estimate_condition(Q, M=None, svd_limit=4096):
    """2-norm condition number of Q (or QM) on the zero-mode complement."""
    if isinstance(Q, CompressedStiffness):
        return _condition_sparse(Q, M)
    A = _restricted(Q, M)
    if A.shape[0] == 0:
        return 1.0
    if A.shape[0] <= svd_limit:
        s = scipy.linalg.svdvals(A)
        return float(s[0] / s[-1])
    return _condition_iterative(A)


def _condition_iterative(A, tol=1e-10, maxiter=5000):
    """Largest singular value by ARPACK, smallest by inverse iteration on A^H A."""
    smax = spla.svds(spla.aslinearoperator(A), k=1, which="LM", tol=tol, return_singular_vectors=False)[0]
    lu = scipy.linalg.lu_factor(A)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(A.shape[0]) + 0j
    v /= np.linalg.norm(v)
    mu = 0.0
    for _ in range(maxiter):
        w = scipy.linalg.lu_solve(lu, scipy.linalg.lu_solve(lu, v, trans=2))
        mu_new = np.linalg.norm(w)
        v = w / mu_new
        if abs(mu_new - mu) <= tol * mu_new:
            break
        mu = mu_new
    return float(smax * np.sqrt(mu_new))


def _condition_sparse(Q, M=None, tol=1e-10, maxiter=5000):
    A = Q.csr()
    if M is not None:
        A = A @ sp.diags(M.scale)
    keep = np.ones(Q.D, dtype=bool)
    keep[Q.zero_mode] = False
    A = A[keep][:, keep].tocsc()
    smax = spla.svds(A, k=1, which="LM", tol=tol, return_singular_vectors=False)[0]
    lu = spla.splu(A)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(A.shape[0]) + 0j
    v /= np.linalg.norm(v)
    mu = 0.0
    for _ in range(maxiter):
        w = lu.solve(lu.solve(v, trans="H"))
        mu_new = np.linalg.norm(w)
        v = w / mu_new
        if abs(mu_new - mu) <= tol * mu_new:
            break
        mu = mu_new
    return float(smax * np.sqrt(mu_new))


def convergence_order(errors):
    """kappa = ln(e1/e2) / ln(N2/N1) for consecutive (N, e) pairs (positive when e decays)."""
    errors = list(errors)
    out = []
    for (n1, e1), (n2, e2) in zip(errors, errors[1:]):
        if e1 > 0 and e2 > 0:
            out.append(float(np.log(e1 / e2) / np.log(n2 / n1)))
        else:
            out.append(float("nan"))
    return out
