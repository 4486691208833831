"""Periodic approximation baseline: rational frequencies on a cell of length L."""
from dataclasses import dataclass

import numpy as np

from .assembly import assemble_compressed
from .lattice import ProjectionMatrix, all_indices
from .qpfield import SpectralField, TermList, dfb_inverse, to_field
from .solver import SolverConfig, build_preconditioner, cpcg_solve


def nearest_int(x):
    """Round half away from zero."""
    x = np.asarray(x, dtype=float)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


@dataclass(frozen=True)
class RationalApprox:
    L: int
    numerators: tuple
    diophantine_error: float

    def fractions(self):
        return [f"{p}/{self.L}" for p in self.numerators]


def rational_approx(frequencies, L):
    if int(L) != L or L < 1:
        raise ValueError("L must be a positive integer")
    lam = np.atleast_1d(np.asarray(frequencies, dtype=float))
    p = nearest_int(L * lam)
    err = float(np.max(np.abs(L * lam - p))) if lam.size else 0.0
    return RationalApprox(int(L), tuple(int(v) for v in p), err)


def periodic_map(P, L):
    """Integer d x n map H = [L P / 2pi] and its Diophantine error."""
    X = L * P.entries / (2 * np.pi)
    H = nearest_int(X)
    return H, float(np.max(np.abs(X - H)))


def periodize_terms(terms, H, L):
    """Send mode k to h = H k on the periodic lattice; colliding modes add up."""
    d = H.shape[0]
    Pp = ProjectionMatrix(2 * np.pi / L * np.eye(d))
    acc = {}
    for k, c in zip(terms.indices @ H.T, terms.coeffs):
        key = tuple(int(v) for v in k)
        acc[key] = acc.get(key, 0) + c
    return TermList.from_dict(acc, Pp) if acc else TermList(np.zeros((0, d)), np.zeros(0), Pp)


@dataclass(eq=False)
class PeriodicProblem:
    alpha: TermList
    rhs: TermList
    L: int
    N: int
    H: np.ndarray
    diophantine_error: float

    @property
    def E(self):
        return self.L * self.N

    @property
    def sizes(self):
        return (self.E,) * self.alpha.P.d


def make_periodic_problem(alpha, rhs, L, N):
    H, err = periodic_map(alpha.P, L)
    if (L * N) % 2:
        raise ValueError(f"E = L*N = {L * N} must be even")
    return PeriodicProblem(periodize_terms(alpha, H, L), periodize_terms(rhs, H, L), int(L), int(N), H, err)


def pam_discretize(problem, drop_tol=1e-14):
    a = to_field(problem.alpha, problem.sizes, mode="alias")
    return assemble_compressed(a, a.P, drop_tol)


def pam_solve(problem, cfg=None, Q=None):
    """Returns (periodic solution field, SolveReport)."""
    cfg = cfg or SolverConfig()
    Q = pam_discretize(problem) if Q is None else Q
    M = build_preconditioner(Q)
    F = to_field(problem.rhs, problem.sizes, mode="alias").flat().copy()
    F[Q.zero_mode] = 0
    U, rep = cpcg_solve(Q, M, F, cfg)
    return SpectralField.from_flat(U, problem.sizes, problem.alpha.P), rep


def cell_grid(problem, cell="centered"):
    """Periodic grid points x_j = x0 + j L / E per axis, shape (E^d, d)."""
    E, L, d = problem.E, problem.L, problem.alpha.P.d
    x0 = -L / 2 if cell == "centered" else 0.0
    if cell not in ("centered", "origin"):
        raise ValueError(f"unknown cell {cell!r}")
    axes = [x0 + np.arange(E) * L / E] * d
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1), x0


def periodic_values(u, problem, x0):
    """u_p on the cell grid starting at x0 (flattened)."""
    h = all_indices(u.sizes).reshape(*u.sizes, -1)
    phase = np.exp(2j * np.pi * (h @ np.full(h.shape[-1], x0)) / problem.L)
    vals = dfb_inverse(SpectralField(u.coeffs * phase, u.P)).values
    return vals.ravel()


def pam_error(u, problem, exact, cell="centered"):
    """RMS over the E^d cell grid of u_p - u, exact mean removed."""
    x, x0 = cell_grid(problem, cell)
    up = periodic_values(u, problem, x0)
    ue = exact.evaluate(x) - exact.mean()
    return float(np.sqrt(np.mean(np.abs(up - ue) ** 2)))


def pam_solve_and_error(problem, exact, cfg=None, cell="centered"):
    u, rep = pam_solve(problem, cfg)
    return pam_error(u, problem, exact, cell), rep
