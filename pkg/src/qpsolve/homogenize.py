"""Corrector problems and homogenized tensor for diagonal 2x2 coefficients."""
from dataclasses import dataclass, field

import numpy as np

from .assembly import EllipticityError, assemble_anisotropic
from .qpfield import SpectralField, gradient_spectrum, mean_value, multiply, to_field
from .solver import SolverConfig, build_preconditioner, cpcg_solve


@dataclass(eq=False)
class DiagonalCoefficient2D:
    alpha: SpectralField
    beta: SpectralField

    def __post_init__(self):
        if self.alpha.sizes != self.beta.sizes or self.alpha.P != self.beta.P:
            raise ValueError("alpha and beta must share sizes and P")
        if self.alpha.P.d != 2:
            raise ValueError(f"need d=2, got d={self.alpha.P.d}")
        for name, f in (("alpha", self.alpha), ("beta", self.beta)):
            if not f.is_real_valued():
                raise EllipticityError(f"{name} is not real-valued")
            if mean_value(f).real <= 0:
                raise EllipticityError(f"{name} has non-positive mean")

    @classmethod
    def from_terms(cls, alpha, beta, sizes, mode="alias"):
        return cls(to_field(alpha, sizes, mode), to_field(beta, sizes, mode))

    @property
    def P(self):
        return self.alpha.P

    @property
    def sizes(self):
        return self.alpha.sizes

    def entries(self):
        return (self.alpha, self.beta)


@dataclass(eq=False)
class CorrectorSolution:
    u_e1: SpectralField
    u_e2: SpectralField
    reports: list = field(default_factory=list)


def corrector_rhs(coeff):
    return gradient_spectrum(coeff.alpha, 0), gradient_spectrum(coeff.beta, 1)


def assemble_corrector(coeff, drop_tol=1e-14):
    return assemble_anisotropic(coeff.entries(), coeff.P, drop_tol)


def solve_correctors(coeff, cfg=None, Q=None):
    cfg = cfg or SolverConfig()
    Q = assemble_corrector(coeff) if Q is None else Q
    M = build_preconditioner(Q)
    us, reps = [], []
    for f in corrector_rhs(coeff):
        u, rep = cpcg_solve(Q, M, f.flat(), cfg)
        us.append(SpectralField.from_flat(u, coeff.sizes, coeff.P))
        reps.append(rep)
    return CorrectorSolution(us[0], us[1], reps)


def homogenized_tensor(coeff, corr):
    """A*_ij = M{A_ii (delta_ij + d_i u_ej)} by pseudo-spectral products."""
    A = np.zeros((2, 2), dtype=complex)
    for i, a in enumerate(coeff.entries()):
        for j, u in enumerate((corr.u_e1, corr.u_e2)):
            A[i, j] = mean_value(multiply(a, gradient_spectrum(u, i)))
        A[i, i] += mean_value(a)
    return np.real_if_close(A, tol=1e6)


def homogenize(coeff, cfg=None):
    corr = solve_correctors(coeff, cfg)
    return homogenized_tensor(coeff, corr), corr


def harmonic_mean_1d(profile, M=4096):
    """(mean of 1/a)^-1 for a 1-periodic profile callable, by the trapezoid rule."""
    t = np.arange(M) / M
    return 1.0 / np.mean(1.0 / profile(t))
