"""Quasiperiodic functions through parent-function Fourier coefficients."""
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .lattice import ProjectionMatrix, all_frequencies, all_indices, as_sizes

FFT_WORKERS = None  # None lets scipy pick; the CLI pins it


@dataclass(frozen=True, eq=False)
class TermList:
    """Explicit trigonometric polynomial sum_k c_k e^{i (Pk).x}."""

    indices: np.ndarray  # (m, n) int
    coeffs: np.ndarray  # (m,) complex
    P: ProjectionMatrix

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1, self.P.n)
        c = np.asarray(self.coeffs, dtype=complex).ravel()
        if len(c) != len(idx):
            raise ValueError("indices and coefficients differ in length")
        if len(np.unique(idx, axis=0)) != len(idx):
            raise ValueError("duplicate indices in term list")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_dict(cls, terms, P):
        """Build from {index tuple: coefficient}; repeated keys cannot occur."""
        keys = list(terms)
        idx = np.array(keys, dtype=np.int64).reshape(-1, P.n)
        return cls(idx, np.array([terms[k] for k in keys], dtype=complex), P)

    def as_dict(self):
        return {tuple(int(v) for v in k): c for k, c in zip(self.indices, self.coeffs)}

    def __len__(self):
        return len(self.coeffs)

    def max_abs_index(self):
        if len(self) == 0:
            return np.zeros(self.P.n, dtype=np.int64)
        return np.abs(self.indices).max(axis=0)

    def fits(self, sizes):
        N = np.asarray(sizes)
        return bool(np.all((self.indices >= -N // 2) & (self.indices < N // 2)))

    def is_real_valued(self, tol=1e-12):
        d = self.as_dict()
        for k, c in d.items():
            mk = tuple(-v for v in k)
            if abs(d.get(mk, 0) - np.conj(c)) > tol * max(1.0, abs(c)):
                return False
        return True

    def frequencies(self):
        return self.indices @ self.P.entries.T

    def evaluate(self, x):
        """Values at physical points x of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        x2 = x.reshape(-1, self.P.d)
        lam = self.frequencies()
        out = np.empty(len(x2), dtype=complex)
        step = max(1, 2**22 // max(1, len(lam)))
        for s in range(0, len(x2), step):
            out[s:s + step] = np.exp(1j * (x2[s:s + step] @ lam.T)) @ self.coeffs
        return out.reshape(x.shape[:-1]) if x.ndim > 1 else out.reshape(x.shape[:-1] or ())

    def mean(self):
        z = np.all(self.indices == 0, axis=1)
        return complex(self.coeffs[z].sum())


@dataclass(frozen=True, eq=False)
class ParentGrid:
    values: np.ndarray  # shape sizes

    @property
    def sizes(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coefficients over K_N^n stored as an array in FFT index order."""

    coeffs: np.ndarray
    P: ProjectionMatrix

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != self.P.n:
            raise ValueError(f"coefficient tensor has {c.ndim} axes, P has n={self.P.n}")
        as_sizes(c.shape)
        object.__setattr__(self, "coeffs", c)

    @property
    def sizes(self):
        return self.coeffs.shape

    @property
    def D(self):
        return self.coeffs.size

    def flat(self):
        return self.coeffs.ravel()

    @classmethod
    def from_flat(cls, v, sizes, P):
        return cls(np.asarray(v, dtype=complex).reshape(sizes), P)

    @classmethod
    def zeros(cls, sizes, P):
        return cls(np.zeros(as_sizes(sizes, P.n), dtype=complex), P)

    def __getitem__(self, k):
        return self.coeffs[tuple(np.asarray(k) % np.asarray(self.sizes))]

    def _binary(self, other, op):
        if isinstance(other, SpectralField):
            _check_compatible(self, other)
            other = other.coeffs
        return SpectralField(op(self.coeffs, other), self.P)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, c):
        return SpectralField(self.coeffs * c, self.P)

    __rmul__ = __mul__

    def is_real_valued(self, tol=1e-12):
        """Conjugate symmetry c(-k) = conj c(k), skipping Nyquist-boundary modes."""
        c = self.coeffs
        flipped = c
        for ax in range(c.ndim):
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        mask = _interior_mask(self.sizes)
        scale = max(1.0, np.abs(c).max(initial=0.0))
        return bool(np.all(np.abs(flipped - np.conj(c))[mask] <= tol * scale))


def _interior_mask(sizes):
    K = all_indices(sizes).reshape(*sizes, len(sizes))
    return np.all(K != -np.asarray(sizes) // 2, axis=-1)


def _check_compatible(a, b):
    if a.sizes != b.sizes:
        raise ValueError(f"size mismatch {a.sizes} vs {b.sizes}")
    if a.P != b.P:
        raise ValueError("projection matrix mismatch")


def to_field(terms, sizes, mode="strict"):
    """Place a TermList on the lattice K_N^n.

    mode 'strict' refuses modes outside the window, 'alias' folds them in
    (identical to sampling on the grid and transforming), 'truncate' drops them.
    """
    sizes = as_sizes(sizes, terms.P.n)
    c = np.zeros(sizes, dtype=complex)
    idx, vals = terms.indices, terms.coeffs
    if not terms.fits(sizes):
        if mode == "strict":
            raise ValueError(f"term indices exceed the window for sizes {sizes}")
        if mode == "truncate":
            N = np.asarray(sizes)
            ok = np.all((idx >= -N // 2) & (idx < N // 2), axis=1)
            idx, vals = idx[ok], vals[ok]
        elif mode != "alias":
            raise ValueError(f"unknown mode {mode!r}")
    if len(vals):
        np.add.at(c, tuple((idx % np.asarray(sizes)).T), vals)
    return SpectralField(c, terms.P)


def field_to_terms(field, tol=0.0):
    c = field.flat()
    keep = np.nonzero(np.abs(c) > tol)[0]
    K = all_indices(field.sizes)[keep]
    return TermList(K, c[keep], field.P)


def sample(terms, sizes):
    """Grid values F(y_j) = sum_k c_k e^{i k.y_j} on the uniform torus grid."""
    f = to_field(terms, sizes, mode="strict")
    return dfb_inverse(f)


def dfb_forward(grid, P):
    v = grid.values if isinstance(grid, ParentGrid) else np.asarray(grid)
    return SpectralField(scipy.fft.fftn(v, workers=FFT_WORKERS) / v.size, P)


def dfb_inverse(field):
    return ParentGrid(scipy.fft.ifftn(field.coeffs, workers=FFT_WORKERS) * field.D)


def grid_points(sizes):
    """Torus grid y_j = 2*pi*j/N, shape (*sizes, n)."""
    axes = [2 * np.pi * np.arange(N) / N for N in sizes]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def evaluate_at(field, x):
    x = np.asarray(x, dtype=float)
    lam = all_frequencies(field.sizes, field.P)
    ph = np.exp(1j * (x.reshape(-1, field.P.d) @ lam.T))
    out = ph @ field.flat()
    return complex(out[0]) if x.ndim == 1 else out.reshape(x.shape[:-1])


def mean_value(field):
    return complex(field.coeffs.flat[0])


def qp_norm_l2(field):
    return float(np.linalg.norm(field.flat()))


def qp_distance(field, terms, ignore_mean=False):
    """L2_QP distance between a lattice field and an exact TermList.

    Exact modes outside the window count in full. With ignore_mean the
    zero mode is left out on both sides (solutions are fixed up to a constant).
    """
    if field.P != terms.P:
        raise ValueError("projection matrix mismatch")
    N = np.asarray(field.sizes)
    inside = np.all((terms.indices >= -N // 2) & (terms.indices < N // 2), axis=1)
    diff = field.coeffs.copy()
    np.subtract.at(diff, tuple((terms.indices[inside] % N).T), terms.coeffs[inside])
    if ignore_mean:
        diff.flat[0] = 0
    out = np.abs(terms.coeffs[~inside]) ** 2
    if ignore_mean:
        out = out[np.any(terms.indices[~inside] != 0, axis=1)]
    return float(np.sqrt(np.sum(np.abs(diff) ** 2) + out.sum()))


def gradient_spectrum(field, axis):
    """Derivative along physical axis (0-based): multiply by i (Pk)_axis."""
    if not 0 <= axis < field.P.d:
        raise ValueError(f"axis {axis} out of range for d={field.P.d}")
    lam = all_frequencies(field.sizes, field.P)[:, axis].reshape(field.sizes)
    return SpectralField(1j * lam * field.coeffs, field.P)


def multiply(a, b):
    """Pseudo-spectral product, wraparound aliasing included."""
    _check_compatible(a, b)
    g = dfb_inverse(a).values * dfb_inverse(b).values
    return dfb_forward(g, a.P)


def divergence_flux(alpha, u):
    """-sum_axis d_axis(alpha d_axis u), pseudo-spectral."""
    f = SpectralField.zeros(u.sizes, u.P)
    for ax in range(u.P.d):
        f = f - gradient_spectrum(multiply(alpha, gradient_spectrum(u, ax)), ax)
    return f


def manufacture_rhs(alpha, u_exact):
    """Pseudo-spectral f = -div(alpha grad u); returns (f, mean of f)."""
    _check_compatible(alpha, u_exact)
    f = divergence_flux(alpha, u_exact)
    return f, mean_value(f)


def rhs_terms(alpha, u, tol=0.0):
    """Exact f = -div(alpha grad u) for TermList inputs, by explicit convolution.

    f_k = sum_m alpha_m (P k).(P(k - m)) u_{k-m}; no truncation, no aliasing.
    """
    if alpha.P != u.P:
        raise ValueError("projection matrix mismatch")
    P = u.P.entries
    acc = {}
    lu = u.indices @ P.T
    for m, am in zip(alpha.indices, alpha.coeffs):
        kv = u.indices + m
        w = np.einsum("ij,ij->i", kv @ P.T, lu)
        vals = am * w * u.coeffs
        for k, v in zip(map(tuple, kv), vals):
            acc[k] = acc.get(k, 0) + v
    acc = {k: v for k, v in acc.items() if abs(v) > tol}
    if not acc:
        return TermList(np.zeros((0, u.P.n), np.int64), np.zeros(0), u.P)
    keys = sorted(acc)
    return TermList(np.array(keys), np.array([acc[k] for k in keys]), u.P)
