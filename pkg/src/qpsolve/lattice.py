"""Integer frequency lattice, flat/tensor index maps and frequencies λ = Pk."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """d x n frequency matrix. Columns must be rationally independent; this is
    the caller's responsibility and is not checked."""

    entries: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.entries, dtype=float)).copy()
        if P.ndim != 2:
            raise ValueError("projection matrix must be 2-D")
        d, n = P.shape
        if d > n:
            raise ValueError(f"projection matrix has d={d} > n={n}")
        if not np.all(np.isfinite(P)):
            raise ValueError("projection matrix has non-finite entries")
        if np.any(np.all(P == 0, axis=0)):
            raise ValueError("projection matrix has a zero column")
        P.flags.writeable = False
        object.__setattr__(self, "entries", P)

    @property
    def d(self):
        return self.entries.shape[0]

    @property
    def n(self):
        return self.entries.shape[1]

    def row(self, axis):
        return self.entries[axis]

    def __eq__(self, other):
        return isinstance(other, ProjectionMatrix) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __repr__(self):
        return f"ProjectionMatrix({self.entries.tolist()})"


def as_sizes(sizes, n=None):
    """Normalize a size vector. A scalar is broadcast to n axes."""
    if np.isscalar(sizes):
        if n is None:
            raise ValueError("scalar size needs n")
        sizes = (int(sizes),) * n
    sizes = tuple(int(s) for s in sizes)
    if n is not None and len(sizes) != n:
        raise ValueError(f"size vector has {len(sizes)} axes, expected {n}")
    for s in sizes:
        if s < 2 or s % 2:
            raise ValueError(f"sizes must be even and >= 2, got {sizes}")
    return sizes


def lattice_size(sizes):
    return int(np.prod(sizes, dtype=np.int64))


def fold(idx, sizes):
    """Fold integer indices (last axis = components) to [-N/2, N/2)."""
    N = np.asarray(sizes)
    idx = np.asarray(idx)
    return (idx + N // 2) % N - N // 2


def convert(idx, sizes):
    """Tensor index -> flat index, row-major with axis 1 outermost."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.shape[-1] != len(sizes):
        raise ValueError(f"index has {idx.shape[-1]} components, sizes has {len(sizes)}")
    N = np.asarray(sizes, dtype=np.int64)
    bar = idx % N
    strides = np.cumprod(np.r_[N[1:], 1][::-1])[::-1]
    out = bar @ strides
    return int(out) if out.ndim == 0 else out


def invert(flat, sizes):
    """Flat index -> canonical tensor index."""
    D = lattice_size(sizes)
    flat = np.asarray(flat, dtype=np.int64)
    if np.any(flat < 0) or np.any(flat >= D):
        raise ValueError(f"flat index out of range [0, {D})")
    bar = np.stack(np.unravel_index(flat, sizes), axis=-1)
    out = fold(bar, sizes)
    return tuple(int(v) for v in out) if out.ndim == 1 else out


def wrap_diff(a, b, sizes):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != len(sizes) or b.shape[-1] != len(sizes):
        raise ValueError("dimension mismatch")
    out = fold(a - b, sizes)
    return tuple(int(v) for v in out) if out.ndim == 1 else out


def frequency(idx, P):
    idx = np.asarray(idx, dtype=float)
    if idx.shape[-1] != P.n:
        raise ValueError(f"index has {idx.shape[-1]} components, P has n={P.n}")
    return idx @ P.entries.T


def merge_projection(Ps):
    Ps = list(Ps)
    if not Ps:
        raise ValueError("nothing to merge")
    d = Ps[0].d
    cols = []
    for P in Ps:
        if P.d != d:
            raise ValueError("projection matrices with different d")
        for c in P.entries.T:
            if not any(np.array_equal(c, c0) for c0 in cols):
                cols.append(c)
    return ProjectionMatrix(np.stack(cols, axis=1))


def all_indices(sizes):
    """Canonical indices of the whole lattice in flat order, shape (D, n)."""
    axes = [np.fft.fftfreq(N, 1.0 / N).astype(np.int64) for N in sizes]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def all_frequencies(sizes, P):
    return frequency(all_indices(sizes), P)
