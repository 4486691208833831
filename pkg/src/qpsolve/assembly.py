"""Compressed stiffness Q = A o W (triple storage) and its dense twin."""
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .lattice import all_frequencies, all_indices, convert, lattice_size

DENSE_CAP = 8192
DUMP_MAGIC = b"QPCS"
DUMP_VERSION = 1
_RECORD = np.dtype([("row", "<u8"), ("col", "<u8"), ("re", "<f8"), ("im", "<f8")])


class EllipticityError(ValueError):
    pass


@dataclass(eq=False)
class CompressedStiffness:
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    sizes: tuple
    P: object
    g: int
    zero_mode: int = 0
    _csr: object = field(default=None, repr=False)

    @property
    def D(self):
        return lattice_size(self.sizes)

    @property
    def entry_count(self):
        return len(self.values)

    def entries(self):
        return zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist())

    def csr(self):
        if self._csr is None:
            self._csr = sp.csr_matrix((self.values, (self.rows, self.cols)), shape=(self.D, self.D))
            self._csr.sort_indices()
        return self._csr

    def memory_counts(self):
        """(dense complex entries, stored triples) for the storage comparison."""
        return self.D * self.D, self.entry_count


@dataclass(eq=False)
class DenseStiffness:
    matrix: np.ndarray
    sizes: tuple
    zero_mode: int = 0

    @property
    def D(self):
        return self.matrix.shape[0]


def _coeff_modes(fields, drop_tol, relative=True):
    """Flat indices of coefficient modes kept in any of the fields."""
    scale = max(np.abs(f.flat()).max(initial=0.0) for f in fields)
    tol = drop_tol * scale if relative else drop_tol
    keep = np.zeros(fields[0].D, dtype=bool)
    for f in fields:
        keep |= np.abs(f.flat()) > tol
    return np.nonzero(keep)[0]


def _check_elliptic(f, name="coefficient"):
    if not f.is_real_valued():
        raise EllipticityError(f"{name} is not real-valued (no conjugate symmetry)")
    if f.coeffs.flat[0].real <= 0:
        raise EllipticityError(f"{name} has non-positive mean {f.coeffs.flat[0]}")


def _assemble(fields, weights, sizes, P, drop_tol):
    """Entries sum_a A^a_m * weight_a(k_V, k_U) for every kept mode m.

    weights is a list of (D,) or (D, d') frequency arrays; the W factor is the
    row-wise dot product lam[k_V] . lam[k_U].
    """
    D = lattice_size(sizes)
    K = all_indices(sizes)
    modes = _coeff_modes(fields, drop_tol) if np.isfinite(drop_tol) else np.zeros(0, int)
    flats = [f.flat() for f in fields]
    ar = np.arange(D)
    R, C, V = [], [], []
    for m in modes:
        j = convert(K - K[m], sizes)
        v = np.zeros(D, dtype=complex)
        for a, lam in zip(flats, weights):
            if a[m] != 0:
                v += a[m] * np.einsum("ij,ij->i", lam, lam[j])
        ok = v != 0
        R.append(ar[ok])
        C.append(j[ok])
        V.append(v[ok])
    if R:
        rows, cols, vals = np.concatenate(R), np.concatenate(C), np.concatenate(V)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0, dtype=complex)
    order = np.lexsort((cols, rows))
    return CompressedStiffness(rows[order], cols[order], vals[order], tuple(sizes), P, len(modes))


def assemble_compressed(alpha, P=None, drop_tol=1e-14):
    """Triples of Q = A o W for scalar alpha, one sweep per kept coefficient mode.

    drop_tol is relative to max|A_m|; np.inf gives an empty operator.
    """
    P = alpha.P if P is None else P
    _check_elliptic(alpha)
    lam = all_frequencies(alpha.sizes, P)
    return _assemble([alpha], [lam], alpha.sizes, P, drop_tol)


def assemble_anisotropic(fields, P, drop_tol=1e-14):
    """Diagonal tensor coefficient: Q = sum_a A^a o W^a with W^a from row a of P."""
    if len(fields) != P.d:
        raise ValueError(f"need {P.d} coefficient fields, got {len(fields)}")
    sizes = fields[0].sizes
    for i, f in enumerate(fields):
        if f.sizes != sizes or f.P != P:
            raise ValueError("coefficient fields must share sizes and P")
        _check_elliptic(f, f"coefficient {i}")
    lam = all_frequencies(sizes, P)
    return _assemble(list(fields), [lam[:, [a]] for a in range(P.d)], sizes, P, drop_tol)


def apply(Q, x):
    x = np.asarray(x, dtype=complex)
    if x.shape != (Q.D,):
        raise ValueError(f"vector length {x.shape} != D={Q.D}")
    return Q.csr() @ x


def _diff_table(K, sizes):
    """Flat index of k_V -_N k_U for all pairs, built axis by axis."""
    D = len(K)
    out = np.zeros((D, D), dtype=np.int64)
    stride = 1
    for ax in range(len(sizes) - 1, -1, -1):
        out += ((K[:, None, ax] - K[None, :, ax]) % sizes[ax]) * stride
        stride *= sizes[ax]
    return out


def assemble_dense(alpha, P=None, cap=DENSE_CAP):
    """Dense A o W; only for validation at small D."""
    P = alpha.P if P is None else P
    D = alpha.D
    if D > cap:
        raise MemoryError(f"dense assembly refused: D={D} > cap={cap}")
    K = all_indices(alpha.sizes)
    lam = all_frequencies(alpha.sizes, P)
    A = alpha.flat()[_diff_table(K, alpha.sizes)]
    W = lam @ lam.T
    return DenseStiffness(A * W, tuple(alpha.sizes))


def assemble_dense_anisotropic(fields, P, cap=DENSE_CAP):
    sizes = fields[0].sizes
    D = lattice_size(sizes)
    if D > cap:
        raise MemoryError(f"dense assembly refused: D={D} > cap={cap}")
    K = all_indices(sizes)
    lam = all_frequencies(sizes, P)
    diff = _diff_table(K, sizes)
    Q = np.zeros((D, D), dtype=complex)
    for a, f in enumerate(fields):
        Q += f.flat()[diff] * np.outer(lam[:, a], lam[:, a])
    return DenseStiffness(Q, tuple(sizes))


def to_dense(Q, cap=DENSE_CAP):
    if Q.D > cap:
        raise MemoryError(f"dense materialization refused: D={Q.D} > cap={cap}")
    return DenseStiffness(Q.csr().toarray(), Q.sizes, Q.zero_mode)


def column_squared_norms(Q):
    s = np.zeros(Q.D)
    np.add.at(s, Q.cols, np.abs(Q.values) ** 2)
    return s


def diagonal(Q):
    d = np.zeros(Q.D, dtype=complex)
    on = Q.rows == Q.cols
    d[Q.rows[on]] = Q.values[on]
    return d


def dump_triples(Q, path):
    rec = np.empty(Q.entry_count, dtype=_RECORD)
    rec["row"], rec["col"] = Q.rows, Q.cols
    rec["re"], rec["im"] = Q.values.real, Q.values.imag
    header = struct.pack("<4sIQQ", DUMP_MAGIC, DUMP_VERSION, Q.D, Q.entry_count).ljust(32, b"\0")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rec.tobytes())


def load_triples(path):
    """Returns (D, rows, cols, values) from a triple dump."""
    with open(path, "rb") as fh:
        header = fh.read(32)
        magic, version, D, count = struct.unpack("<4sIQQ", header[:24])
        if magic != DUMP_MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        if version != DUMP_VERSION:
            raise ValueError(f"unsupported dump version {version}")
        rec = np.frombuffer(fh.read(), dtype=_RECORD)
    if len(rec) != count:
        raise ValueError(f"truncated dump: {len(rec)} of {count} records")
    vals = rec["re"] + 1j * rec["im"]
    return int(D), rec["row"].astype(np.int64), rec["col"].astype(np.int64), vals
