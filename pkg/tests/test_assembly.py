import itertools

import numpy as np
import pytest

from qpsolve.assembly import (EllipticityError, apply, assemble_anisotropic, assemble_compressed, assemble_dense,
                              column_squared_norms, diagonal, dump_triples, load_triples, to_dense)
from qpsolve.lattice import ProjectionMatrix
from qpsolve.qpfield import TermList, to_field

from conftest import alpha1, p_golden, random_real_terms


def brute_dense(field):
    """Q_ij = A[(k_i - k_j) mod N] (P k_i).(P k_j) by explicit index loops."""
    sizes = field.sizes
    P = field.P.entries
    idx = list(itertools.product(*[range(N) for N in sizes]))  # row-major flat order
    canon = [tuple(v - N if v >= N // 2 else v for v, N in zip(t, sizes)) for t in idx]
    D = len(idx)
    Q = np.zeros((D, D), dtype=complex)
    for i, kv in enumerate(canon):
        lv = P @ np.array(kv, float)
        for j, ku in enumerate(canon):
            m = tuple((a - b) % N for a, b, N in zip(kv, ku, sizes))
            Q[i, j] = field.coeffs[m] * (lv @ (P @ np.array(ku, float)))
    return Q


def projections():
    s2, s3 = np.sqrt(2), np.sqrt(3)
    return [
        ProjectionMatrix(2 * np.pi * np.array([[1, s2]])),
        ProjectionMatrix(2 * np.pi * np.array([[1, s2, s3]])),
        ProjectionMatrix(2 * np.pi * np.array([[1, 0, s2], [0, 1, s3]])),
    ]


def test_constant_alpha_is_diagonal():
    P = p_golden()
    a = to_field(TermList.from_dict({(0, 0): 2.5}, P), (4, 4))
    Q = assemble_compressed(a)
    assert Q.g == 1 and Q.entry_count == 15
    assert np.all(Q.rows == Q.cols)
    D = to_dense(Q).matrix
    K = [(0, 0), (1, 0), (0, 1), (-2, -1)]
    from qpsolve.lattice import convert, frequency
    for k in K:
        i = convert(k, (4, 4))
        assert abs(D[i, i] - 2.5 * np.sum(frequency(k, P) ** 2)) < 1e-12
    x = np.random.default_rng(0).standard_normal(16) + 0j
    assert np.allclose(apply(Q, x), np.diag(D) * x)


def test_alpha1_matches_bruteforce():
    a = to_field(alpha1(), (4, 4))
    Q = assemble_compressed(a)
    assert Q.entry_count <= 5 * 16
    ref = brute_dense(a)
    assert np.max(np.abs(to_dense(Q).matrix - ref)) <= 1e-13 * np.max(np.abs(ref))
    assert np.max(np.abs(assemble_dense(a).matrix - ref)) <= 1e-13 * np.max(np.abs(ref))


def test_entrywise_invariants():
    a = to_field(alpha1(), (8, 8))
    Q = assemble_compressed(a)
    from qpsolve.lattice import frequency, invert, wrap_diff
    for r, c, v in list(Q.entries())[::37]:
        kv, ku = invert(r, Q.sizes), invert(c, Q.sizes)
        m = wrap_diff(kv, ku, Q.sizes)
        assert abs(v - a[m] * frequency(kv, a.P) @ frequency(ku, a.P)) < 1e-12
    assert np.all(Q.values != 0)
    assert not np.any(Q.rows == Q.zero_mode) and not np.any(Q.cols == Q.zero_mode)
    order = np.lexsort((Q.cols, Q.rows))
    assert np.array_equal(order, np.arange(Q.entry_count))


def test_drop_tol_infinite_gives_empty():
    Q = assemble_compressed(to_field(alpha1(), (4, 4)), drop_tol=np.inf)
    assert Q.entry_count == 0
    assert np.all(apply(Q, np.ones(16)) == 0)
    assert np.all(column_squared_norms(Q) == 0)


def test_ellipticity_checks():
    P = p_golden()
    with pytest.raises(EllipticityError):
        assemble_compressed(to_field(TermList.from_dict({(0, 0): -1.0}, P), (4, 4)))
    with pytest.raises(EllipticityError):
        assemble_compressed(to_field(TermList.from_dict({(0, 0): 1.0, (1, 0): 0.1}, P), (4, 4)))


@pytest.mark.parametrize("pi", range(3))
def test_compressed_equals_dense_random(pi):
    rng = np.random.default_rng(pi)
    P = projections()[pi]
    for N in (4, 6, 8) if P.n == 2 else (4,):
        for _ in range(3):
            a = to_field(random_real_terms(rng, P, kmax=N // 2 - 1), (N,) * P.n)
            Q = assemble_compressed(a)
            Qd = assemble_dense(a).matrix
            assert np.max(np.abs(to_dense(Q).matrix - Qd)) <= 1e-13 * np.max(np.abs(Qd))
            x = rng.standard_normal(Q.D) + 1j * rng.standard_normal(Q.D)
            y = Qd @ x
            assert np.max(np.abs(apply(Q, x) - y)) <= 1e-12 * np.max(np.abs(y))
            assert Q.entry_count <= Q.g * Q.D
            assert np.linalg.norm(Qd - Qd.conj().T) <= 1e-12 * np.linalg.norm(Qd)
            keep = np.arange(1, Q.D)
            assert np.linalg.eigvalsh(Qd[np.ix_(keep, keep)]).min() > 0
            s = np.sum(np.abs(Qd) ** 2, axis=0)
            assert np.allclose(column_squared_norms(Q), s, rtol=1e-12, atol=0)
            assert np.allclose(diagonal(Q), np.diag(Qd), rtol=1e-12, atol=0)


def test_block_circulant_shift_invariance():
    a = to_field(alpha1(), (4, 4))
    K = [(i, j) for i in range(-2, 2) for j in range(-2, 2)]
    for kv in K:
        for ku in K:
            base = a[tuple(np.subtract(kv, ku))]
            for e in ((1, 0), (0, 1)):
                assert a[tuple(np.subtract(np.add(kv, e), np.add(ku, e)))] == base


def test_diagonal_formula():
    a = to_field(alpha1(), (8, 8))
    Q = assemble_compressed(a)
    from qpsolve.lattice import all_frequencies
    lam = all_frequencies((8, 8), a.P)
    assert np.allclose(diagonal(Q), 6 * np.sum(lam ** 2, axis=1), rtol=1e-13)
    assert np.all(diagonal(assemble_compressed(a, drop_tol=np.inf)) == 0)


def test_dense_cap():
    a = to_field(alpha1(), (8, 8))
    with pytest.raises(MemoryError):
        assemble_dense(a, cap=32)


def test_dense_small_case():
    P = ProjectionMatrix([[2 * np.pi]])
    Q = assemble_dense(to_field(TermList.from_dict({(0,): 1.0}, P), (2,))).matrix
    assert np.allclose(Q, np.diag([0, (2 * np.pi) ** 2]))


def test_anisotropic_reduces_and_constants():
    s2 = np.sqrt(2)
    P = ProjectionMatrix(2 * np.pi * np.array([[1, s2, 1, s2], [1, s2, 0, 0]]))
    rng = np.random.default_rng(5)
    a = to_field(random_real_terms(rng, P, kmax=1), (4,) * 4)
    Qs = assemble_compressed(a)
    Qa = assemble_anisotropic([a, a], P)
    assert np.max(np.abs(to_dense(Qs).matrix - to_dense(Qa).matrix)) < 1e-12 * np.abs(Qs.values).max()
    ca = to_field(TermList.from_dict({(0, 0, 0, 0): 2.0}, P), (4,) * 4)
    cb = to_field(TermList.from_dict({(0, 0, 0, 0): 5.0}, P), (4,) * 4)
    Q = assemble_anisotropic([ca, cb], P)
    from qpsolve.lattice import all_frequencies
    lam = all_frequencies((4,) * 4, P)
    assert np.all(Q.rows == Q.cols)
    assert np.allclose(diagonal(Q), 2 * lam[:, 0] ** 2 + 5 * lam[:, 1] ** 2)


def test_dump_roundtrip(tmp_path):
    Q = assemble_compressed(to_field(alpha1(), (4, 4)))
    p = tmp_path / "q.bin"
    dump_triples(Q, p)
    raw = p.read_bytes()
    assert raw[:4] == b"QPCS" and len(raw) == 32 + 32 * Q.entry_count
    D, r, c, v = load_triples(p)
    assert D == 16 and np.array_equal(r, Q.rows) and np.array_equal(c, Q.cols) and np.array_equal(v, Q.values)
    p.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        load_triples(p)
