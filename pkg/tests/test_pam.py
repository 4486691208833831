import numpy as np
import pytest

from qpsolve.assembly import assemble_compressed, to_dense
from qpsolve.lattice import ProjectionMatrix
from qpsolve.pam import (make_periodic_problem, nearest_int, pam_discretize, pam_solve, pam_solve_and_error,
                         periodize_terms, rational_approx)
from qpsolve.qpfield import SpectralField, TermList, qp_distance, rhs_terms, to_field
from qpsolve.solver import build_preconditioner, cpcg_solve

from conftest import S2, alpha1, u1

L_SWEEP = [2, 5, 12, 29, 70, 169, 408]


def test_nearest_int_half_away():
    assert list(nearest_int([2.5, -2.5, 1.49, -0.5])) == [3, -3, 1, -1]


def test_rational_approx_examples():
    assert rational_approx([1.0], 7).diophantine_error == 0
    r = rational_approx([S2], 5)
    assert r.numerators == (7,) and f"{r.diophantine_error:.2e}" == "7.11e-02"
    r = rational_approx([S2], 408)
    assert r.numerators == (577,) and f"{r.diophantine_error:.2e}" == "8.67e-04"
    assert r.fractions() == ["577/408"]
    with pytest.raises(ValueError):
        rational_approx([S2], 0)


def test_rational_error_bounded():
    for L in range(1, 200):
        e = rational_approx([S2, np.sqrt(3)], L).diophantine_error
        assert 0 <= e <= 0.5


def test_periodize_collisions_add():
    P = ProjectionMatrix(2 * np.pi * np.array([[1.0, S2]]))
    t = TermList.from_dict({(3, -2): 1.0, (0, 0): 2.0}, P)
    H = np.array([[2, 3]])
    p = periodize_terms(t, H, 2)
    assert p.as_dict() == {(0,): 3.0}
    assert np.allclose(p.P.entries, [[np.pi]])


def test_degenerate_periodic_reduction():
    P = ProjectionMatrix([[2 * np.pi]])
    a = TermList.from_dict({(0,): 3.0, (1,): 0.5, (-1,): 0.5}, P)
    prob = make_periodic_problem(a, a, 1, 8)
    Qp = pam_discretize(prob)
    Qm = assemble_compressed(to_field(a, (8,)))
    assert np.array_equal(to_dense(Qp).matrix, to_dense(Qm).matrix)


def test_l5_solvable_and_storage():
    prob = make_periodic_problem(alpha1(), rhs_terms(alpha1(), u1()), 5, 16)
    Q = pam_discretize(prob)
    assert Q.entry_count <= Q.g * prob.E
    u, rep = pam_solve(prob)
    assert rep.converged and rep.residual_history[-1] <= 1e-14 * rep.rhs_norm
    assert u.sizes == (80,)


def test_exact_periodic_matches_pm():
    # frequencies 1/2 and 1 are rational with denominator dividing L = 2
    P = ProjectionMatrix([[np.pi]])
    a = TermList.from_dict({(0,): 5.0, (2,): 0.5, (-2,): 0.5}, P)
    u = TermList.from_dict({(1,): -0.5j, (-1,): 0.5j, (3,): 0.25, (-3,): 0.25}, P)
    f = rhs_terms(a, u)
    prob = make_periodic_problem(a, f, 2, 8)
    e_pam, _ = pam_solve_and_error(prob, u)
    Q = assemble_compressed(to_field(a, (16,)))
    F = to_field(f, (16,)).flat()
    x, _ = cpcg_solve(Q, build_preconditioner(Q), F)
    e_pm = qp_distance(SpectralField.from_flat(x, (16,), P), u, ignore_mean=True)
    assert e_pam <= 1e-13 and abs(e_pam - e_pm) <= 1e-12


def test_pam_error_l5_and_dominance():
    f = rhs_terms(alpha1(), u1())
    prob = make_periodic_problem(alpha1(), f, 5, 16)
    e, _ = pam_solve_and_error(prob, u1())
    assert abs(e - 9.18e-2) <= 0.1 * 9.18e-2
    for L in L_SWEEP[:5]:
        prob = make_periodic_problem(alpha1(), f, L, 16)
        e, _ = pam_solve_and_error(prob, u1())
        assert prob.diophantine_error / 3 <= e <= 3 * prob.diophantine_error


def test_origin_cell_option():
    prob = make_periodic_problem(alpha1(), rhs_terms(alpha1(), u1()), 5, 8)
    e0, _ = pam_solve_and_error(prob, u1(), cell="origin")
    e1, _ = pam_solve_and_error(prob, u1(), cell="centered")
    assert e0 > e1 > 0
    with pytest.raises(ValueError):
        pam_solve_and_error(prob, u1(), cell="elsewhere")


def test_odd_grid_rejected():
    with pytest.raises(ValueError):
        make_periodic_problem(alpha1(), alpha1(), 5, 3)
