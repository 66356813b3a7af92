"""Interior-point LMI solver: analytic cases, certified optima, verification."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from texplore.errors import DataError, DimensionError
from texplore.sdp import (
    ConicProgram,
    LmiBlock,
    SolverOptions,
    find_strictly_feasible,
    hermitian_embed,
    program_from_dict,
    program_to_dict,
    solve,
    verify,
)


def sym(M):
    return 0.5 * (M + M.T)


def certified_program(rng, n_vars=4, n_blocks=2):
    """Random program whose optimum value is known exactly by duality.

    Per block, a rank-deficient primal slack S* = W W^T and a dual certificate
    Z* supported on its null space are built at a chosen x*; the objective is
    defined so complementary slackness holds, which pins the optimum at
    c^T x*.  Fi[0] = I in every block keeps a strict interior reachable.
    """
    x_star = rng.normal(size=n_vars)
    blocks = []
    c = np.zeros(n_vars)
    for b in range(n_blocks):
        m = int(rng.integers(2, 5))
        r = int(rng.integers(1, m))
        W = rng.normal(size=(m, r))
        S_star = W @ W.T
        # orthonormal basis of null(S*), the complement of col(W)
        U, _, _ = np.linalg.svd(W, full_matrices=True)
        N = U[:, r:]
        Mcore = rng.normal(size=(m - r, m - r))
        Z_star = N @ (Mcore @ Mcore.T + 0.1 * np.eye(m - r)) @ N.T
        Fi = [np.eye(m)]
        for _ in range(1, n_vars):
            Fi.append(sym(rng.normal(size=(m, m))))
        F0 = S_star - sum(x_star[i] * Fi[i] for i in range(n_vars))
        blocks.append(LmiBlock(F0, tuple(Fi), name=f"b{b}"))
        for i in range(n_vars):
            c[i] += float(np.trace(Z_star @ Fi[i]))
    prog = ConicProgram(c, tuple(blocks))
    return prog, float(c @ x_star)


# -- hermitian embedding ---------------------------------------------------


def test_embed_real_matrix_is_block_diagonal():
    H = np.array([[2.0, 0.5], [0.5, 1.0]])
    E = hermitian_embed(H)
    assert_allclose(E, np.block([[H, np.zeros((2, 2))], [np.zeros((2, 2)), H]]))


def test_embed_complex_eigenvalues_double():
    H = np.array([[2.0, 1j], [-1j, 2.0]])
    E = hermitian_embed(H)
    assert_allclose(np.linalg.eigvalsh(E), [1.0, 1.0, 3.0, 3.0], rtol=0.0, atol=1e-12)


def test_embed_preserves_min_eigenvalue():
    rng = np.random.default_rng(40)
    M = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    H = 0.5 * (M + M.conj().T)
    H -= (np.linalg.eigvalsh(H)[0] + 0.1) * np.eye(3)  # eigmin exactly -0.1
    E = hermitian_embed(H)
    assert np.linalg.eigvalsh(E)[0] == pytest.approx(-0.1, abs=1e-10)


# -- analytic programs -----------------------------------------------------


def two_by_two_program():
    # min x subject to [[x, 1], [1, x]] >= 0
    F0 = np.array([[0.0, 1.0], [1.0, 0.0]])
    F1 = np.eye(2)
    return ConicProgram(np.array([1.0]), (LmiBlock(F0, (F1,)),))


def test_solve_two_by_two_analytic():
    sol = solve(two_by_two_program())
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(1.0, abs=1e-8)
    assert sol.objective == pytest.approx(1.0, abs=1e-8)


def test_solve_scalar_lower_bound():
    a = -2.7
    prog = ConicProgram(np.array([1.0]), (LmiBlock(np.array([[-a]]), (np.eye(1),)),))
    sol = solve(prog)
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(a, abs=1e-8)


def test_solution_margins_respect_tolerance():
    # both tolerances are relative: feas to the block norm, gap to the objective
    sol = solve(two_by_two_program())
    for me in sol.min_eig_per_block:
        assert me >= -1e-8
    assert sol.duality_gap <= 1e-8 * (1.0 + abs(sol.objective))


# -- certified random optima -----------------------------------------------


def test_solve_certified_random_programs():
    rng = np.random.default_rng(41)
    for _ in range(20):
        prog, opt = certified_program(rng)
        sol = solve(prog)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(opt, rel=1e-6, abs=1e-6)
        for me in sol.min_eig_per_block:
            assert me >= -1e-8


def test_warm_start_reaches_same_optimum():
    rng = np.random.default_rng(42)
    prog, opt = certified_program(rng)
    cold = solve(prog)
    warm = solve(prog, x0=cold.x)
    assert warm.status == "optimal"
    assert warm.objective == pytest.approx(opt, rel=1e-6, abs=1e-6)


def test_warm_start_ignores_bad_hint():
    rng = np.random.default_rng(43)
    prog, opt = certified_program(rng)
    bad = np.full(prog.n_vars, 1e6)
    sol = solve(prog, x0=bad)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(opt, rel=1e-6, abs=1e-6)


# -- infeasibility ---------------------------------------------------------


def infeasible_program():
    # x <= -1 and x >= 1 cannot both hold
    b1 = LmiBlock(np.array([[-1.0]]), (np.array([[-1.0]]),))
    b2 = LmiBlock(np.array([[-1.0]]), (np.array([[1.0]]),))
    return ConicProgram(np.array([1.0]), (b1, b2))


def test_solve_reports_infeasible():
    sol = solve(infeasible_program())
    assert sol.status == "infeasible"


def test_find_strictly_feasible_none_when_empty():
    x, margins = find_strictly_feasible(infeasible_program())
    assert x is None


def test_find_strictly_feasible_point_is_interior():
    rng = np.random.default_rng(44)
    prog, _ = certified_program(rng)
    x, _ = find_strictly_feasible(prog)
    assert x is not None
    for b in prog.blocks:
        assert np.linalg.eigvalsh(b.value(x))[0] > 0.0


# -- verification ----------------------------------------------------------


def test_verify_accepts_solver_output():
    sol = solve(two_by_two_program())
    rep = verify(two_by_two_program(), sol.x)
    assert rep["feasible"]
    assert rep["objective"] == pytest.approx(sol.objective)


def test_verify_rejects_violated_point():
    prog = two_by_two_program()
    rep = verify(prog, np.array([-1.0]))
    assert not rep["feasible"]
    assert rep["min_eigs"][0] < -0.5


def test_verify_matches_solver_eigenvalues():
    rng = np.random.default_rng(45)
    for _ in range(100):
        prog, _ = certified_program(rng, n_vars=3, n_blocks=2)
        sol = solve(prog)
        if sol.status != "optimal":
            continue
        rep = verify(prog, sol.x)
        assert_allclose(rep["min_eigs"], sol.min_eig_per_block, rtol=0.0, atol=1e-9)


# -- construction and serialization ----------------------------------------


def test_block_rejects_asymmetric_matrix():
    with pytest.raises(DataError):
        LmiBlock(np.array([[0.0, 1.0], [0.0, 0.0]]), (np.eye(2),))


def test_block_rejects_mismatched_sizes():
    with pytest.raises(DimensionError):
        LmiBlock(np.zeros((2, 2)), (np.eye(3),))


def test_program_rejects_wrong_fi_count():
    blk = LmiBlock(np.zeros((2, 2)), (np.eye(2),))
    with pytest.raises(DimensionError):
        ConicProgram(np.array([1.0, 2.0]), (blk,))


def test_program_dict_roundtrip():
    rng = np.random.default_rng(46)
    prog, _ = certified_program(rng)
    prog2 = program_from_dict(program_to_dict(prog))
    assert_allclose(prog2.c, prog.c)
    for b1, b2 in zip(prog.blocks, prog2.blocks):
        assert_allclose(b1.F0, b2.F0)
        for F1, F2 in zip(b1.Fi, b2.Fi):
            assert_allclose(F1, F2)
        assert b1.name == b2.name


def test_block_value_is_affine():
    rng = np.random.default_rng(47)
    prog, _ = certified_program(rng, n_vars=3, n_blocks=1)
    b = prog.blocks[0]
    x = rng.normal(size=3)
    expected = b.F0 + sum(x[i] * b.Fi[i] for i in range(3))
    assert_allclose(b.value(x), expected, rtol=0.0, atol=1e-12)
