"""D-optimal design core: information matrices, determinants, oracle solvers."""

import math
from itertools import combinations

import numpy as np
import pytest

from fekete.design import (
    DesignProblem,
    Weights,
    fekete_bruteforce,
    information_matrix,
    logdet_objective,
    multiplicative_solver,
    truncated_gram_det,
)
from fekete.errors import CapacityError
from fekete.geometry import interval_candidates
from fekete.interpolation import determinant_ratio_power
from fekete.kernels import brownian_kernel

FOUR_ATOMS = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 0.0]])
# continuous optimum of the four-atom instance at budget 2; stationarity gives
# w = (0, 8/15, 8/15, 14/15), confirmed by grid search refined to 1e-3
FOUR_ATOM_OPT_DET = 64.0 / 15.0


def _det3_cofactor(m):
    return (
        m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
        - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
        + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
    )


def _feasible_weights(rng, m, n):
    """Random point of {0 <= w <= 1, sum w = n} by proportional waterfill."""
    w = np.zeros(m)
    u = rng.uniform(0.2, 1.0, size=m)
    free = list(range(m))
    rem = float(n)
    while free and rem > 0.0:
        cand = u[free] * (rem / u[free].sum())
        if cand.max() <= 1.0:
            w[free] = cand
            return w
        for f, c in zip(list(free), cand):
            if c >= 1.0:
                w[f] = 1.0
                rem -= 1.0
                free.remove(f)
    return w


class TestDesignProblem:
    def test_shape_and_budget_validation(self):
        with pytest.raises(ValueError):
            DesignProblem(np.ones(4), 1)
        with pytest.raises(ValueError):
            DesignProblem(np.ones((3, 2)), 4)
        with pytest.raises(ValueError):
            DesignProblem(np.ones((2, 3)), 1)
        with pytest.raises(ValueError):
            DesignProblem(np.ones((3, 2)), 1, frozenset({5}))
        with pytest.raises(ValueError):
            DesignProblem(np.ones((3, 2)), 1, frozenset({0, 1}))

    def test_weights_check(self):
        p = DesignProblem(FOUR_ATOMS, 2, frozenset({3}))
        Weights(np.array([0.5, 0.5, 0.0, 1.0])).check(p)
        with pytest.raises(ValueError):
            Weights(np.array([0.5, 0.5, 1.0, 0.0])).check(p)
        with pytest.raises(ValueError):
            Weights(np.array([0.2, 0.2, 0.2, 1.0])).check(p)


class TestInformationMatrix:
    def test_single_atom_rank_one(self):
        p = DesignProblem(FOUR_ATOMS, 2)
        m_mat = information_matrix(p, Weights(np.array([2.0, 0.0, 0.0, 0.0])))
        assert np.linalg.matrix_rank(m_mat) == 1
        assert np.linalg.det(m_mat) == pytest.approx(0.0, abs=1e-14)

    def test_orthonormal_atoms_identity(self):
        p = DesignProblem(np.eye(2), 2)
        m_mat = information_matrix(p, Weights(np.ones(2)))
        np.testing.assert_array_equal(m_mat, np.eye(2))

    def test_matches_cofactor_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(25):
            a = rng.normal(size=(6, 3))
            p = DesignProblem(a, 3)
            w = Weights(rng.uniform(0.2, 1.0, size=6) * 0.5)
            m_mat = information_matrix(p, w)
            np.testing.assert_allclose(m_mat, m_mat.T, atol=0)
            assert np.linalg.det(m_mat) == pytest.approx(
                _det3_cofactor(m_mat), rel=1e-12
            )

    def test_shape_error(self):
        p = DesignProblem(FOUR_ATOMS, 2)
        with pytest.raises(ValueError):
            information_matrix(p, Weights(np.ones(3)))


class TestLogdetObjective:
    def test_identity_zero(self):
        p = DesignProblem(np.eye(2), 2)
        assert logdet_objective(p, Weights(np.ones(2))) == 0.0

    def test_rank_deficient_minus_inf(self):
        p = DesignProblem(FOUR_ATOMS, 2)
        assert logdet_objective(p, Weights(np.array([2.0, 0.0, 0.0, 0.0]))) == -math.inf

    def test_matches_log_of_cofactor_det(self):
        rng = np.random.default_rng(37)
        for _ in range(25):
            a = rng.normal(size=(6, 3))
            p = DesignProblem(a, 3)
            w = Weights(rng.uniform(0.2, 1.0, size=6))
            val = logdet_objective(p, w)
            ref = math.log(_det3_cofactor(information_matrix(p, w)))
            assert val == pytest.approx(ref, abs=1e-10)


class TestTruncatedGramDet:
    def test_single_point_brownian(self):
        k = brownian_kernel()
        got = truncated_gram_det(k, [1.0])
        assert got == pytest.approx(8.0 / math.pi**2, rel=1e-14)
        # the rank-1 truncation misses the exact det K(1,1)=1 by about 0.189
        assert abs(got - 1.0) == pytest.approx(0.189, abs=1e-3)

    def test_zero_when_first_eigenfunction_vanishes(self):
        k = brownian_kernel()
        assert truncated_gram_det(k, [0.0]) == 0.0

    def test_three_point_ratio(self):
        """Rank-3 truncation underestimates the exact Gram det.

        The dropped Mercer tail is positive semidefinite, so by determinant
        superadditivity the truncated value sits below the exact one.  The
        ratio for the quarter-spaced grid is pinned as a regression value.
        """
        k = brownian_kernel()
        pts = [0.25, 0.5, 0.75]
        exact = np.linalg.det(np.array([[k.eval(a, b) for b in pts] for a in pts]))
        got = truncated_gram_det(k, pts)
        assert 0.0 < got < exact
        assert got / exact == pytest.approx(0.302968988, rel=1e-8)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            truncated_gram_det(brownian_kernel(), [])


class TestFeketeBruteforce:
    def test_full_set_when_m_equals_n(self):
        a = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 2.0]])
        p = DesignProblem(a, 3)
        idx, det = fekete_bruteforce(p)
        assert idx == (0, 1, 2)
        assert det == pytest.approx(np.linalg.det(a.T @ a), rel=1e-12)

    def test_four_atom_instance(self):
        p = DesignProblem(FOUR_ATOMS, 2)
        idx, det = fekete_bruteforce(p)
        assert idx == (1, 3)
        assert det == pytest.approx(4.0, rel=1e-14)

    def test_lexicographic_tie_break(self):
        # with atom 0 frozen, {0,1} and {0,2} share det 1; smaller tuple wins
        p = DesignProblem(FOUR_ATOMS, 2, frozenset({0}))
        idx, det = fekete_bruteforce(p)
        assert idx == (0, 1)
        assert det == pytest.approx(1.0, rel=1e-14)

    def test_beats_random_subsets(self):
        rng = np.random.default_rng(41)
        a = rng.normal(size=(9, 3))
        p = DesignProblem(a, 3)
        _, best = fekete_bruteforce(p)
        for _ in range(100):
            pick = rng.choice(9, size=3, replace=False)
            sub = a[np.sort(pick)]
            assert best >= float(np.linalg.det(sub.T @ sub)) - 1e-12

    def test_capacity_guard(self):
        p = DesignProblem(np.random.default_rng(1).normal(size=(50, 3)), 5)
        with pytest.raises(CapacityError):
            fekete_bruteforce(p)


class TestMultiplicativeSolver:
    def test_square_case_all_ones(self):
        a = np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 2.0]])
        res = multiplicative_solver(DesignProblem(a, 3), iters=50)
        np.testing.assert_allclose(res.w, 1.0, atol=1e-9)

    def test_four_atom_reaches_grid_optimum(self):
        p = DesignProblem(FOUR_ATOMS, 2)
        res = multiplicative_solver(p, iters=20000, tol=0.0)
        res.check(p)
        det = float(np.linalg.det(information_matrix(p, res)))
        assert det == pytest.approx(FOUR_ATOM_OPT_DET, rel=1e-6)

    def test_objective_monotone_in_iteration_budget(self):
        rng = np.random.default_rng(43)
        a = rng.normal(size=(10, 3))
        p = DesignProblem(a, 3)
        objs = [
            logdet_objective(p, multiplicative_solver(p, iters=k, tol=0.0))
            for k in (5, 20, 100, 1000)
        ]
        for lo, hi in zip(objs, objs[1:]):
            assert hi >= lo - 1e-12

    def test_respects_frozen_indices(self):
        p = DesignProblem(FOUR_ATOMS, 2, frozenset({2}))
        res = multiplicative_solver(p, iters=500)
        res.check(p)
        assert res.w[2] >= 1.0 - 1e-6

    def test_singular_start_raises(self):
        a = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
        with pytest.raises(ValueError):
            multiplicative_solver(DesignProblem(a, 2))


class TestDeterminantInequalities:
    def test_log_concavity(self):
        """logdet M(w) is concave along chords of the feasible slice."""
        rng = np.random.default_rng(47)
        checked = 0
        while checked < 200:
            m = int(rng.integers(4, 9))
            ell = int(rng.integers(2, min(m, 5)))
            n = int(rng.integers(ell, m))
            a = rng.normal(size=(m, ell))
            p = DesignProblem(a, n)
            w1 = _feasible_weights(rng, m, n)
            w2 = _feasible_weights(rng, m, n)
            f1 = logdet_objective(p, Weights(w1))
            f2 = logdet_objective(p, Weights(w2))
            if not (np.isfinite(f1) and np.isfinite(f2)):
                continue
            mid = logdet_objective(p, Weights(0.5 * (w1 + w2)))
            assert mid >= 0.5 * (f1 + f2) - 1e-9
            checked += 1

    def test_determinant_cauchy_schwarz(self):
        """det(A^T B)^2 <= det(A^T A) det(B^T B)."""
        rng = np.random.default_rng(53)
        for _ in range(500):
            m = int(rng.integers(2, 9))
            ell = int(rng.integers(1, m + 1))
            a = rng.normal(size=(m, ell))
            b = rng.normal(size=(m, ell))
            lhs = float(np.linalg.det(a.T @ b)) ** 2
            rhs = float(np.linalg.det(a.T @ a)) * float(np.linalg.det(b.T @ b))
            assert lhs <= rhs * (1.0 + 1e-9) + 1e-12

    def test_determinant_superadditive_on_psd(self):
        """det(C + D) >= det C + det D for PSD C, D."""
        rng = np.random.default_rng(59)
        for _ in range(500):
            ell = int(rng.integers(1, 7))
            b1 = rng.normal(size=(ell + 2, ell))
            b2 = rng.normal(size=(ell + 2, ell))
            c, d = b1.T @ b1, b2.T @ b2
            lhs = float(np.linalg.det(c + d))
            rhs = float(np.linalg.det(c)) + float(np.linalg.det(d))
            assert lhs >= rhs - 1e-9 * max(1.0, abs(lhs))

    def test_power_function_upper_bound(self):
        """max_x P^2(x) <= kappa_(n+1) / det K over a small Brownian grid."""
        k = brownian_kernel()
        grid = interval_candidates(12).points[1:]
        chosen = [grid[2], grid[5], grid[9]]
        gram = np.array([[k.eval(a, b) for b in chosen] for a in chosen])
        det_k = float(np.linalg.det(gram))
        kappa = max(
            float(np.linalg.det(np.array([[k.eval(a, b) for b in s] for a in s])))
            for s in combinations(grid, 4)
        )
        worst = max(determinant_ratio_power(k, chosen, x) ** 2 for x in grid)
        assert worst <= kappa / det_k + 1e-9
