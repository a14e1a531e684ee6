"""Kernel interpolation, power functions, and the greedy baseline."""

import math

import numpy as np
import pytest
import scipy.linalg as sla

from fekete.errors import ConditioningError, NumericsError
from fekete.geometry import interval_candidates, lattice_candidates, sphere_candidates
from fekete.interpolation import (
    KernelSystem,
    PointSet,
    condition_number,
    determinant_ratio_power,
    empty_system,
    greedy_pick,
    interpolate,
    kernel_system,
    max_power_over,
    p_greedy,
    power_function,
)
from fekete.kernels import brownian_kernel, gaussian_kernel, spherical_imq_kernel

CROSS_ORACLE_TOL = 1e-8


def _det3_cofactor(m):
    return (
        m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
        - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
        + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
    )


def _naive_greedy(kernel, pts, n):
    """Full recomputation per step; oracle for the incremental path.

    Candidate choice reuses greedy_pick so both paths share one tie rule;
    the power values themselves come from fresh factorizations.
    """
    diag = np.array([kernel.eval(p, p) for p in pts])
    chosen = [greedy_pick(diag)]
    for _ in range(n - 1):
        system = kernel_system(kernel, pts[np.array(chosen)])
        cross = np.array(
            [[kernel.eval(p, q) for q in system.nodes.points] for p in pts]
        )
        sol = sla.cho_solve(system.cho, cross.T)
        p2 = diag - np.einsum("ij,ji->i", cross, sol)
        p2[np.array(chosen)] = -math.inf
        chosen.append(greedy_pick(p2))
    return chosen


class TestPointSet:
    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            PointSet(np.array([0.3, 0.3]))

    def test_empty_allowed(self):
        assert len(PointSet(np.empty(0))) == 0


class TestKernelSystem:
    def test_brownian_single_right_endpoint(self):
        sys_ = kernel_system(brownian_kernel(), [1.0])
        np.testing.assert_array_equal(sys_.gram, [[1.0]])

    def test_gaussian_single(self):
        sys_ = kernel_system(gaussian_kernel(1), [0.42])
        np.testing.assert_array_equal(sys_.gram, [[1.0]])

    def test_brownian_three_points(self):
        pts = [1.0 / 3.0, 2.0 / 3.0, 1.0]
        sys_ = kernel_system(brownian_kernel(), pts)
        expected = np.array([[min(a, b) for b in pts] for a in pts])
        np.testing.assert_array_equal(sys_.gram, expected)
        assert np.linalg.det(sys_.gram) == pytest.approx(
            _det3_cofactor(expected), rel=1e-12
        )

    def test_empty_points_need_empty_system(self):
        with pytest.raises(ValueError, match="empty_system"):
            kernel_system(brownian_kernel(), [])

    def test_singular_gram_raises(self):
        # K(0, 0) = 0 for the Brownian kernel
        with pytest.raises(ConditioningError):
            kernel_system(brownian_kernel(), [0.0])

    def test_factorization_reconstructs_gram(self):
        rng = np.random.default_rng(113)
        pts = np.sort(rng.uniform(0.05, 1.0, size=8))
        sys_ = kernel_system(brownian_kernel(), pts)
        lmat = np.tril(sys_.cho[0])
        err = np.max(np.abs(lmat @ lmat.T - sys_.gram))
        assert err <= 1e-10 * np.max(np.abs(sys_.gram))


class TestInterpolate:
    def test_zero_values_zero_function(self):
        sys_ = kernel_system(brownian_kernel(), [0.25, 0.75])
        f = interpolate(sys_, [0.0, 0.0])
        assert f(0.5) == 0.0

    def test_single_point_closed_form(self):
        k = brownian_kernel()
        sys_ = kernel_system(k, [0.5])
        f = interpolate(sys_, [3.0])
        for x in (0.1, 0.4, 0.9):
            assert f(x) == pytest.approx(3.0 * k.eval(x, 0.5) / 0.5, rel=1e-14)

    def test_reproduces_kernel_translate_at_nodes(self):
        k = gaussian_kernel(1)
        nodes = np.array([-0.8, -0.1, 0.3, 0.9])
        z = 0.2
        sys_ = kernel_system(k, nodes)
        f = interpolate(sys_, [k.eval(x, z) for x in nodes])
        for x in nodes:
            assert f(x) == pytest.approx(k.eval(x, z), rel=1e-8)

    def test_error_bounded_by_power_times_norm(self):
        """|f - s_f| <= ||f|| P(x) with f = K(., z), ||f|| = sqrt(K(z, z))."""
        rng = np.random.default_rng(127)
        k = brownian_kernel()
        for _ in range(20):
            nodes = np.sort(rng.choice(np.linspace(0.05, 1.0, 40), 5, replace=False))
            z = float(rng.uniform(0.05, 1.0))
            sys_ = kernel_system(k, nodes)
            f = interpolate(sys_, [k.eval(x, z) for x in nodes])
            power = power_function(sys_)
            norm = math.sqrt(k.eval(z, z))
            for x in rng.uniform(0.0, 1.0, size=10):
                assert abs(k.eval(x, z) - f(x)) <= norm * power(x) + 1e-9

    def test_empty_system_interpolates_zero(self):
        f = interpolate(empty_system(gaussian_kernel(1)), [])
        assert f(0.3) == 0.0

    def test_value_length_mismatch(self):
        sys_ = kernel_system(brownian_kernel(), [0.5, 1.0])
        with pytest.raises(ValueError):
            interpolate(sys_, [1.0])


class TestPowerFunction:
    def test_zero_at_nodes(self):
        nodes = [0.2, 0.5, 0.9]
        power = power_function(kernel_system(brownian_kernel(), nodes))
        for x in nodes:
            assert power(x) == pytest.approx(0.0, abs=1e-7)

    def test_brownian_single_node_hand_value(self):
        # X = {1}: P(0.5)^2 = 0.5 - 0.5^2/1 = 0.25
        power = power_function(kernel_system(brownian_kernel(), [1.0]))
        assert power(0.5) == pytest.approx(0.5, rel=1e-12)

    def test_empty_set_is_sqrt_diagonal(self):
        power = power_function(empty_system(brownian_kernel()))
        assert power(0.49) == pytest.approx(math.sqrt(0.49), rel=1e-14)

    def test_corrupt_factorization_detected(self):
        k = brownian_kernel()
        nodes = PointSet(np.array([0.5]))
        bad_cho = sla.cho_factor(np.array([[1e-6]]), lower=True)
        sys_ = KernelSystem(k, nodes, np.array([[0.5]]), bad_cho)
        with pytest.raises(NumericsError):
            power_function(sys_)(0.4)

    def test_matches_determinant_ratio(self):
        """Both power formulas agree on random draws (200 cases).

        Draws are rejected when the Gram is badly conditioned or the probe
        sits almost on a node: there the determinant ratio loses all its
        digits to cancellation and stops being a usable oracle.
        """
        rng = np.random.default_rng(131)
        kernels = [brownian_kernel(), gaussian_kernel(1)]
        lo = [0.05, -1.0]
        checked = 0
        while checked < 200:
            k = kernels[checked % 2]
            n = int(rng.integers(1, 9))
            pts = rng.uniform(lo[checked % 2], 1.0, size=n)
            x = float(rng.uniform(lo[checked % 2], 1.0))
            if len(np.unique(np.round(pts, 12))) < n:
                continue
            if np.min(np.abs(pts - x)) < 0.05:
                continue
            system = kernel_system(k, pts)
            if condition_number(system) > 1e6:
                continue
            direct = power_function(system)(x)
            ratio = determinant_ratio_power(k, pts, x)
            assert direct == pytest.approx(ratio, rel=CROSS_ORACLE_TOL, abs=1e-10)
            checked += 1

    def test_monotone_under_set_growth(self):
        """Adding a node never increases the power anywhere."""
        rng = np.random.default_rng(137)
        k = gaussian_kernel(1)
        for _ in range(100):
            pts = rng.choice(np.linspace(-1, 1, 201), size=4, replace=False)
            extra = float(rng.uniform(-1, 1))
            if np.min(np.abs(pts - extra)) < 1e-6:
                continue
            x = float(rng.uniform(-1, 1))
            small = power_function(kernel_system(k, pts))(x)
            big = power_function(kernel_system(k, np.append(pts, extra)))(x)
            assert big <= small + 1e-9


class TestDeterminantRatioPower:
    def test_empty_set_convention(self):
        got = determinant_ratio_power(brownian_kernel(), [], 0.36)
        assert got == pytest.approx(0.6, rel=1e-14)

    def test_vanishes_at_members(self):
        got = determinant_ratio_power(brownian_kernel(), [0.5, 1.0], 0.5)
        assert got == pytest.approx(0.0, abs=1e-12)

    def test_singular_base_raises(self):
        with pytest.raises(ConditioningError):
            determinant_ratio_power(brownian_kernel(), [0.0], 0.5)


class TestMaxPowerOver:
    def test_zero_when_nodes_cover_candidates(self):
        cands = interval_candidates(5, "interval01")
        sys_ = kernel_system(brownian_kernel(), cands.points[1:])
        val, _ = max_power_over(sys_, cands.points[1:])
        assert val == pytest.approx(0.0, abs=1e-7)

    def test_empty_set_gaussian_tie_break(self):
        cands = interval_candidates(9, "interval11")
        val, idx = max_power_over(empty_system(gaussian_kernel(1)), cands)
        assert val == pytest.approx(1.0, rel=1e-14)
        assert idx == 0

    def test_greedy_max_decreases(self):
        # steps 14 and 15 are a symmetric tie pair, so the max only plateaus
        # there; over the pair it must drop strictly
        k = brownian_kernel()
        cands = interval_candidates(250)
        seq = p_greedy(k, cands, 16)
        at14 = max_power_over(kernel_system(k, cands.points[seq[:14]]), cands)[0]
        at15 = max_power_over(kernel_system(k, cands.points[seq[:15]]), cands)[0]
        at16 = max_power_over(kernel_system(k, cands.points[seq]), cands)[0]
        assert at15 <= at14
        assert at16 < at14


class TestPGreedy:
    def test_brownian_starts_at_right_endpoint(self):
        cands = interval_candidates(100)
        assert p_greedy(brownian_kernel(), cands, 1) == [99]

    def test_gaussian_starts_at_first_index(self):
        cands = interval_candidates(250, "interval11")
        assert p_greedy(gaussian_kernel(1), cands, 1) == [0]

    def test_three_point_brownian_matches_naive(self):
        cands = interval_candidates(50)
        got = p_greedy(brownian_kernel(), cands, 3)
        assert got == _naive_greedy(brownian_kernel(), cands.points, 3)

    def test_bad_budget(self):
        cands = interval_candidates(10)
        with pytest.raises(ValueError):
            p_greedy(brownian_kernel(), cands, 11)
        with pytest.raises(ValueError):
            p_greedy(brownian_kernel(), cands, 0)

    def test_exhausted_candidates(self):
        # after picking 1.0 the only other Brownian candidate has zero power
        with pytest.raises(ConditioningError, match="exhausted"):
            p_greedy(brownian_kernel(), np.array([0.0, 1.0]), 2)

    # Depth per configuration is the largest n <= 20 whose Gram stays below
    # condition 1e12.  The Gaussian interval grid passes that wall at n = 13
    # (3e15 by n = 15, residual powers at 1e-16); past it both paths pick
    # among pure roundoff and index agreement is meaningless.
    @pytest.mark.parametrize(
        "label,kernel,cands,depth",
        [
            ("brownian-interval", brownian_kernel(), interval_candidates(250), 20),
            (
                "gaussian-interval",
                gaussian_kernel(1),
                interval_candidates(250, "interval11"),
                12,
            ),
            ("sphere", spherical_imq_kernel(0.1), sphere_candidates(25), 20),
            ("square", gaussian_kernel(2), lattice_candidates(23, "square"), 20),
            ("triangle", gaussian_kernel(2), lattice_candidates(32, "triangle"), 20),
            ("disk", gaussian_kernel(2), lattice_candidates(27, "disk"), 20),
        ],
    )
    def test_incremental_equals_naive_on_example_grids(
        self, label, kernel, cands, depth
    ):
        got = p_greedy(kernel, cands, depth)
        assert got == _naive_greedy(kernel, cands.points, depth), label


class TestConditionNumber:
    def test_single_point(self):
        assert condition_number(kernel_system(brownian_kernel(), [1.0])) == 1.0

    def test_identity_gram(self):
        sys_ = KernelSystem(
            gaussian_kernel(1),
            PointSet(np.array([0.0, 5.0])),
            np.eye(2),
            sla.cho_factor(np.eye(2), lower=True),
        )
        assert condition_number(sys_) == pytest.approx(1.0, rel=1e-12)

    def test_two_by_two_closed_form(self):
        # gram [[1, a], [a, 1]] has condition (1+a)/(1-a); a = 1/2 gives 3
        d = math.sqrt(math.log(2.0))
        sys_ = kernel_system(gaussian_kernel(1), [0.0, d])
        assert condition_number(sys_) == pytest.approx(3.0, rel=1e-12)

    def test_not_positive_definite_is_inf(self):
        sys_ = KernelSystem(
            brownian_kernel(),
            PointSet(np.array([0.5, 1.0])),
            np.array([[1.0, 2.0], [2.0, 1.0]]),
            sla.cho_factor(np.eye(2), lower=True),
        )
        assert condition_number(sys_) == math.inf


class TestZeroAtNodesSweep:
    def test_generated_sets_keep_power_zero_at_nodes(self):
        k = brownian_kernel()
        cands = interval_candidates(50)
        seq = p_greedy(k, cands, 10)
        sys_ = kernel_system(k, cands.points[seq])
        assert condition_number(sys_) <= 1e12
        power = power_function(sys_)
        assert max(power(x) for x in sys_.nodes.points) <= 1e-7
