"""Candidate grid constructors: point placement and neighbor wiring."""

import math

import numpy as np
import pytest

from fekete.geometry import (
    CandidateSet,
    interval_candidates,
    lattice_candidates,
    sphere_candidates,
)


def _check_graph(cands: CandidateSet):
    """Neighbor lists must be symmetric, in range, sorted, without self loops."""
    m = len(cands.points)
    assert len(cands.neighbors) == m
    for j, nbrs in enumerate(cands.neighbors):
        assert list(nbrs) == sorted(set(nbrs))
        for i in nbrs:
            assert 0 <= i < m
            assert i != j
            assert j in cands.neighbors[i]


class TestInterval:
    def test_endpoints_unit(self):
        c = interval_candidates(250)
        assert c.points[0] == 0.0
        assert c.points[-1] == 1.0
        assert len(c.points) == 250
        np.testing.assert_allclose(np.diff(c.points), 1.0 / 249.0, rtol=1e-12)

    def test_symmetric_variant(self):
        c = interval_candidates(3, "interval11")
        np.testing.assert_allclose(c.points, [-1.0, 0.0, 1.0], atol=1e-15)
        assert c.neighbors[1] == (0, 2)
        assert c.neighbors[0] == (1,)

    def test_two_points(self):
        c = interval_candidates(2)
        assert c.neighbors == ((1,), (0,))

    def test_bad_args(self):
        with pytest.raises(ValueError):
            interval_candidates(1)
        with pytest.raises(ValueError):
            interval_candidates(10, "interval02")

    @pytest.mark.parametrize("m", [2, 3, 10, 137, 300])
    def test_graph_wellformed(self, m):
        _check_graph(interval_candidates(m))
        _check_graph(interval_candidates(m, "interval11"))


class TestSphere:
    def test_count_k25(self):
        c = sphere_candidates(25)
        assert len(c.points) == 24 * 23 + 2
        assert len(c.points) == 554

    def test_poles_exact(self):
        c = sphere_candidates(25)
        np.testing.assert_array_equal(c.points[0], [0.0, 0.0, 1.0])
        np.testing.assert_array_equal(c.points[-1], [0.0, 0.0, -1.0])

    def test_unit_norm(self):
        c = sphere_candidates(25)
        norms = np.linalg.norm(c.points, axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_pole_neighborhoods(self):
        c = sphere_candidates(25)
        m = len(c.points)
        assert c.neighbors[0] == tuple(range(1, 25))
        assert c.neighbors[m - 1] == tuple(range(m - 25, m - 1))

    def test_ring_wraparound(self):
        # k=4: point 2 (1-based) sits at q=1, so its left ring neighbor wraps to 4
        c = sphere_candidates(4)
        assert 3 in c.neighbors[1]

    def test_first_ring_placement(self):
        k = 25
        c = sphere_candidates(k)
        theta = math.pi / (k - 1)
        np.testing.assert_allclose(
            c.points[1], [math.sin(theta), 0.0, math.cos(theta)], atol=1e-15
        )

    def test_bad_args(self):
        with pytest.raises(ValueError):
            sphere_candidates(2)

    @pytest.mark.parametrize("k", [3, 4, 5, 10, 17, 30])
    def test_graph_wellformed(self, k):
        c = sphere_candidates(k)
        assert len(c.points) == (k - 1) * (k - 2) + 2
        _check_graph(c)


class TestLattice:
    def test_square_count(self):
        c = lattice_candidates(23, "square")
        assert len(c.points) == 529

    def test_triangle_count(self):
        c = lattice_candidates(32, "triangle")
        assert len(c.points) == 520

    def test_disk_count(self):
        c = lattice_candidates(27, "disk")
        assert len(c.points) == 529

    @pytest.mark.parametrize(
        "domain,member",
        [
            ("square", lambda p: True),
            ("triangle", lambda p: p[0] + p[1] >= 0.0),
            ("disk", lambda p: p[0] ** 2 + p[1] ** 2 <= 1.0),
        ],
    )
    @pytest.mark.parametrize("k", [2, 3, 5, 9, 16, 32])
    def test_membership_oracle(self, domain, member, k):
        """Retained points are exactly the grid points passing the float test."""
        c = lattice_candidates(k, domain)
        for p in c.points:
            assert member(p)
        grid = [-1.0 + 2.0 * i / (k - 1) for i in range(k)]
        full = [(x1, x2) for x1 in grid for x2 in grid]
        assert len(c.points) == sum(1 for p in full if member(p))

    def test_interior_four_neighbors(self):
        c = lattice_candidates(5, "square")
        # row-major index of the center point of a 5x5 grid
        center = 12
        assert c.neighbors[center] == (7, 11, 13, 17)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            lattice_candidates(1, "square")
        with pytest.raises(ValueError):
            lattice_candidates(5, "hexagon")

    @pytest.mark.parametrize("domain", ["square", "triangle", "disk"])
    @pytest.mark.parametrize("k", [2, 3, 5, 9, 16])
    def test_graph_wellformed(self, domain, k):
        _check_graph(lattice_candidates(k, domain))


class TestCandidateSetValidation:
    def test_rejects_asymmetric_neighbors(self):
        pts = np.array([0.0, 0.5, 1.0])
        with pytest.raises(ValueError):
            CandidateSet(pts, ((1,), (), ()), "interval01")

    def test_rejects_unknown_tag(self):
        pts = np.array([0.0, 1.0])
        with pytest.raises(ValueError):
            CandidateSet(pts, ((1,), (0,)), "pentagon")

    def test_rejects_self_neighbor(self):
        pts = np.array([0.0, 1.0])
        with pytest.raises(ValueError):
            CandidateSet(pts, ((0, 1), (0,)), "interval01")

    def test_rejects_points_outside_domain(self):
        pts = np.array([0.0, 2.0])
        with pytest.raises(ValueError):
            CandidateSet(pts, ((1,), (0,)), "interval01")
        off_sphere = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.5]])
        with pytest.raises(ValueError):
            CandidateSet(off_sphere, ((1,), (0,)), "sphere")
