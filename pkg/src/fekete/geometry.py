"""Candidate point grids with neighbor structure.

Each constructor returns a :class:`CandidateSet`: an ordered array of points
together with, for every candidate, the set of indices regarded as its
neighbors.  Neighborhoods drive the local-maxima step of the selection
algorithms.  All indices in the public API are 0-based.

Grids:

* ``interval_candidates`` -- equispaced points on [0, 1] or [-1, 1], chain
  neighbors.
* ``sphere_candidates`` -- a (k-2) x (k-1) latitude/longitude grid on S^2
  plus both poles; neighbors wrap around in longitude, rows adjacent to a
  pole are adjacent to that pole.
* ``lattice_candidates`` -- the k x k lattice on [-1, 1]^2 intersected with
  the square, the triangle x1 + x2 >= 0, or the unit disk; 4-neighbors,
  dropping those outside the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DOMAIN_TAGS = ("interval01", "interval11", "square", "triangle", "disk", "sphere")


@dataclass(frozen=True)
class CandidateSet:
    """Ordered candidate points with neighbor index sets.

    ``points`` has shape (m,) for 1-d domains and (m, d) otherwise;
    ``neighbors[j]`` is a sorted tuple of the 0-based neighbor indices of
    candidate j.
    """

    points: np.ndarray
    neighbors: tuple[tuple[int, ...], ...]
    domain_tag: str

    def __post_init__(self):
        if self.domain_tag not in DOMAIN_TAGS:
            raise ValueError(f"unknown domain tag {self.domain_tag!r}")
        m = len(self.points)
        if len(self.neighbors) != m:
            raise ValueError("need one neighbor tuple per point")
        for j, nbrs in enumerate(self.neighbors):
            for i in nbrs:
                if not 0 <= i < m or i == j:
                    raise ValueError(f"bad neighbor index {i} at point {j}")
                if j not in self.neighbors[i]:
                    raise ValueError(f"neighbor lists not symmetric at pair ({j}, {i})")
        _check_membership(self.points, self.domain_tag)

    def __len__(self) -> int:
        return len(self.points)


def _check_membership(points: np.ndarray, tag: str, tol: float = 1e-12) -> None:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return
    if tag in ("interval01", "interval11"):
        lo = 0.0 if tag == "interval01" else -1.0
        if pts.ndim != 1 or pts.min() < lo - tol or pts.max() > 1.0 + tol:
            raise ValueError(f"points outside {tag}")
        return
    if tag == "sphere":
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("sphere points must be 3-vectors")
        if np.max(np.abs(np.linalg.norm(pts, axis=1) - 1.0)) > tol:
            raise ValueError("sphere points must be unit vectors")
        return
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"{tag} points must be 2-vectors")
    if np.abs(pts).max() > 1.0 + tol:
        raise ValueError(f"points outside [-1, 1]^2 for {tag}")
    if tag == "triangle" and np.min(pts[:, 0] + pts[:, 1]) < -tol:
        raise ValueError("points outside the triangle")
    if tag == "disk" and np.max(pts[:, 0] ** 2 + pts[:, 1] ** 2) > 1.0 + tol:
        raise ValueError("points outside the disk")


def interval_candidates(m: int, domain: str = "interval01") -> CandidateSet:
    """Equispaced grid of m points on [0, 1] or [-1, 1] with chain neighbors."""
    if m < 2:
        raise ValueError(f"need at least 2 points, got m={m}")
    if domain == "interval01":
        pts = np.linspace(0.0, 1.0, m)
    elif domain == "interval11":
        pts = np.linspace(-1.0, 1.0, m)
    else:
        raise ValueError(f"interval domain must be 'interval01' or 'interval11', got {domain!r}")
    nbrs = tuple(
        tuple(i for i in (j - 1, j + 1) if 0 <= i < m) for j in range(m)
    )
    return CandidateSet(pts, nbrs, domain)


# ---------------------------------------------------------------------------
# Sphere grid


def _sphere_row_col(j: int, k: int, m: int) -> tuple[int, int]:
    """1-based (row p, column q) of 1-based candidate j on the sphere grid."""
    if j == 1:
        return 1, 1
    if j == m:
        return k, 1
    return (j - 2) // (k - 1) + 2, (j - 2) % (k - 1) + 1


def sphere_candidates(k: int) -> CandidateSet:
    """Latitude/longitude grid on the unit sphere with m = (k-1)(k-2) + 2 points.

    Candidate 1 is the north pole, candidate m the south pole; the interior
    rows use polar angles pi (p-1)/(k-1) for p = 2..k-1 and k-1 equispaced
    azimuths.  Neighbors: longitude ring neighbors with wraparound, plus the
    vertical neighbors one row up and down (the pole when the row touches it).
    """
    if k < 3:
        raise ValueError(f"need k >= 3, got k={k}")
    m = (k - 1) * (k - 2) + 2
    pts = np.empty((m, 3))
    pts[0] = (0.0, 0.0, 1.0)
    pts[m - 1] = (0.0, 0.0, -1.0)
    for j in range(2, m):
        p, q = _sphere_row_col(j, k, m)
        theta = math.pi * (p - 1) / (k - 1)
        phi = 2.0 * math.pi * (q - 1) / (k - 1)
        pts[j - 1] = (
            math.sin(theta) * math.cos(phi),
            math.sin(theta) * math.sin(phi),
            math.cos(theta),
        )

    nbrs: list[tuple[int, ...]] = [()] * m
    nbrs[0] = tuple(range(1, k))
    nbrs[m - 1] = tuple(range(m - k, m - 1))
    for j in range(2, m):
        p, q = _sphere_row_col(j, k, m)
        left = k - 2 if q == 1 else -1
        right = -(k - 2) if q == k - 1 else 1
        ring = {j + left, j + right}
        up = 1 if p == 2 else j - (k - 1)
        down = m if p == k - 1 else j + (k - 1)
        found = sorted(i - 1 for i in ring | {up, down} if i != j)
        nbrs[j - 1] = tuple(found)
    return CandidateSet(pts, tuple(nbrs), "sphere")


# ---------------------------------------------------------------------------
# Planar lattices


def _in_domain(x1: float, x2: float, domain: str) -> bool:
    if domain == "square":
        return True
    # Exact float comparisons on purpose: diagonal grid sums carry roundoff,
    # and the published grid sizes (e.g. 520 for k=32 on the triangle) count
    # only the points that pass the untoleranced test.
    if domain == "triangle":
        return x1 + x2 >= 0.0
    if domain == "disk":
        return x1 * x1 + x2 * x2 <= 1.0
    raise ValueError(f"lattice domain must be 'square', 'triangle' or 'disk', got {domain!r}")


def lattice_candidates(k: int, domain: str = "square") -> CandidateSet:
    """k x k lattice on [-1, 1]^2 restricted to the requested domain.

    Points are kept in row-major order (first coordinate outer); neighbors
    are the surviving 4-neighbors of the full lattice.
    """
    if k < 2:
        raise ValueError(f"need k >= 2, got k={k}")
    coords = [-1.0 + 2.0 * i / (k - 1) for i in range(k)]
    index_of: dict[tuple[int, int], int] = {}
    pts = []
    for p in range(k):
        for q in range(k):
            if _in_domain(coords[p], coords[q], domain):
                index_of[(p, q)] = len(pts)
                pts.append((coords[p], coords[q]))
    nbrs = []
    for p, q in index_of:
        found = []
        for dp, dq in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            idx = index_of.get((p + dp, q + dq))
            if idx is not None:
                found.append(idx)
        nbrs.append(tuple(sorted(found)))
    return CandidateSet(np.array(pts, dtype=float).reshape(-1, 2), tuple(nbrs), domain)
