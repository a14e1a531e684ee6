"""Kernel interpolation, power functions, and the P-greedy baseline.

A :class:`KernelSystem` bundles a kernel with a node set and the Cholesky
factor of the kernel matrix.  From it come the interpolant of given node
values and the power function

    P(x) = sqrt(K(x, x) - k(x)^T Kmat^{-1} k(x)),

the worst-case interpolation error functional over the unit ball of the
kernel's native space.  ``determinant_ratio_power`` evaluates the same
quantity through the determinant ratio det K(X + x) / det K(X); it is an
independent cross-check, only meant for small node sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConditioningError, NumericsError
from .kernels import MercerKernel

_DISTINCT_TOL = 1e-14
_PIVOT_RATIO_FLOOR = 1e-15
_RESIDUAL_TOL = 1e-10
_POWER_CLAMP = 1e-9
_GREEDY_PIVOT_FLOOR = 1e-12
_TIE_REL = 1e-9


def _as_point_array(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim not in (1, 2):
        raise ValueError("points must form a 1-d or 2-d array")
    return pts


@dataclass(frozen=True)
class PointSet:
    """Pairwise-distinct interpolation nodes, shape (n,) or (n, d).

    May be empty; the power function of an empty set is sqrt(K(x, x)).
    """

    points: np.ndarray

    def __post_init__(self):
        pts = _as_point_array(self.points)
        object.__setattr__(self, "points", pts)
        n = len(pts)
        if n == 0:
            return
        flat = pts.reshape(n, -1)
        scale = max(1.0, float(np.max(np.abs(flat))))
        gaps = np.max(np.abs(flat[:, None, :] - flat[None, :, :]), axis=2)
        gaps[np.diag_indices(n)] = np.inf
        i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
        if gaps[i, j] <= _DISTINCT_TOL * scale:
            raise ValueError(f"points {i} and {j} coincide")

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class KernelSystem:
    """Kernel matrix over a node set together with its Cholesky factor."""

    kernel: MercerKernel
    nodes: PointSet
    gram: np.ndarray
    cho: tuple


def empty_system(kernel: MercerKernel) -> KernelSystem:
    """System over no nodes; its power function is sqrt(K(x, x))."""
    return KernelSystem(kernel, PointSet(np.empty(0)), np.empty((0, 0)), None)


def kernel_system(kernel: MercerKernel, points) -> KernelSystem:
    """Factor the kernel matrix over ``points``.

    Raises ConditioningError when the matrix is numerically indefinite, when
    the squared Cholesky pivot ratio falls below 1e-15, or when the
    reconstruction residual exceeds 1e-10 relative to the largest entry.
    """
    nodes = points if isinstance(points, PointSet) else PointSet(points)
    pts = nodes.points
    n = len(pts)
    if n == 0:
        raise ValueError("kernel_system needs at least one node; see empty_system")
    gram = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            gram[i, j] = gram[j, i] = kernel.eval(pts[i], pts[j])
    try:
        cho = sla.cho_factor(gram, lower=True)
    except sla.LinAlgError as exc:
        raise ConditioningError("kernel matrix is not numerically positive definite") from exc
    ldiag = np.abs(np.diag(cho[0]))
    ratio = float((ldiag.min() / ldiag.max()) ** 2)
    if ratio < _PIVOT_RATIO_FLOOR:
        raise ConditioningError(
            f"Cholesky pivot ratio {ratio:.3e} below {_PIVOT_RATIO_FLOOR:.0e}",
            pivot_ratio=ratio,
        )
    lmat = np.tril(cho[0])
    resid = float(np.max(np.abs(lmat @ lmat.T - gram)))
    if resid > _RESIDUAL_TOL * max(1.0, float(np.max(np.abs(gram)))):
        raise ConditioningError(f"factorization residual {resid:.3e} too large")
    return KernelSystem(kernel, nodes, gram, cho)


def interpolate(system: KernelSystem, values):
    """Kernel interpolant matching ``values`` at the system's nodes."""
    vals = np.asarray(values, dtype=float)
    if vals.shape != (len(system.nodes),):
        raise ValueError(f"need {len(system.nodes)} node values, got shape {vals.shape}")
    coef = sla.cho_solve(system.cho, vals) if len(vals) else vals
    pts = system.nodes.points
    kern = system.kernel.eval

    def interpolant(x) -> float:
        kvec = np.array([kern(p, x) for p in pts])
        return float(kvec @ coef)

    return interpolant


def power_function(system: KernelSystem):
    """Callable evaluating the power function of the system's node set.

    Squared values in [-1e-9, 0) are clamped to zero; anything more negative
    raises NumericsError.
    """
    pts = system.nodes.points
    kern = system.kernel.eval
    cho = system.cho

    def power(x) -> float:
        if len(pts) == 0:
            return math.sqrt(max(float(kern(x, x)), 0.0))
        kvec = np.array([kern(p, x) for p in pts])
        sq = float(kern(x, x) - kvec @ sla.cho_solve(cho, kvec))
        if sq < -_POWER_CLAMP:
            raise NumericsError(f"squared power {sq:.3e} is negative beyond tolerance")
        return math.sqrt(max(sq, 0.0))

    return power


def determinant_ratio_power(kernel: MercerKernel, points, x) -> float:
    """Power function via the determinant ratio; cross-check for small sets."""
    pts = _as_point_array(points if not isinstance(points, PointSet) else points.points)
    n = len(pts)
    all_pts = list(pts) + [x]
    full = np.empty((n + 1, n + 1))
    for i in range(n + 1):
        for j in range(i, n + 1):
            full[i, j] = full[j, i] = kernel.eval(all_pts[i], all_pts[j])
    det_base = float(np.linalg.det(full[:n, :n])) if n else 1.0
    if det_base <= 0.0:
        raise ConditioningError("base kernel determinant is not positive")
    ratio = float(np.linalg.det(full)) / det_base
    return math.sqrt(max(ratio, 0.0))


def max_power_over(system: KernelSystem, candidates) -> tuple[float, int]:
    """(value, index) of the largest power over candidates; ties take the
    smallest index."""
    pts = _as_point_array(getattr(candidates, "points", candidates))
    power = power_function(system)
    best_j, best_val = 0, -math.inf
    for j in range(len(pts)):
        val = power(pts[j])
        if val > best_val:
            best_j, best_val = j, val
    return best_val, best_j


def condition_number(system: KernelSystem) -> float:
    """Spectral condition number of the kernel matrix (inf if not PD)."""
    eigs = np.linalg.eigvalsh(system.gram)
    if eigs[0] <= 0.0:
        return math.inf
    return float(eigs[-1] / eigs[0])


def greedy_pick(p2: np.ndarray) -> int:
    """First index whose value sits within 1e-9 relative of the maximum.

    Symmetric grids produce exact mathematical ties whose float images differ
    only by accumulated roundoff; the window makes incremental and fully
    recomputed greedy paths select the same candidate.
    """
    best = float(np.max(p2))
    return int(np.argmax(p2 >= best - _TIE_REL * abs(best)))


def p_greedy(kernel: MercerKernel, candidates, n: int) -> list[int]:
    """Indices of n candidates chosen by greedy power-function maximization.

    The first point maximizes sqrt(K(y, y)); every later point maximizes the
    power function of the points chosen so far.  Ties (values within 1e-9
    relative of the step maximum) take the smallest index.  Updates run over
    a Newton basis; when the pivot drops to 1e-12 the basis is rebuilt from a
    fresh factorization, and selection stops with ConditioningError if the
    rebuilt pivot is still that small.
    """
    pts = _as_point_array(getattr(candidates, "points", candidates))
    m = len(pts)
    if not 1 <= n <= m:
        raise ValueError(f"need 1 <= n <= m={m}, got n={n}")
    kern = kernel.eval
    diag = np.array([kern(p, p) for p in pts])
    p2 = diag.copy()
    vmat = np.zeros((m, n))
    chosen: list[int] = []
    for k in range(n):
        j = greedy_pick(p2)
        piv2 = float(p2[j])
        if k > 0 and math.sqrt(max(piv2, 0.0)) <= _GREEDY_PIVOT_FLOOR:
            system = kernel_system(kernel, pts[np.array(chosen)])
            cross = np.array([[kern(p, q) for q in system.nodes.points] for p in pts])
            lmat = np.tril(system.cho[0])
            vmat[:, :k] = sla.solve_triangular(lmat, cross.T, lower=True).T
            p2 = diag - np.einsum("ij,ij->i", vmat[:, :k], vmat[:, :k])
            p2[np.array(chosen)] = -math.inf
            j = greedy_pick(p2)
            piv2 = float(p2[j])
            if math.sqrt(max(piv2, 0.0)) <= _GREEDY_PIVOT_FLOOR:
                raise ConditioningError(
                    f"candidate set numerically exhausted after {k} points"
                )
        chosen.append(j)
        newcol = np.array([kern(p, pts[j]) for p in pts])
        if k:
            newcol = newcol - vmat[:, :k] @ vmat[j, :k]
        vmat[:, k] = newcol / math.sqrt(max(piv2, 0.0))
        p2 = p2 - vmat[:, k] ** 2
        p2[j] = -math.inf
    return chosen
