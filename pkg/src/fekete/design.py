"""Continuous D-optimal design problems over finite candidate sets.

A design problem carries the m x l regressor matrix (rows a_j^T), a weight
budget n, and an optional frozen index set whose weights are pinned to 1.
Weights w live in [0, 1]^m with sum w = n; the information matrix is
M(w) = sum_j w_j a_j a_j^T and the objective is log det M(w).

``multiplicative_solver`` is a slow reference optimizer (multiplicative
weight update plus a rescaling projection back onto the constraint slice)
used as an oracle for the conic solver.  ``fekete_bruteforce`` enumerates
all n-subsets and maximizes det over unit-weight designs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import CapacityError
from .kernels import MercerKernel, regressor

_BRUTEFORCE_CAP = 10**6
_PIVOT_FLOOR = 1e-13


@dataclass(frozen=True)
class DesignProblem:
    """Finite-set D-optimal design data.

    ``regressors`` has shape (m, ell) with row j holding a_j; ``budget`` is
    the weight total n; ``frozen`` lists 0-based candidate indices whose
    weights are fixed at 1.
    """

    regressors: np.ndarray
    budget: int
    frozen: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        a = np.asarray(self.regressors, dtype=float)
        if a.ndim != 2:
            raise ValueError("regressors must be a 2-d array")
        object.__setattr__(self, "regressors", a)
        object.__setattr__(self, "frozen", frozenset(int(i) for i in self.frozen))
        m, ell = a.shape
        if not 1 <= self.budget <= m:
            raise ValueError(f"budget must lie in [1, m={m}], got {self.budget}")
        if ell > m:
            raise ValueError(f"need ell <= m, got ell={ell}, m={m}")
        if any(not 0 <= j < m for j in self.frozen):
            raise ValueError("frozen indices out of range")
        if len(self.frozen) > self.budget:
            raise ValueError("more frozen indices than budget")

    @property
    def m(self) -> int:
        return self.regressors.shape[0]

    @property
    def ell(self) -> int:
        return self.regressors.shape[1]


@dataclass(frozen=True)
class Weights:
    """Design weights; ``w`` is a length-m vector."""

    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))

    def check(self, problem: DesignProblem) -> None:
        """Assert the box, budget and frozen-pin constraints within tolerance."""
        w = self.w
        if w.shape != (problem.m,):
            raise ValueError(f"weights have shape {w.shape}, expected ({problem.m},)")
        if w.min() < 0.0 or w.max() > 1.0 + 1e-9:
            raise ValueError(f"weights outside [0, 1]: range [{w.min()}, {w.max()}]")
        if abs(w.sum() - problem.budget) > 1e-6 * problem.budget:
            raise ValueError(f"weight sum {w.sum()} != budget {problem.budget}")
        for j in problem.frozen:
            if w[j] < 1.0 - 1e-6:
                raise ValueError(f"frozen weight {j} is {w[j]}, expected 1")


def information_matrix(problem: DesignProblem, weights: Weights) -> np.ndarray:
    """M(w) = sum_j w_j a_j a_j^T, symmetrized."""
    a = problem.regressors
    m_mat = (a * weights.w[:, None]).T @ a
    return 0.5 * (m_mat + m_mat.T)


def logdet_objective(problem: DesignProblem, weights: Weights) -> float:
    """log det M(w); -inf when M is numerically singular.

    Singularity is judged by the eigenvalue ratio: any eigenvalue at or below
    1e-13 times the largest counts as a zero pivot.
    """
    m_mat = information_matrix(problem, weights)
    eigs = np.linalg.eigvalsh(m_mat)
    if eigs[-1] <= 0.0 or eigs[0] <= _PIVOT_FLOOR * eigs[-1]:
        return -math.inf
    return float(np.sum(np.log(eigs)))


def truncated_gram_det(kernel: MercerKernel, points) -> float:
    """Determinant of the rank-n Mercer truncation of the kernel Gram matrix.

    With n = len(points), returns (lambda_1 ... lambda_n) det(Phi_n)^2 where
    Phi_n holds phi_l(x_i).
    """
    pts = list(points)
    n = len(pts)
    if n < 1:
        raise ValueError("need at least one point")
    phi = np.array([regressor(kernel, n, x) for x in pts])
    lam = [kernel.eigenvalue(l) for l in range(1, n + 1)]
    det = float(np.linalg.det(phi))
    return float(np.prod(lam)) * det * det


def fekete_bruteforce(problem: DesignProblem) -> tuple[tuple[int, ...], float]:
    """Exhaustive D-optimal n-subset (unit weights), containing the frozen set.

    Returns (indices, det value) with 0-based indices; ties resolve to the
    lexicographically smallest index tuple.  Guarded by a work cap of 1e6
    subsets.
    """
    a = problem.regressors
    m, n = problem.m, problem.budget
    free = sorted(set(range(m)) - problem.frozen)
    pick = n - len(problem.frozen)
    if math.comb(len(free), pick) > _BRUTEFORCE_CAP:
        raise CapacityError(
            f"C({len(free)}, {pick}) subsets exceed the 1e6 brute-force cap"
        )
    base = sorted(problem.frozen)
    best_idx: tuple[int, ...] | None = None
    best_det = -math.inf
    for extra in combinations(free, pick):
        idx = tuple(sorted(base + list(extra)))
        sub = a[list(idx)]
        val = float(np.linalg.det(sub.T @ sub))
        if val > best_det:
            best_det, best_idx = val, idx
    assert best_idx is not None
    return best_idx, best_det


def _project_to_slice(
    v: np.ndarray, total: float, frozen: frozenset[int]
) -> np.ndarray:
    """Project nonnegative v onto {0 <= w <= 1, sum w = total, w_frozen = 1}.

    The shift acts multiplicatively, w = min(theta * v, 1), with theta found
    by bisection; this keeps zero weights at zero, so fixed points of the
    solver loop sit on the faces where the optimum lives.
    """
    w = v.copy()
    free = np.array(sorted(set(range(len(v))) - frozen), dtype=int)
    for j in frozen:
        w[j] = 1.0
    target = total - len(frozen)
    if target < -1e-12:
        raise ValueError("budget smaller than the frozen set")
    if len(free) == 0:
        return w
    vf = v[free]
    if target <= 0.0:
        w[free] = 0.0
        return w
    if np.count_nonzero(vf > 0.0) < target - 1e-12:
        raise ValueError("not enough positive weights to meet the budget")
    hi = 1.0
    while np.minimum(hi * vf, 1.0).sum() < target:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        theta = 0.5 * (lo + hi)
        if np.minimum(theta * vf, 1.0).sum() < target:
            lo = theta
        else:
            hi = theta
    w[free] = np.minimum(0.5 * (lo + hi) * vf, 1.0)
    return w


def multiplicative_solver(
    problem: DesignProblem, iters: int = 2000, tol: float = 0.0
) -> Weights:
    """Reference D-optimal solver: multiplicative updates with projection.

    Starts from the uniform feasible point, updates
    w_j <- w_j (a_j^T M^{-1} a_j) / ell, projects back onto the constraint
    slice, and returns the best iterate by objective.  Stops early when the
    relative objective change drops to ``tol`` or below.  Raises when the
    starting information matrix is singular.
    """
    a = problem.regressors
    m, ell = a.shape
    w = _project_to_slice(np.full(m, problem.budget / m), problem.budget, problem.frozen)
    obj = logdet_objective(problem, Weights(w))
    if not np.isfinite(obj):
        raise ValueError("information matrix is singular at the uniform start")
    best_w, best_obj = w, obj
    for _ in range(iters):
        m_mat = information_matrix(problem, Weights(w))
        try:
            inv = np.linalg.inv(m_mat)
        except np.linalg.LinAlgError:
            break
        scores = np.einsum("ij,jk,ik->i", a, inv, a)
        w = _project_to_slice(w * scores / ell, problem.budget, problem.frozen)
        prev = obj
        obj = logdet_objective(problem, Weights(w))
        if obj > best_obj:
            best_w, best_obj = w, obj
        if abs(obj - prev) <= tol * max(1.0, abs(prev)):
            break
    return Weights(best_w)
