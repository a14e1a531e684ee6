"""Node selection through convex design relaxation.

``algorithm1`` solves one D-optimal design relaxation at truncation level
ell = n and reads n points off the local maxima of the optimal weight
landscape over the candidate neighbor graph.  ``algorithm2`` runs the same
relaxation through a schedule of growing budgets, pinning the points chosen
at earlier stages so the selections nest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conic_solver import SolverOptions, solve
from .design import DesignProblem
from .errors import ConditioningError, SolverFailure
from .geometry import CandidateSet
from .interpolation import condition_number, kernel_system, max_power_over
from .kernels import MercerKernel, regressor
from .socp_builder import add_pinned_weights, build_layout, build_program, extract_weights


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of a selection run.

    ``chosen`` lists the selected candidate indices in descending weight
    order, ties to the smaller index; None when the run failed.
    ``local_maxima`` holds the local maxima of the weight landscape and
    ``weights`` the landscape itself.
    """

    status: str
    chosen: tuple[int, ...] | None
    weights: np.ndarray | None
    local_maxima: tuple[int, ...]
    diagnostics: dict
    warnings: tuple[str, ...] = field(default=())


def design_matrix(kernel: MercerKernel, candidates: CandidateSet, ell: int) -> np.ndarray:
    """Truncated feature map: row j is (sqrt(lambda_i) phi_i(y_j))_{i<=ell}."""
    scale = np.sqrt([kernel.eigenvalue(i) for i in range(1, ell + 1)])
    rows = np.array([regressor(kernel, ell, y) for y in candidates.points])
    return rows * scale[None, :]


def local_maxima(weights, candidates: CandidateSet, tau: float = 0.0) -> tuple[int, ...]:
    """Indices j with w_j > tau and w_j >= w_k for every neighbor k."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(candidates),):
        raise ValueError(f"need one weight per candidate, got shape {w.shape}")
    out = []
    for j in range(len(candidates)):
        if w[j] > tau and all(w[j] >= w[k] for k in candidates.neighbors[j]):
            out.append(j)
    return tuple(out)


def _run_solver(prog, options, solve_fn):
    result = solve_fn(prog) if solve_fn is not None else solve(prog, options or SolverOptions())
    if result.status not in ("optimal", "near_optimal") or result.v is None:
        raise SolverFailure(f"cone solver returned status {result.status!r}", result=result)
    return result


def _chosen_diagnostics(kernel, candidates, chosen) -> dict:
    pts = candidates.points[np.asarray(chosen, dtype=int)]
    try:
        system = kernel_system(kernel, pts)
    except ConditioningError:
        return {"max_power": math.nan, "condition_number": math.inf}
    max_pow, _ = max_power_over(system, candidates)
    return {"max_power": max_pow, "condition_number": condition_number(system)}


def _flat_warning(support, m: int, prefix: str = "") -> list[str]:
    if len(support) > m / 2:
        return [
            prefix
            + f"{len(support)} of {m} candidates are local maxima; "
            "the weight landscape is nearly flat"
        ]
    return []


def _best_single(kernel: MercerKernel, candidates: CandidateSet) -> int:
    lam1 = kernel.eigenvalue(1)
    scores = np.array([lam1 * regressor(kernel, 1, y)[0] ** 2 for y in candidates.points])
    return int(np.argmax(scores))


def algorithm1(
    kernel: MercerKernel,
    candidates: CandidateSet,
    n: int,
    *,
    options: SolverOptions | None = None,
    solve_fn=None,
    tau: float = 0.0,
) -> SelectionResult:
    """Select n candidates from one design relaxation at ell = n.

    Returns status "failed" with indices None when the weight landscape has
    fewer than n local maxima.  Solver breakdowns raise SolverFailure.
    """
    m = len(candidates)
    if not 1 <= n <= m:
        raise ValueError(f"need 1 <= n <= m={m}, got n={n}")

    if n == 1:
        j = _best_single(kernel, candidates)
        w = np.zeros(m)
        w[j] = 1.0
        diag = {"solver_status": "analytic", "iterations": 0, "objective": math.nan}
        diag.update(_chosen_diagnostics(kernel, candidates, [j]))
        return SelectionResult("ok", (j,), w, (j,), diag)

    problem = DesignProblem(design_matrix(kernel, candidates, n), n)
    layout = build_layout(m, n)
    result = _run_solver(build_program(problem), options, solve_fn)
    w = extract_weights(layout, result.v).w
    support = local_maxima(w, candidates, tau)
    warnings = _flat_warning(support, m)
    diag = {
        "solver_status": result.status,
        "iterations": result.iterations,
        "objective": result.objective,
    }
    if len(support) < n:
        diag["max_power"] = math.nan
        diag["condition_number"] = math.nan
        return SelectionResult("failed", None, w, support, diag, tuple(warnings))
    chosen = sorted(support, key=lambda j: (-w[j], j))[:n]
    diag.update(_chosen_diagnostics(kernel, candidates, chosen))
    return SelectionResult("ok", tuple(chosen), w, support, diag, tuple(warnings))


def algorithm2(
    kernel: MercerKernel,
    candidates: CandidateSet,
    schedule,
    *,
    options: SolverOptions | None = None,
    solve_fn=None,
    tau: float = 0.0,
) -> list[SelectionResult]:
    """Nested selection over a strictly increasing schedule of budgets.

    Stage i re-solves the relaxation at ell = n = schedule[i] with all
    previously selected points pinned at weight one, then adds the strongest
    new local maxima; each stage's result carries the cumulative point set,
    so consecutive ``chosen`` tuples nest.  A stage without enough new maxima
    ends the run: its entry has status "failed" and chosen None, and no later
    stages run.
    """
    m = len(candidates)
    sched = [int(s) for s in schedule]
    if not sched:
        raise ValueError("schedule is empty")
    if sched[0] < 1 or sched[-1] > m or any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError("schedule must be strictly increasing within 1..m")

    results: list[SelectionResult] = []
    chosen: list[int] = []
    for stage, n_i in enumerate(sched, 1):
        if n_i == 1:
            j = _best_single(kernel, candidates)
            chosen = [j]
            w = np.zeros(m)
            w[j] = 1.0
            diag = {
                "budget": 1,
                "solver_status": "analytic",
                "iterations": 0,
                "objective": math.nan,
            }
            diag.update(_chosen_diagnostics(kernel, candidates, chosen))
            results.append(SelectionResult("ok", (j,), w, (j,), diag))
            continue
        problem = DesignProblem(
            design_matrix(kernel, candidates, n_i), n_i, frozen=frozenset(chosen)
        )
        layout = build_layout(m, n_i)
        prog = add_pinned_weights(build_program(problem), layout, chosen)
        result = _run_solver(prog, options, solve_fn)
        w = extract_weights(layout, result.v).w
        support = local_maxima(w, candidates, tau)
        warnings = tuple(_flat_warning(support, m, prefix=f"stage {stage}: "))
        diag = {
            "budget": n_i,
            "solver_status": result.status,
            "iterations": result.iterations,
            "objective": result.objective,
        }
        pinned = set(chosen)
        fresh = [j for j in support if j not in pinned]
        need = n_i - len(chosen)
        if len(fresh) < need:
            diag["max_power"] = math.nan
            diag["condition_number"] = math.nan
            results.append(SelectionResult("failed", None, w, support, diag, warnings))
            return results
        chosen = chosen + sorted(fresh, key=lambda j: (-w[j], j))[:need]
        diag.update(_chosen_diagnostics(kernel, candidates, chosen))
        results.append(SelectionResult("ok", tuple(chosen), w, support, diag, warnings))
    return results
