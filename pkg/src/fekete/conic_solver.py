"""Deterministic interior-point solver for the rotated-cone programs.

The solver implements a homogeneous self-dual embedding with Nesterov-Todd
scaling and a Mehrotra predictor-corrector step, after a structural presolve:

* equality rows of the shape v_a - v_b = 0 (the u-pair and weight-copy rows)
  are contracted by union-find;
* variables fixed by their bounds, and variables determined by singleton
  equality rows, are substituted out to a fixpoint (weight pinning becomes an
  exact substitution, keeping the interior nonempty);
* rows left without free variables are checked for consistency, which lets
  presolve certify some infeasible programs without iterating.

Rotated cones (xi, zeta, eta) are rewritten as standard second-order cones
through the rotation ((xi+zeta)/sqrt2, (xi-zeta)/sqrt2, eta).  KKT systems
are reduced before factorization: bound rows and cone blocks enter the
x-block Schur complement (their scaling blocks are diagonal or 3x3-local,
because no slot belongs to two cones), while inequality rows with several
entries stay explicit to avoid dense fill.  Sparse factorizations use
scipy's SuperLU with COLAMD ordering; small systems switch to a dense LU.
No randomness anywhere, so repeated solves of the same program are
bit-for-bit identical.
"""

from __future__ import annotations

import json
import math
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverFailure
from .socp_builder import ConicProgram, program_to_debug_json

_SQRT2 = math.sqrt(2.0)
_NEAR_OPTIMAL_TOL = 1e-5
_CONE_MEMBERSHIP_TOL = 1e-7
_DENSE_KKT_DIM = 400
_STEP_FRACTION = 0.99
_FIX_TOL = 1e-7


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 200
    reg: float = 1e-9
    refine: int = 1


@dataclass(frozen=True)
class Residuals:
    primal_infeas: float
    dual_infeas: float
    duality_gap: float


@dataclass(frozen=True)
class SolverResult:
    """Outcome of a conic solve.

    ``status`` is one of optimal, near_optimal, infeasible, unbounded,
    iteration_limit, numerical_failure.  ``v`` is the full-length solution
    vector for optimal/near_optimal and None otherwise; ``objective`` is the
    attained maximum (nan when there is no solution vector).  The duality gap
    is reported as a signed relative gap.
    """

    status: str
    v: np.ndarray | None
    objective: float
    iterations: int
    residuals: Residuals


# ---------------------------------------------------------------------------
# Presolve


def _bound_scale(lo: float, hi: float) -> float:
    scale = 1.0
    if math.isfinite(lo):
        scale = max(scale, abs(lo))
    if math.isfinite(hi):
        scale = max(scale, abs(hi))
    return scale


class _Presolved:
    """Reduced program plus the bookkeeping to expand solutions back."""

    def __init__(self, prog: ConicProgram):
        self.prog = prog
        self.status = "reduced"
        n = prog.n_vars

        parent = np.arange(n)

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        a_csr = prog.a.tocsr()
        merge_rows = []
        for r in range(prog.n_rows):
            if prog.row_lb[r] != 0.0 or prog.row_ub[r] != 0.0:
                continue
            start, end = a_csr.indptr[r], a_csr.indptr[r + 1]
            if end - start != 2:
                continue
            d0, d1 = a_csr.data[start:end]
            if {d0, d1} != {1.0, -1.0}:
                continue
            i, j = (find(int(c)) for c in a_csr.indices[start:end])
            if i != j:
                parent[max(i, j)] = min(i, j)
            merge_rows.append(r)

        rep = np.array([find(i) for i in range(n)])
        classes, class_of = np.unique(rep, return_inverse=True)
        nc = len(classes)
        self.class_of = class_of

        lb = np.full(nc, -math.inf)
        ub = np.full(nc, math.inf)
        np.maximum.at(lb, class_of, prog.var_lb)
        np.minimum.at(ub, class_of, prog.var_ub)
        if np.any(lb > ub + 1e-9):
            self.status = "infeasible"
            return
        c_red = np.zeros(nc)
        np.add.at(c_red, class_of, prog.c)

        keep = np.setdiff1d(np.arange(prog.n_rows), merge_rows)
        coo = a_csr.tocoo()
        a_classes = sp.csr_matrix(
            (coo.data, (coo.row, class_of[coo.col])), shape=(prog.n_rows, nc)
        )
        a_classes.sum_duplicates()
        a_classes.eliminate_zeros()
        a_rows = a_classes[keep].tocsr()
        row_lb = prog.row_lb[keep].copy()
        row_ub = prog.row_ub[keep].copy()
        n_live_rows = a_rows.shape[0]

        fixed = lb >= ub
        value = np.where(fixed, lb, 0.0)

        active = np.ones(n_live_rows, dtype=bool)
        changed = True
        passes = 0
        while changed and passes < 200:
            changed = False
            passes += 1
            for r in np.where(active)[0]:
                start, end = a_rows.indptr[r], a_rows.indptr[r + 1]
                cols = a_rows.indices[start:end]
                vals = a_rows.data[start:end]
                fmask = fixed[cols]
                nfree = len(cols) - int(fmask.sum())
                fixed_sum = float(vals[fmask] @ value[cols[fmask]]) if fmask.any() else 0.0
                if nfree == 0:
                    tol = _FIX_TOL * _bound_scale(row_lb[r], row_ub[r])
                    if fixed_sum < row_lb[r] - tol or fixed_sum > row_ub[r] + tol:
                        self.status = "infeasible"
                        return
                    active[r] = False
                    changed = True
                elif nfree == 1 and row_lb[r] == row_ub[r]:
                    k = int(np.where(~fmask)[0][0])
                    col, coef = int(cols[k]), float(vals[k])
                    val = (row_lb[r] - fixed_sum) / coef
                    if val < lb[col] - _FIX_TOL or val > ub[col] + _FIX_TOL:
                        self.status = "infeasible"
                        return
                    fixed[col] = True
                    value[col] = min(max(val, lb[col]), ub[col])
                    active[r] = False
                    changed = True

        col_of = np.full(nc, -1)
        free_classes = np.where(~fixed)[0]
        col_of[free_classes] = np.arange(len(free_classes))
        self.fixed = fixed
        self.value = value
        self.col_of = col_of
        self.n_free = len(free_classes)

        live = np.where(active)[0]
        a_live = a_rows[live]
        if fixed.any():
            fixed_shift = a_live @ np.where(fixed, value, 0.0)
        else:
            fixed_shift = np.zeros(len(live))
        self.rows_a = a_live[:, free_classes].tocsr()
        self.rows_lb = row_lb[live] - fixed_shift
        self.rows_ub = row_ub[live] - fixed_shift
        self.var_lb = lb[free_classes]
        self.var_ub = ub[free_classes]
        self.c_red = c_red[free_classes]

        self.cones: list[tuple] = []
        for xi, zeta, eta in prog.cones:
            spec = []
            for slot in (xi, zeta, eta):
                cls = class_of[slot]
                if fixed[cls]:
                    spec.append(("const", float(value[cls])))
                else:
                    spec.append(("var", int(col_of[cls])))
            if all(kind == "const" for kind, _ in spec):
                cx, cz, ce = (v for _, v in spec)
                if ce * ce > 2 * cx * cz + _CONE_MEMBERSHIP_TOL or min(cx, cz) < -1e-9:
                    self.status = "infeasible"
                    return
            else:
                self.cones.append(tuple(spec))

    def expand(self, x_free: np.ndarray) -> np.ndarray:
        full_class = self.value.copy()
        full_class[~self.fixed] = x_free
        return full_class[self.class_of]


# ---------------------------------------------------------------------------
# Conversion to  min c~^T x  s.t.  A x = b,  G x + s = h,  s in K


class _StandardForm:
    def __init__(self, pre: _Presolved):
        nx = pre.n_free
        self.nx = nx
        self.c = -pre.c_red  # maximize -> minimize

        eq = pre.rows_lb == pre.rows_ub
        self.a_eq = pre.rows_a[eq].tocsr()
        self.b = pre.rows_lb[eq]

        lp_rows: list[tuple[np.ndarray, np.ndarray, float]] = []
        ineq_a = pre.rows_a[~eq].tocsr()
        ineq_lb = pre.rows_lb[~eq]
        ineq_ub = pre.rows_ub[~eq]
        for r in range(ineq_a.shape[0]):
            start, end = ineq_a.indptr[r], ineq_a.indptr[r + 1]
            cols = ineq_a.indices[start:end].copy()
            vals = ineq_a.data[start:end].copy()
            if np.isfinite(ineq_ub[r]):
                lp_rows.append((cols, vals, float(ineq_ub[r])))
            if np.isfinite(ineq_lb[r]):
                lp_rows.append((cols, -vals, -float(ineq_lb[r])))
        for j in range(nx):
            if np.isfinite(pre.var_ub[j]):
                lp_rows.append((np.array([j]), np.array([1.0]), float(pre.var_ub[j])))
            if np.isfinite(pre.var_lb[j]):
                lp_rows.append((np.array([j]), np.array([-1.0]), -float(pre.var_lb[j])))

        self.n_lp = len(lp_rows)
        self.fold_lp = np.array([len(cols) == 1 for cols, _, _ in lp_rows], dtype=bool)

        g_rows: list[np.ndarray] = []
        g_cols: list[np.ndarray] = []
        g_vals: list[np.ndarray] = []
        h: list[float] = []
        for r, (cols, vals, rhs) in enumerate(lp_rows):
            g_rows.append(np.full(len(cols), r))
            g_cols.append(cols)
            g_vals.append(vals)
            h.append(rhs)

        # rotated (xi, zeta, eta) -> soc rows ((xi+zeta)/s2, (xi-zeta)/s2, eta);
        # G carries the negated map so that s = h - Gx is the rotated point
        self.n_soc = len(pre.cones)
        r0 = self.n_lp
        for spec in pre.cones:
            (kx, vx), (kz, vz), (ke, ve) = spec
            hc = [0.0, 0.0, 0.0]
            if kx == "const":
                hc[0] += vx / _SQRT2
                hc[1] += vx / _SQRT2
            else:
                g_rows.append(np.array([r0, r0 + 1]))
                g_cols.append(np.array([vx, vx]))
                g_vals.append(np.array([-1.0 / _SQRT2, -1.0 / _SQRT2]))
            if kz == "const":
                hc[0] += vz / _SQRT2
                hc[1] -= vz / _SQRT2
            else:
                g_rows.append(np.array([r0, r0 + 1]))
                g_cols.append(np.array([vz, vz]))
                g_vals.append(np.array([-1.0 / _SQRT2, 1.0 / _SQRT2]))
            if ke == "const":
                hc[2] += ve
            else:
                g_rows.append(np.array([r0 + 2]))
                g_cols.append(np.array([ve]))
                g_vals.append(np.array([-1.0]))
            h.extend(hc)
            r0 += 3

        self.mg = self.n_lp + 3 * self.n_soc
        if g_rows:
            self.g = sp.csr_matrix(
                (
                    np.concatenate(g_vals),
                    (
                        np.concatenate(g_rows).astype(int),
                        np.concatenate(g_cols).astype(int),
                    ),
                ),
                shape=(self.mg, nx),
            )
        else:
            self.g = sp.csr_matrix((self.mg, nx))
        self.g.sum_duplicates()
        self.h = np.array(h)

        fold_mask = np.zeros(self.mg, dtype=bool)
        fold_mask[: self.n_lp] = self.fold_lp
        fold_mask[self.n_lp :] = True  # every cone block folds into the x-block
        self.fold_mask = fold_mask
        self.g_f = self.g[fold_mask].tocsr()
        self.g_e = self.g[~fold_mask].tocsr()
        self.n_lp_f = int(self.fold_lp.sum())
        self.fold_lp_positions = np.where(self.fold_lp)[0]
        self.expl_lp_positions = np.where(~self.fold_lp)[0]
        self.fold_idx = np.concatenate(
            [self.fold_lp_positions, self.n_lp + np.arange(3 * self.n_soc)]
        ).astype(int)
        self.expl_idx = self.expl_lp_positions


# ---------------------------------------------------------------------------
# Cone algebra over the composite vector (LP block then 3-d SOC blocks)

_J3 = np.diag([1.0, -1.0, -1.0])


class _ConeOps:
    def __init__(self, n_lp: int, n_soc: int):
        self.n_lp = n_lp
        self.n_soc = n_soc
        self.degree = n_lp + n_soc

    def split(self, v):
        return v[: self.n_lp], v[self.n_lp :].reshape(self.n_soc, 3)

    def identity(self):
        e = np.zeros(self.n_lp + 3 * self.n_soc)
        e[: self.n_lp] = 1.0
        e[self.n_lp :: 3] = 1.0
        return e

    def min_eig(self, v):
        """Smallest cone eigenvalue: entry for LP, v0 - |v1| per SOC block."""
        lp, soc = self.split(v)
        worst = float(lp.min()) if self.n_lp else math.inf
        if self.n_soc:
            resid = soc[:, 0] - np.linalg.norm(soc[:, 1:], axis=1)
            worst = min(worst, float(resid.min()))
        return worst

    def max_step(self, v, dv):
        """Largest alpha with v + alpha dv still in the cone (inf if all)."""
        lp, soc = self.split(v)
        dlp, dsoc = self.split(dv)
        alpha = math.inf
        neg = dlp < 0
        if neg.any():
            alpha = min(alpha, float((-lp[neg] / dlp[neg]).min()))
        if self.n_soc:
            s0, s1 = soc[:, 0], soc[:, 1:]
            d0, d1 = dsoc[:, 0], dsoc[:, 1:]
            qa = d0 * d0 - np.einsum("ij,ij->i", d1, d1)
            qb = s0 * d0 - np.einsum("ij,ij->i", s1, d1)
            qc = s0 * s0 - np.einsum("ij,ij->i", s1, s1)
            disc = qb * qb - qa * qc
            steps = np.full(self.n_soc, math.inf)
            hyper = qa < 0.0
            if hyper.any():
                steps[hyper] = (
                    -qb[hyper] - np.sqrt(np.maximum(disc[hyper], 0.0))
                ) / qa[hyper]
            closing = ~hyper & (qb < 0.0) & (qc > 0.0)
            lin = closing & (qa == 0.0)
            if lin.any():
                steps[lin] = -qc[lin] / (2.0 * qb[lin])
            quad = closing & (qa > 0.0) & (disc >= 0.0)
            if quad.any():
                steps[quad] = (-qb[quad] - np.sqrt(disc[quad])) / qa[quad]
            tip = d0 < 0.0
            if tip.any():
                steps[tip] = np.minimum(steps[tip], -s0[tip] / d0[tip])
            alpha = min(alpha, float(steps.min()))
        return alpha

    def prod(self, u, v):
        """Jordan product u o v."""
        out = np.empty_like(u)
        out[: self.n_lp] = u[: self.n_lp] * v[: self.n_lp]
        us, vs = u[self.n_lp :].reshape(-1, 3), v[self.n_lp :].reshape(-1, 3)
        outs = out[self.n_lp :].reshape(-1, 3)
        outs[:, 0] = np.einsum("ij,ij->i", us, vs)
        outs[:, 1:] = us[:, :1] * vs[:, 1:] + vs[:, :1] * us[:, 1:]
        return out

    def solve_jordan(self, lam, w):
        """x with lam o x = w."""
        out = np.empty_like(w)
        out[: self.n_lp] = w[: self.n_lp] / lam[: self.n_lp]
        ls, ws = lam[self.n_lp :].reshape(-1, 3), w[self.n_lp :].reshape(-1, 3)
        outs = out[self.n_lp :].reshape(-1, 3)
        det = ls[:, 0] ** 2 - np.einsum("ij,ij->i", ls[:, 1:], ls[:, 1:])
        x0 = (ls[:, 0] * ws[:, 0] - np.einsum("ij,ij->i", ls[:, 1:], ws[:, 1:])) / det
        outs[:, 0] = x0
        outs[:, 1:] = (ws[:, 1:] - x0[:, None] * ls[:, 1:]) / ls[:, 0:1]
        return out


class _Scaling:
    """Nesterov-Todd scaling for the composite cone."""

    def __init__(self, ops: _ConeOps, s, z):
        self.ops = ops
        lp_s, soc_s = ops.split(s)
        lp_z, soc_z = ops.split(z)
        if (lp_s <= 0).any() or (lp_z <= 0).any():
            raise FloatingPointError("LP block left the interior")
        self.w_lp = np.sqrt(lp_s / lp_z)
        self.lam_lp = np.sqrt(lp_s * lp_z)
        if ops.n_soc:
            sres = soc_s[:, 0] ** 2 - np.einsum("ij,ij->i", soc_s[:, 1:], soc_s[:, 1:])
            zres = soc_z[:, 0] ** 2 - np.einsum("ij,ij->i", soc_z[:, 1:], soc_z[:, 1:])
            if (sres <= 0).any() or (zres <= 0).any() or (soc_s[:, 0] <= 0).any():
                raise FloatingPointError("SOC block left the interior")
            sbar = soc_s / np.sqrt(sres)[:, None]
            zbar = soc_z / np.sqrt(zres)[:, None]
            gam = np.sqrt((1.0 + np.einsum("ij,ij->i", sbar, zbar)) / 2.0)
            wbar = (sbar + zbar @ _J3) / (2.0 * gam[:, None])
            self.eta = (sres / zres) ** 0.25
            # W^2 = eta^2 (2 wbar wbar' - J); its square root is the
            # hyperbolic Householder map eta (2 v v' - J) with J-unit v.
            v = wbar.copy()
            v[:, 0] += 1.0
            v /= np.sqrt(2.0 * (1.0 + wbar[:, 0]))[:, None]
            self.v_soc = v
            jv = v @ _J3
            self.winv_soc = (
                2.0 * np.einsum("ki,kj->kij", jv, jv) - _J3[None, :, :]
            ) / self.eta[:, None, None]
            self.lam_soc = self.eta[:, None] * self._hh(v, soc_z)
        else:
            self.lam_soc = np.zeros((0, 3))
        self.lam = np.concatenate([self.lam_lp, self.lam_soc.reshape(-1)])

    @staticmethod
    def _hh(v, u):
        """(2 v v' - J) u per block."""
        coef = 2.0 * np.einsum("ki,ki->k", v, u)
        return coef[:, None] * v - u @ _J3

    def w_mul(self, v):
        """W v (W is symmetric)."""
        out = np.empty_like(v)
        out[: self.ops.n_lp] = self.w_lp * v[: self.ops.n_lp]
        if self.ops.n_soc:
            vs = v[self.ops.n_lp :].reshape(-1, 3)
            out[self.ops.n_lp :] = (
                self.eta[:, None] * self._hh(self.v_soc, vs)
            ).reshape(-1)
        return out

    def winv_mul(self, v):
        # (2 v v' - J)^{-1} = 2 (Jv)(Jv)' - J
        out = np.empty_like(v)
        out[: self.ops.n_lp] = v[: self.ops.n_lp] / self.w_lp
        if self.ops.n_soc:
            vs = v[self.ops.n_lp :].reshape(-1, 3)
            tmp = self._hh(self.v_soc @ _J3, vs)
            out[self.ops.n_lp :] = (tmp / self.eta[:, None]).reshape(-1)
        return out

    def winv_matrix(self):
        """W^{-1} as a sparse block-diagonal matrix in the row order of G."""
        n_lp, n_soc = self.ops.n_lp, self.ops.n_soc
        rows = [np.arange(n_lp)]
        cols = [np.arange(n_lp)]
        vals = [1.0 / self.w_lp]
        if n_soc:
            base = n_lp + 3 * np.arange(n_soc)
            off_r = np.repeat(np.arange(3), 3)
            off_c = np.tile(np.arange(3), 3)
            rows.append((base[:, None] + off_r[None, :]).reshape(-1))
            cols.append((base[:, None] + off_c[None, :]).reshape(-1))
            vals.append(self.winv_soc.reshape(-1))
        n = n_lp + 3 * n_soc
        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        ).tocsr()


# ---------------------------------------------------------------------------
# KKT factorization


class _KKT:
    """[Gf'Gf + reg, A', Ge'; A, -reg, 0; Ge, 0, -(1+reg)] over the
    scaled rows Gf, Ge of W^{-1}G, so conditioning grows with W, not W^2."""

    def __init__(self, std: _StandardForm, gt_f: sp.spmatrix, gt_e: sp.spmatrix, reg: float):
        nx, me = std.nx, std.a_eq.shape[0]
        mge = gt_e.shape[0]
        self.dims = (nx, me, mge)
        h_block = (gt_f.T @ gt_f) + reg * sp.eye(nx)
        rows = [[h_block, std.a_eq.T if me else None, gt_e.T if mge else None]]
        if me:
            rows.append([std.a_eq, -reg * sp.eye(me), None])
        if mge:
            rows.append([gt_e, None, -(1.0 + reg) * sp.eye(mge)])
        cols_present = [True, bool(me), bool(mge)]
        rows = [[blk for blk, keep in zip(row, cols_present) if keep] for row in rows]
        kkt = sp.bmat(rows, format="csc")
        if kkt.shape[0] <= _DENSE_KKT_DIM:
            self._dense = sla.lu_factor(kkt.toarray())
            self._lu = None
        else:
            # quasi-definite: diagonal pivots stay valid, so symmetric mode
            # keeps the fill-reducing ordering intact at ill-scaled iterates
            self._dense = None
            self._lu = spla.splu(
                kkt,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        sol = sla.lu_solve(self._dense, rhs) if self._dense is not None else self._lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise FloatingPointError("KKT solve produced non-finite values")
        return sol


# ---------------------------------------------------------------------------
# The homogeneous self-dual interior-point iteration


def _solve3_factory(std: _StandardForm, kkt: _KKT, gt_f: sp.spmatrix):
    """Solver for [0 A' Gs'; A 0 0; Gs 0 -I] in scaled slack variables,
    with the fold rows condensed into the x block."""
    nx, me, mg = std.nx, std.a_eq.shape[0], std.mg
    fold_idx, expl_idx = std.fold_idx, std.expl_idx

    def solve3(rx, ry, rz):
        rz_f, rz_e = rz[fold_idx], rz[expl_idx]
        rhs = np.concatenate([rx + gt_f.T @ rz_f, ry, rz_e])
        sol = kkt.solve(rhs)
        dx = sol[:nx]
        dy = sol[nx : nx + me]
        dz = np.zeros(mg)
        dz[expl_idx] = sol[nx + me :]
        dz[fold_idx] = gt_f @ dx - rz_f
        return dx, dy, dz

    return solve3


def _kkt_with_retries(std: _StandardForm, gt_f, gt_e, opts: SolverOptions):
    for attempt in range(4):
        try:
            return _KKT(std, gt_f, gt_e, opts.reg * 100**attempt)
        except (RuntimeError, ValueError, FloatingPointError, sla.LinAlgError):
            continue
    return None


def _ipm(std: _StandardForm, opts: SolverOptions):
    nx, me = std.nx, std.a_eq.shape[0]
    ops = _ConeOps(std.n_lp, std.n_soc)
    mg = std.mg

    c, b, h = std.c, std.b, std.h
    a_eq, g = std.a_eq, std.g

    # Start at the cone identity with x projected onto the equality rows.
    s = ops.identity()
    z = ops.identity()
    y = np.zeros(me)
    if me:
        x = spla.lsqr(a_eq, b)[0]
    else:
        x = np.zeros(nx)
    tau, kappa = 1.0, 1.0

    norm_b = max(1.0, float(np.linalg.norm(b)) if me else 0.0)
    norm_h = max(1.0, float(np.linalg.norm(h)))
    norm_c = max(1.0, float(np.linalg.norm(c)))

    best = None
    status = "iteration_limit"
    iters = 0

    def residual_triple():
        r_x = (a_eq.T @ y if me else 0.0) + g.T @ z + c * tau
        r_y = a_eq @ x - b * tau if me else np.zeros(0)
        r_z = g @ x + s - h * tau
        r_tau = kappa + c @ x + (b @ y if me else 0.0) + h @ z
        return r_x, r_y, r_z, r_tau

    def metrics():
        pcost = (c @ x) / tau
        dcost = -((b @ y if me else 0.0) + h @ z) / tau
        r_x, r_y, r_z, _ = residual_triple()
        pres = max(
            (np.linalg.norm(r_y) / norm_b) if me else 0.0,
            np.linalg.norm(r_z) / norm_h,
        ) / tau
        dres = np.linalg.norm(r_x) / norm_c / tau
        relgap = (pcost - dcost) / max(1.0, abs(pcost), abs(dcost))
        return pres, dres, relgap

    while True:
        pres, dres, relgap = metrics()
        best = (x / tau, float(pres), float(dres), float(relgap))
        if pres <= opts.tol and dres <= opts.tol and abs(relgap) <= opts.tol:
            status = "optimal"
            break
        by_hz = (b @ y if me else 0.0) + h @ z
        if by_hz < 0.0:
            pinf = np.linalg.norm((a_eq.T @ y if me else 0.0) + g.T @ z) / norm_c
            if pinf / (-by_hz) <= opts.tol:
                status = "infeasible"
                break
        cx_val = c @ x
        if cx_val < 0.0:
            dinf = max(
                (np.linalg.norm(a_eq @ x) / norm_b) if me else 0.0,
                np.linalg.norm(g @ x + s) / norm_h,
            )
            if dinf / (-cx_val) <= opts.tol:
                status = "unbounded"
                break
        if iters >= opts.max_iter:
            status = "iteration_limit"
            break

        try:
            scal = _Scaling(ops, s, z)
        except FloatingPointError:
            status = "numerical_failure"
            break
        lam = scal.lam
        g_tilde = (scal.winv_matrix() @ g).tocsr()
        gt_f = g_tilde[std.fold_idx]
        gt_e = g_tilde[std.expl_idx]
        h_t = scal.winv_mul(h)

        kkt = _kkt_with_retries(std, gt_f, gt_e, opts)
        if kkt is None:
            status = "numerical_failure"
            break

        base = _solve3_factory(std, kkt, gt_f)

        # Slack directions and residuals live in the scaled space throughout;
        # ds and dz are unscaled only once, at the state update.
        def solve3(rx, ry, rz):
            dx, dy, dz = base(rx, ry, rz)
            for _ in range(opts.refine):
                e1 = rx - ((a_eq.T @ dy if me else 0.0) + g_tilde.T @ dz)
                e2 = ry - a_eq @ dx if me else np.zeros(0)
                e3 = rz - (g_tilde @ dx - dz)
                cx, cy, cz = base(e1, e2, e3)
                dx, dy, dz = dx + cx, dy + cy, dz + cz
            return dx, dy, dz

        try:
            vx, vy, vz = solve3(-c, b, h_t)
        except FloatingPointError:
            status = "numerical_failure"
            break

        r_x, r_y, r_z, r_tau = residual_triple()
        rz_t = scal.winv_mul(r_z)
        mu = (s @ z + tau * kappa) / (ops.degree + 1)

        def core(r1, r2, r3, r4, rhs5, rhs6):
            lam_div = ops.solve_jordan(lam, rhs5)
            ux, uy, uz = solve3(r1, r2, r3 - lam_div)
            denom = c @ vx + (b @ vy if me else 0.0) + h_t @ vz - kappa / tau
            numer = r4 - rhs6 / tau - (c @ ux + (b @ uy if me else 0.0) + h_t @ uz)
            dtau = numer / denom
            dx = ux + dtau * vx
            dy = uy + dtau * vy
            dz = uz + dtau * vz
            ds = lam_div - dz
            dkappa = (rhs6 - kappa * dtau) / tau
            return [dx, dy, dz, ds, dtau, dkappa]

        def gaps(d, r1, r2, r3, r4, rhs5, rhs6):
            dx, dy, dz, ds, dtau, dkappa = d
            e1 = r1 - ((a_eq.T @ dy if me else 0.0) + g_tilde.T @ dz + c * dtau)
            e2 = r2 - (a_eq @ dx - b * dtau) if me else np.zeros(0)
            e3 = r3 - (g_tilde @ dx + ds - h_t * dtau)
            e4 = r4 - (dkappa + c @ dx + (b @ dy if me else 0.0) + h_t @ dz)
            e5 = rhs5 - ops.prod(lam, ds + dz)
            e6 = rhs6 - (tau * dkappa + kappa * dtau)
            return e1, e2, e3, e4, e5, e6

        def direction(eta_w, rhs5, rhs6):
            # Refinement runs on the full homogeneous system so that errors
            # amplified by the tau elimination are corrected as well.
            rhs = (-eta_w * r_x, -eta_w * r_y, -eta_w * rz_t, -eta_w * r_tau,
                   rhs5, rhs6)
            d = core(*rhs)
            for _ in range(max(1, opts.refine)):
                errs = gaps(d, *rhs)
                corr = core(*errs)
                for k in range(6):
                    d[k] = d[k] + corr[k]
            errs = gaps(d, *rhs)
            scale = max(1.0, *(float(np.max(np.abs(np.atleast_1d(r)), initial=0.0)) for r in rhs))
            worst = max(float(np.max(np.abs(np.atleast_1d(e)), initial=0.0)) for e in errs)
            if not worst <= 1e-6 * scale:
                raise FloatingPointError("direction solve lost accuracy")
            return d

        try:
            lam_lam = ops.prod(lam, lam)
            dxa, dya, dza, dsa, dtaua, dkappaa = direction(1.0, -lam_lam, -tau * kappa)

            alpha_aff = min(
                ops.max_step(lam, dsa),
                ops.max_step(lam, dza),
                -tau / dtaua if dtaua < 0 else math.inf,
                -kappa / dkappaa if dkappaa < 0 else math.inf,
                1.0,
            )
            sigma = (1.0 - alpha_aff) ** 3

            gamma = ops.prod(dsa, dza)
            rhs5 = -lam_lam - gamma + sigma * mu * ops.identity()
            rhs6 = -tau * kappa - dtaua * dkappaa + sigma * mu
            dx, dy, dz, ds, dtau, dkappa = direction(1.0 - sigma, rhs5, rhs6)
        except FloatingPointError:
            status = "numerical_failure"
            break

        alpha = min(
            ops.max_step(lam, ds),
            ops.max_step(lam, dz),
            -tau / dtau if dtau < 0 else math.inf,
            -kappa / dkappa if dkappa < 0 else math.inf,
        )
        alpha = min(1.0, _STEP_FRACTION * alpha)
        if not math.isfinite(alpha) or alpha <= 0.0:
            status = "numerical_failure"
            break

        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * scal.winv_mul(dz)
        s = s + alpha * scal.w_mul(ds)
        tau += alpha * dtau
        kappa += alpha * dkappa
        iters += 1

    if best is None:
        return status, None, iters, Residuals(math.inf, math.inf, math.inf)
    x_sol, pres, dres, relgap = best
    if status in ("iteration_limit", "numerical_failure"):
        if pres <= _NEAR_OPTIMAL_TOL and dres <= _NEAR_OPTIMAL_TOL and abs(relgap) <= _NEAR_OPTIMAL_TOL:
            status = "near_optimal"
    keep_v = status in ("optimal", "near_optimal")
    return status, x_sol if keep_v else None, iters, Residuals(pres, dres, relgap)


# ---------------------------------------------------------------------------


def solve(prog: ConicProgram, options: SolverOptions | None = None) -> SolverResult:
    """Maximize the program objective; deterministic for identical inputs."""
    opts = options or SolverOptions()
    pre = _Presolved(prog)
    if pre.status == "infeasible":
        return SolverResult("infeasible", None, math.nan, 0, Residuals(math.inf, 0.0, 0.0))

    if pre.n_free == 0:
        v_full = pre.expand(np.zeros(0))
        return SolverResult(
            "optimal", v_full, float(prog.c @ v_full), 0, Residuals(0.0, 0.0, 0.0)
        )

    std = _StandardForm(pre)
    status, x_sol, iters, resid = _ipm(std, opts)
    if x_sol is None:
        return SolverResult(status, None, math.nan, iters, resid)
    v_full = pre.expand(x_sol)
    return SolverResult(status, v_full, float(prog.c @ v_full), iters, resid)


@dataclass(frozen=True)
class Violation:
    kind: str  # "row", "var", "cone"
    index: int
    amount: float

    def __str__(self):
        return f"{self.kind}[{self.index}] violated by {self.amount:.3e}"


def verify(prog: ConicProgram, v: np.ndarray, tol: float = 1e-6) -> list[Violation]:
    """All constraint violations of v beyond tol; empty iff feasible within tol."""
    v = np.asarray(v, dtype=float)
    out: list[Violation] = []
    act = prog.a @ v
    for r in range(prog.n_rows):
        excess = max(prog.row_lb[r] - act[r], act[r] - prog.row_ub[r])
        if excess > tol * _bound_scale(prog.row_lb[r], prog.row_ub[r]):
            out.append(Violation("row", r, float(excess)))
    for j in range(prog.n_vars):
        excess = max(prog.var_lb[j] - v[j], v[j] - prog.var_ub[j])
        if excess > tol * _bound_scale(prog.var_lb[j], prog.var_ub[j]):
            out.append(Violation("var", j, float(excess)))
    for k, (xi, zeta, eta) in enumerate(prog.cones):
        gap = v[eta] ** 2 - 2.0 * v[xi] * v[zeta]
        worst = max(gap, -v[xi], -v[zeta])
        if worst > tol:
            out.append(Violation("cone", k, float(worst)))
    return out


def solve_external(prog: ConicProgram, command: list[str] | str) -> SolverResult:
    """Bridge to an external solver process.

    The command is run as ``<command> <input.json> <output.json>``; the input
    file is the debug-JSON serialization, the output must be a JSON object
    {"v": [...], "status": "..."} with a full-length solution vector.
    """
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    with tempfile.TemporaryDirectory(prefix="fekete_socp_") as tmp:
        inp = Path(tmp) / "program.json"
        outp = Path(tmp) / "solution.json"
        inp.write_text(program_to_debug_json(prog))
        proc = subprocess.run([*argv, str(inp), str(outp)], capture_output=True, text=True)
        if proc.returncode != 0 or not outp.exists():
            raise SolverFailure(
                f"external solver failed (rc={proc.returncode}): {proc.stderr.strip()[:500]}"
            )
        doc = json.loads(outp.read_text())
    status = doc.get("status", "numerical_failure")
    allowed = {
        "optimal",
        "near_optimal",
        "infeasible",
        "unbounded",
        "iteration_limit",
        "numerical_failure",
    }
    if status not in allowed:
        status = "numerical_failure"
    v = doc.get("v")
    if v is not None and status in ("optimal", "near_optimal"):
        v = np.asarray(v, dtype=float)
        if v.shape != (prog.n_vars,):
            raise SolverFailure(
                f"external solver returned length {v.shape}, expected {prog.n_vars}"
            )
        worst = max((viol.amount for viol in verify(prog, v, 1e-6)), default=0.0)
        return SolverResult(status, v, float(prog.c @ v), 0, Residuals(worst, math.nan, math.nan))
    return SolverResult(status, None, math.nan, 0, Residuals(math.nan, math.nan, math.nan))
