"""Second-order cone reformulation of the D-optimal design relaxation.

The relaxed design problem

    maximize  det( sum_j w_j a_j a_j^T )^(1/l)
    subject to 0 <= w <= 1,  sum_j w_j = n

is rewritten exactly as a linear program over rotated second-order cones
(eta^2 <= 2 xi zeta).  The variable vector v concatenates, in order:

* u block: 2^p - 1 pairs (u_{i,1}, u_{i,2}) with p = ceil(log2(l)); the pairs
  form a binary tree computing a geometric mean, and every pair is tied
  together by an equality row (the duplication lets each value act as the
  scaled member of two different cones).
* g-hat block: l values, the scaled diagonal of a triangular factor.
* z block: an m x l matrix, column-major.
* t block: m x l, column-major, bounding z^2 / (2 w-hat).
* w-hat block: l identical copies of the half-weights w/2, column-major,
  tied together by equality rows.

The objective is to maximize u_{1,1} (slot 1), whose optimal value is
c(l) * det(M)^(1/(2l)) ... pinned down by :func:`scale_constant`.

Slot helper methods on :class:`VariableLayout` take the 1-based indices used
in the block formulas above and return 0-based positions into v.  All other
public indices (candidates, cone lists) follow the package's 0-based
convention, except inside the debug JSON, which is 1-based throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .design import DesignProblem, Weights

_SQRT2 = math.sqrt(2.0)


def scale_constant(ell: int) -> float:
    """Ratio between the optimal u_{1,1} and the l-th root it represents.

    For the binary-tree geometric mean over l positive values g-tilde with
    the g-hat scaling used here, the optimum is
    scale_constant(l) * (prod g-tilde)^(1/l); the closed form is
    2^((p-1) 2^(p-1) / l).  Validated numerically by the acceptance suite.
    """
    if ell < 2:
        raise ValueError(f"need ell >= 2, got {ell}")
    p = (ell - 1).bit_length()
    return 2.0 ** ((p - 1) * 2 ** (p - 1) / ell)


@dataclass(frozen=True)
class VariableLayout:
    """Slot arithmetic for the stacked variable vector v.

    ``ranges`` maps block names to half-open 0-based slot ranges.
    """

    m: int
    ell: int

    def __post_init__(self):
        if not 2 <= self.ell <= self.m:
            raise ValueError(f"need 2 <= ell <= m, got ell={self.ell}, m={self.m}")

    @property
    def p(self) -> int:
        return (self.ell - 1).bit_length()

    @property
    def n_pairs(self) -> int:
        return 2**self.p - 1

    @property
    def total_len(self) -> int:
        return 2 * self.n_pairs + self.ell + 3 * self.m * self.ell

    @property
    def ranges(self) -> dict[str, tuple[int, int]]:
        u_end = 2 * self.n_pairs
        g_end = u_end + self.ell
        z_end = g_end + self.m * self.ell
        t_end = z_end + self.m * self.ell
        return {
            "u": (0, u_end),
            "ghat": (u_end, g_end),
            "z": (g_end, z_end),
            "t": (z_end, t_end),
            "what": (t_end, t_end + self.m * self.ell),
        }

    # slot helpers: 1-based tree/matrix indices in, 0-based slots out

    def u1(self, i: int) -> int:
        return 2 * i - 2

    def u2(self, i: int) -> int:
        return 2 * i - 1

    def ghat(self, j: int) -> int:
        return 2 * self.n_pairs + j - 1

    def z(self, i: int, j: int) -> int:
        return 2 * self.n_pairs + self.ell + (j - 1) * self.m + i - 1

    def t(self, i: int, j: int) -> int:
        return self.z(i, j) + self.m * self.ell

    def what(self, i: int, j: int) -> int:
        return self.z(i, j) + 2 * self.m * self.ell

    @property
    def n_pad_rows(self) -> int:
        half = 2 ** (self.p - 1)
        if self.ell % 2 == 0:
            return half - self.ell // 2
        return half - (self.ell + 1) // 2

    @property
    def n_rows(self) -> int:
        return (
            self.n_pairs
            + self.m * (self.ell - 1)
            + self.ell * (self.ell + 1) // 2
            + 1
            + self.ell
            + self.n_pad_rows
        )

    def tree_cones(self) -> list[tuple[int, int, int]]:
        """Rotated cones (xi, zeta, eta) over the u/g-hat blocks, 0-based slots.

        Order: internal tree nodes, leaf pairs, then (odd l) the closing cone
        that couples g-hat_l back to u_{1,1}.
        """
        half = 2 ** (self.p - 1)
        cones = [
            (self.u1(2 * i), self.u1(2 * i + 1), self.u2(i)) for i in range(1, half)
        ]
        n_leaf = self.ell // 2 if self.ell % 2 == 0 else (self.ell - 1) // 2
        for i in range(half, half + n_leaf):
            cones.append(
                (self.ghat(2 * i - 2**self.p + 1), self.ghat(2 * i - 2**self.p + 2), self.u2(i))
            )
        if self.ell % 2 == 1:
            i = half + (self.ell - 1) // 2
            cones.append((self.ghat(self.ell), self.u1(1), self.u2(i)))
        return cones

    def pad_row_nodes(self) -> list[int]:
        """1-based tree nodes i whose u_{i,1} is padded down to u_{1,1}."""
        half = 2 ** (self.p - 1)
        start = half + (self.ell // 2 if self.ell % 2 == 0 else (self.ell + 1) // 2)
        return list(range(start, 2**self.p))


@dataclass(frozen=True, eq=False)
class ConicProgram:
    """maximize c^T v  s.t.  row_lb <= A v <= row_ub, var_lb <= v <= var_ub,
    and eta^2 <= 2 xi zeta with xi, zeta >= 0 for every cone (xi, zeta, eta).

    Cone entries are 0-based slots; no slot belongs to two cones.
    """

    c: np.ndarray
    a: sp.csr_matrix
    row_lb: np.ndarray
    row_ub: np.ndarray
    var_lb: np.ndarray
    var_ub: np.ndarray
    cones: tuple[tuple[int, int, int], ...]

    @property
    def n_rows(self) -> int:
        return self.a.shape[0]

    @property
    def n_vars(self) -> int:
        return self.a.shape[1]


def build_layout(m: int, ell: int) -> VariableLayout:
    """Slot layout for m candidates and truncation length ell (2 <= ell <= m)."""
    return VariableLayout(m, ell)


def _tree_triplets(lay: VariableLayout, rows, cols, vals, row0: int) -> int:
    """Pair-equality rows u_{i,1} - u_{i,2} = 0; returns next free row."""
    for i in range(1, lay.n_pairs + 1):
        rows += (row0, row0)
        cols += (lay.u1(i), lay.u2(i))
        vals += (1.0, -1.0)
        row0 += 1
    return row0


def _pad_triplets(lay: VariableLayout, rows, cols, vals, row0: int) -> int:
    """Rows u_{i,1} - u_{1,1} <= 0 for unused tree leaves; returns next row."""
    for i in lay.pad_row_nodes():
        rows += (row0, row0)
        cols += (0, lay.u1(i))
        vals += (-1.0, 1.0)
        row0 += 1
    return row0


def build_program(problem: DesignProblem) -> ConicProgram:
    """Assemble the cone program for a design problem (requires ell >= 2).

    Row order: u-pair equalities; w-hat copy equalities ([I -I] between
    consecutive copy columns); triangular-factor rows (per factor row r: the
    diagonal row, then the zero rows for columns r+1..l); the budget row over
    the last w-hat copy; the t-column sum rows; the tree padding rows.
    """
    a_mat = problem.regressors
    m, ell = problem.m, problem.ell
    lay = VariableLayout(m, ell)
    n = problem.budget

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    row_lb: list[float] = []
    row_ub: list[float] = []

    def push_bounds(lo: float, hi: float) -> None:
        row_lb.append(lo)
        row_ub.append(hi)

    r0 = _tree_triplets(lay, rows, cols, vals, 0)
    for _ in range(lay.n_pairs):
        push_bounds(0.0, 0.0)

    for j in range(1, ell):
        for i in range(1, m + 1):
            rows += (r0, r0)
            cols += (lay.what(i, j), lay.what(i, j + 1))
            vals += (1.0, -1.0)
            push_bounds(0.0, 0.0)
            r0 += 1

    for r in range(1, ell + 1):
        diag_coef = -2.0 if (r == ell and ell % 2 == 1) else -_SQRT2
        rows.append(r0)
        cols.append(lay.ghat(r))
        vals.append(diag_coef)
        for i in range(1, m + 1):
            coef = a_mat[i - 1, r - 1]
            if coef != 0.0:
                rows.append(r0)
                cols.append(lay.z(i, r))
                vals.append(coef)
        push_bounds(0.0, 0.0)
        r0 += 1
        for c in range(r + 1, ell + 1):
            for i in range(1, m + 1):
                coef = a_mat[i - 1, r - 1]
                if coef != 0.0:
                    rows.append(r0)
                    cols.append(lay.z(i, c))
                    vals.append(coef)
            push_bounds(0.0, 0.0)
            r0 += 1

    for i in range(1, m + 1):
        rows.append(r0)
        cols.append(lay.what(i, ell))
        vals.append(1.0)
    push_bounds(n / 2.0, n / 2.0)
    r0 += 1

    for j in range(1, ell + 1):
        rows.append(r0)
        cols.append(lay.ghat(j))
        vals.append(-2.0 if (j == ell and ell % 2 == 1) else -_SQRT2)
        for i in range(1, m + 1):
            rows.append(r0)
            cols.append(lay.t(i, j))
            vals.append(1.0)
        push_bounds(-math.inf, 0.0)
        r0 += 1

    r0 = _pad_triplets(lay, rows, cols, vals, r0)
    for _ in range(lay.n_pad_rows):
        push_bounds(-math.inf, 0.0)

    assert r0 == lay.n_rows

    total = lay.total_len
    var_lb = np.zeros(total)
    var_ub = np.full(total, math.inf)
    z0, z1 = lay.ranges["z"]
    var_lb[z0:z1] = -math.inf
    w0, w1 = lay.ranges["what"]
    var_ub[w0:w1] = 0.5

    c = np.zeros(total)
    c[lay.u1(1)] = 1.0

    cones = lay.tree_cones()
    for j in range(1, ell + 1):
        for i in range(1, m + 1):
            cones.append((lay.t(i, j), lay.what(i, j), lay.z(i, j)))
    flat = [s for cone in cones for s in cone]
    assert len(flat) == len(set(flat)), "a slot appears in two cones"

    a_sparse = sp.csr_matrix(
        (vals, (rows, cols)), shape=(lay.n_rows, total)
    )
    return ConicProgram(
        c=c,
        a=a_sparse,
        row_lb=np.array(row_lb),
        row_ub=np.array(row_ub),
        var_lb=var_lb,
        var_ub=var_ub,
        cones=tuple(cones),
    )


def add_pinned_weights(
    prog: ConicProgram, layout: VariableLayout, pinned
) -> ConicProgram:
    """Return a copy of the program with rows pinning w_j = 1 (w-hat_j1 = 1/2).

    ``pinned`` holds 0-based candidate indices.
    """
    pinned = sorted(int(j) for j in pinned)
    if not pinned:
        return prog
    if any(not 0 <= j < layout.m for j in pinned):
        raise ValueError("pinned index out of range")
    extra = sp.csr_matrix(
        (np.ones(len(pinned)), (range(len(pinned)), [layout.what(j + 1, 1) for j in pinned])),
        shape=(len(pinned), layout.total_len),
    )
    return ConicProgram(
        c=prog.c,
        a=sp.vstack([prog.a, extra], format="csr"),
        row_lb=np.concatenate([prog.row_lb, np.full(len(pinned), 0.5)]),
        row_ub=np.concatenate([prog.row_ub, np.full(len(pinned), 0.5)]),
        var_lb=prog.var_lb,
        var_ub=prog.var_ub,
        cones=prog.cones,
    )


def extract_weights(layout: VariableLayout, v: np.ndarray) -> Weights:
    """Read w = 2 * (first w-hat copy) out of a solution vector."""
    v = np.asarray(v, dtype=float)
    if v.shape != (layout.total_len,):
        raise ValueError(f"solution has length {v.shape}, expected {layout.total_len}")
    first = layout.what(1, 1)
    return Weights(np.maximum(2.0 * v[first : first + layout.m], 0.0))


def geometric_mean_program(gvals) -> ConicProgram:
    """Standalone tree program: maximize u_{1,1} with g-hat pinned from gvals.

    The optimum equals scale_constant(l) * (prod gvals)^(1/l); used to
    calibrate and test the scaling constant.
    """
    g = np.asarray(gvals, dtype=float)
    ell = len(g)
    if ell < 2 or np.any(g <= 0.0):
        raise ValueError("need at least two positive values")
    # reuse the layout arithmetic with a dummy m, keeping only u and g-hat
    lay = VariableLayout(ell, ell)
    total = 2 * lay.n_pairs + ell

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    r0 = _tree_triplets(lay, rows, cols, vals, 0)
    row_lb = [0.0] * lay.n_pairs
    row_ub = [0.0] * lay.n_pairs
    r0 = _pad_triplets(lay, rows, cols, vals, r0)
    row_lb += [-math.inf] * lay.n_pad_rows
    row_ub += [0.0] * lay.n_pad_rows

    ghat = g / _SQRT2
    if ell % 2 == 1:
        ghat[-1] = g[-1] / 2.0
    var_lb = np.zeros(total)
    var_ub = np.full(total, math.inf)
    g0 = 2 * lay.n_pairs
    var_lb[g0:] = ghat
    var_ub[g0:] = ghat

    c = np.zeros(total)
    c[0] = 1.0
    return ConicProgram(
        c=c,
        a=sp.csr_matrix((vals, (rows, cols)), shape=(r0, total)),
        row_lb=np.array(row_lb),
        row_ub=np.array(row_ub),
        var_lb=var_lb,
        var_ub=var_ub,
        cones=tuple(lay.tree_cones()),
    )


def _bound_token(x: float):
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    return x


def program_to_debug_json(prog: ConicProgram) -> str:
    """Serialize a program for inspection or an external solver.

    Rows, columns and cone slots are 1-based; infinite bounds become the
    strings "inf" / "-inf"; matrix entries are (row, col, value) triplets in
    row-major order with structural zeros omitted.
    """
    coo = prog.a.tocoo()
    order = np.lexsort((coo.col, coo.row))
    doc = {
        "obj": prog.c.tolist(),
        "rows": [
            [int(coo.row[k]) + 1, int(coo.col[k]) + 1, float(coo.data[k])] for k in order
        ],
        "bl": [_bound_token(x) for x in prog.row_lb],
        "bu": [_bound_token(x) for x in prog.row_ub],
        "xl": [_bound_token(x) for x in prog.var_lb],
        "xu": [_bound_token(x) for x in prog.var_ub],
        "cones": [[s + 1 for s in cone] for cone in prog.cones],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def program_from_debug_json(text: str) -> ConicProgram:
    """Inverse of :func:`program_to_debug_json`."""

    def num(x):
        if x == "inf":
            return math.inf
        if x == "-inf":
            return -math.inf
        return float(x)

    doc = json.loads(text)
    n_vars = len(doc["obj"])
    n_rows = len(doc["bl"])
    triplets = doc["rows"]
    a_sparse = sp.csr_matrix(
        (
            [t[2] for t in triplets],
            ([t[0] - 1 for t in triplets], [t[1] - 1 for t in triplets]),
        ),
        shape=(n_rows, n_vars),
    )
    return ConicProgram(
        c=np.array(doc["obj"], dtype=float),
        a=a_sparse,
        row_lb=np.array([num(x) for x in doc["bl"]]),
        row_ub=np.array([num(x) for x in doc["bu"]]),
        var_lb=np.array([num(x) for x in doc["xl"]]),
        var_ub=np.array([num(x) for x in doc["xu"]]),
        cones=tuple((c[0] - 1, c[1] - 1, c[2] - 1) for c in doc["cones"]),
    )
