"""Dense two-phase primal simplex.

Pricing is Dantzig's rule. Ratio-test ties are broken lexicographically on
the rows of the current basis inverse, read off the columns of the initial
slack/artificial basis, which rules out cycling on degenerate vertices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import dger

from .model import INFEASIBLE, OPTIMAL, UNBOUNDED, MilpModel, ModelError, Solution

PIVOT_TOL = 1e-9
COST_TOL = 1e-9
TIE_TOL = 1e-9


@dataclass
class _StdForm:
    """min c^T z  s.t.  A z = b, z >= 0, b >= 0 with x = offset + T z."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    const: float
    offset: np.ndarray
    T: np.ndarray  # (n_orig, n_struct) column map from structural z to x
    n_struct: int
    slack_basis: list  # per row: column index of a +1 slack usable as initial basis, or -1


def _standard_form(c, A, senses, b, lb, ub) -> _StdForm | None:
    n = len(c)
    cols = []  # per structural column: (orig var, sign)
    offset = np.zeros(n)
    extra_rows = []  # (struct col, rhs) for x' <= u
    for j in range(n):
        lo, hi = lb[j], ub[j]
        if hi < lo:
            return None
        if math.isfinite(lo) and lo == hi:
            offset[j] = lo
        elif math.isfinite(lo):
            offset[j] = lo
            cols.append((j, 1.0))
            if math.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif math.isfinite(hi):
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ns = len(cols)
    T = np.zeros((n, ns))
    for s, (j, sg) in enumerate(cols):
        T[j, s] = sg

    rows_A = [A @ T] if A.shape[0] else []
    rhs = [b - A @ offset] if A.shape[0] else []
    sense = list(senses)
    if extra_rows:
        E = np.zeros((len(extra_rows), ns))
        for r, (s, u) in enumerate(extra_rows):
            E[r, s] = 1.0
        rows_A.append(E)
        rhs.append(np.array([u for _, u in extra_rows]))
        sense += ["<="] * len(extra_rows)
    Af = np.vstack(rows_A) if rows_A else np.zeros((0, ns))
    bf = np.concatenate(rhs) if rhs else np.zeros(0)
    m = Af.shape[0]

    # rows with empty coefficient pattern are checked directly
    keep = []
    for i in range(m):
        if not np.any(Af[i]):
            s, r = sense[i], bf[i]
            tol = 1e-9 * max(1.0, abs(r))
            if (s == "<=" and r < -tol) or (s == ">=" and r > tol) or (s == "=" and abs(r) > tol):
                return None
        else:
            keep.append(i)
    Af, bf, sense = Af[keep], bf[keep], [sense[i] for i in keep]
    m = Af.shape[0]

    flip = bf < 0
    Af[flip] *= -1
    bf[flip] *= -1
    sense = [({"<=": ">=", ">=": "<="}.get(s, s) if f else s) for s, f in zip(sense, flip)]

    n_slack = sum(1 for s in sense if s != "=")
    S = np.zeros((m, n_slack))
    slack_basis = [-1] * m
    k = 0
    for i, s in enumerate(sense):
        if s == "<=":
            S[i, k] = 1.0
            slack_basis[i] = ns + k
            k += 1
        elif s == ">=":
            S[i, k] = -1.0
            k += 1
    cz = np.concatenate([T.T @ c, np.zeros(n_slack)])
    return _StdForm(
        A=np.hstack([Af, S]),
        b=bf,
        c=cz,
        const=float(c @ offset),
        offset=offset,
        T=T,
        n_struct=ns,
        slack_basis=slack_basis,
    )


class SimplexIterationLimit(RuntimeError):
    pass


def _pivot(T, i, j):
    T[i] /= T[i, j]
    col = T[:, j].copy()
    col[i] = 0.0
    if T.flags.c_contiguous:
        # in-place rank-one update on the Fortran view of T
        dger(-1.0, T[i].copy(), col, a=T.T, overwrite_a=1)
    else:
        T -= np.outer(col, T[i])


def _leaving_row(T, j, init_cols):
    m = T.shape[0] - 1
    col = T[:m, j]
    pos = np.flatnonzero(col > PIVOT_TOL)
    if pos.size == 0:
        return -1
    ratios = T[pos, -1] / col[pos]
    rmin = ratios.min()
    cand = pos[ratios <= rmin + TIE_TOL * max(1.0, abs(rmin))]
    if cand.size > 1:
        V = T[np.ix_(cand, init_cols)] / col[cand, None]
        while cand.size > 1:
            spread = V.max(axis=0) - V.min(axis=0)
            split = np.flatnonzero(spread > TIE_TOL * np.maximum(1.0, np.abs(V).max(axis=0)))
            if split.size == 0:
                break
            v = V[:, split[0]]
            keep = v <= v.min() + TIE_TOL * max(1.0, abs(v.min()))
            cand, V = cand[keep], V[keep]
    return int(cand[0])


def _iterate(T, basis, allowed, max_iter, init_cols):
    """Run simplex pivots on tableau T (last row: reduced costs, last column: rhs)."""
    m = T.shape[0] - 1
    allowed_idx = np.flatnonzero(allowed)
    for _ in range(max_iter):
        d = T[-1, allowed_idx]
        neg = np.flatnonzero(d < -COST_TOL)
        if neg.size == 0:
            return "optimal"
        j = allowed_idx[neg[np.argmin(d[neg])]]
        i = _leaving_row(T, j, init_cols)
        if i < 0:
            return "unbounded"
        _pivot(T, i, j)
        basis[i] = j
        rhs = T[:m, -1]
        rhs[(rhs < 0) & (rhs > -1e-9)] = 0.0
    raise SimplexIterationLimit(f"simplex did not terminate within {max_iter} pivots")


def _solve_std(sf: _StdForm, max_iter: int):
    m, nz = sf.A.shape
    art_rows = [i for i in range(m) if sf.slack_basis[i] < 0]
    n_art = len(art_rows)
    ncol = nz + n_art
    T = np.zeros((m + 1, ncol + 1))
    T[:m, :nz] = sf.A
    T[:m, -1] = sf.b
    basis = list(sf.slack_basis)
    for a, i in enumerate(art_rows):
        T[i, nz + a] = 1.0
        basis[i] = nz + a
    init_cols = list(basis)

    if n_art:
        # phase 1: minimise the sum of artificials
        T[-1, :] = 0.0
        T[-1, nz:ncol] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        allowed = np.ones(ncol, dtype=bool)
        _iterate(T, basis, allowed, max_iter, init_cols)
        if -T[-1, -1] > 1e-7 * max(1.0, float(np.max(np.abs(sf.b), initial=0.0))):
            return INFEASIBLE, None, None
        # drive remaining artificials out of the basis, drop redundant rows
        drop = []
        for i in range(m):
            if basis[i] >= nz:
                cand = np.flatnonzero(np.abs(T[i, :nz]) > PIVOT_TOL)
                if cand.size:
                    _pivot(T, i, cand[0])
                    basis[i] = int(cand[0])
                else:
                    drop.append(i)
        if drop:
            keep = [i for i in range(m) if i not in drop]
            T = np.vstack([T[keep], T[-1:]])
            basis = [basis[i] for i in keep]
            init_cols = [init_cols[i] for i in keep]
            m = len(keep)
    else:
        drop = []

    # phase 2; artificial columns stay in the tableau for the tie-break but never enter
    cB = np.array([sf.c[j] if j < nz else 0.0 for j in basis])
    T[-1, :] = 0.0
    T[-1, :nz] = sf.c - cB @ T[:m, :nz]
    T[-1, -1] = -cB @ T[:m, -1]
    allowed = np.zeros(ncol, dtype=bool)
    allowed[:nz] = True
    status = _iterate(T, basis, allowed, max_iter, init_cols)
    if status == "unbounded":
        return UNBOUNDED, None, None
    z = np.zeros(nz)
    z[basis] = T[:m, -1]
    rows = [i for i in range(sf.A.shape[0]) if i not in drop]
    # artificial columns are no longer needed once phase 2 is done
    keep = np.append(np.flatnonzero(allowed), T.shape[1] - 1)
    return OPTIMAL, z, (rows, basis, TableauState(sf, T[:, keep], basis, np.ones(nz, dtype=bool)))


def solve_arrays(c, A, senses, b, lb, ub, max_iter: int = 200_000) -> Solution:
    """Solve min c^T x over the rows and bounds given as dense arrays."""
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, len(c))
    sf = _standard_form(c, A, senses, np.asarray(b, dtype=float), np.asarray(lb, float), np.asarray(ub, float))
    if sf is None:
        return Solution(INFEASIBLE)
    status, z, basis_info = _solve_std(sf, max_iter)
    if status != OPTIMAL:
        return Solution(status)
    x = sf.offset + sf.T @ z[: sf.n_struct]
    obj = float(c @ x)
    rows, basis, _ = basis_info
    dual_obj = math.nan
    if rows:
        B = sf.A[np.ix_(rows, basis)]
        y = np.linalg.lstsq(B.T, sf.c[basis], rcond=None)[0]
        dual_obj = float(sf.b[rows] @ y) + sf.const
    else:
        dual_obj = sf.const
    return Solution(OPTIMAL, objective=obj, x=x, dual_objective=dual_obj)


@dataclass
class TableauState:
    """Optimal tableau of a solved LP, kept so that branch-and-bound children
    can be re-optimised with a few dual simplex pivots."""

    sf: _StdForm
    T: np.ndarray
    basis: list
    allowed: np.ndarray

    def solution(self) -> tuple[np.ndarray, float]:
        m = self.T.shape[0] - 1
        z = np.zeros(self.T.shape[1] - 1)
        z[self.basis] = np.maximum(self.T[:m, -1], 0.0)
        x = self.sf.offset + self.sf.T @ z[: self.sf.n_struct]
        return x, float(self.sf.const - self.T[-1, -1])


def solve_state(c, A, senses, b, lb, ub, max_iter: int = 200_000):
    """Like :func:`solve_arrays`, also returning the optimal tableau (or None)."""
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(-1, len(c))
    sf = _standard_form(c, A, senses, np.asarray(b, dtype=float), np.asarray(lb, float), np.asarray(ub, float))
    if sf is None:
        return INFEASIBLE, None
    status, _, info = _solve_std(sf, max_iter)
    return status, (info[2] if status == OPTIMAL else None)


def _dual_iterate(T, basis, allowed, max_iter):
    """Dual simplex from a dual-feasible tableau until the rhs is nonnegative."""
    m = T.shape[0] - 1
    for _ in range(max_iter):
        rhs = T[:m, -1]
        i = int(np.argmin(rhs))
        if rhs[i] >= -1e-9:
            rhs[rhs < 0] = 0.0
            return "optimal"
        row = T[i, :-1]
        cand = np.flatnonzero(allowed & (row < -PIVOT_TOL))
        if cand.size == 0:
            return "infeasible"
        ratios = np.maximum(T[-1, cand], 0.0) / -row[cand]
        j = int(cand[np.argmin(ratios)])
        _pivot(T, i, j)
        basis[i] = j
    raise SimplexIterationLimit(f"dual simplex did not terminate within {max_iter} pivots")


def fix_variable(state: TableauState, j: int, value: float, max_iter: int = 200_000):
    """Child of ``state`` with original variable ``j`` fixed to ``value``, which
    must be one end of its current range. Returns (status, new_state)."""
    sf = state.sf
    cols = np.flatnonzero(sf.T[j])
    if cols.size != 1:
        raise ValueError("only variables with a single structural column can be fixed")
    col = int(cols[0])
    target = (value - sf.offset[j]) * sf.T[j, col]
    # the other side of the range is already implied: z <= 0 at the lower end, -z <= -target at the upper
    sign = 1.0 if target <= 0 else -1.0
    m, w = state.T.shape[0] - 1, state.T.shape[1] - 1
    T = np.zeros((m + 2, w + 2))
    T[:m, :w] = state.T[:m, :-1]
    T[:m, -1] = state.T[:m, -1]
    T[-1, :w] = state.T[-1, :-1]
    T[-1, -1] = state.T[-1, -1]
    row = np.zeros(w + 2)
    row[col] = sign
    row[w] = 1.0
    row[-1] = sign * target
    basis = list(state.basis)
    if col in basis:
        row -= sign * T[basis.index(col)]
    T[m] = row
    basis.append(w)
    allowed = np.append(state.allowed, True)
    if _dual_iterate(T, basis, allowed, max_iter) != "optimal":
        return INFEASIBLE, None
    return OPTIMAL, TableauState(sf, T, basis, allowed)


def solve_lp(model: MilpModel, lb=None, ub=None, max_iter: int = 200_000) -> Solution:
    """LP relaxation of ``model`` (binaries treated as continuous in [0, 1]).

    ``lb``/``ub`` optionally override the variable bounds.
    """
    model.validate()
    A, senses, b = model.dense_rows()
    mlb, mub = model.bounds()
    lb = mlb if lb is None else np.asarray(lb, dtype=float)
    ub = mub if ub is None else np.asarray(ub, dtype=float)
    if lb.shape != (model.num_vars,) or ub.shape != (model.num_vars,):
        raise ModelError("bound vectors do not match the number of variables")
    return solve_arrays(model.cost_vector(), A, senses, b, lb, ub, max_iter)
