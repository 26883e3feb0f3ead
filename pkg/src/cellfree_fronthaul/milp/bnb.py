"""Best-first branch-and-bound over binary variables."""

from __future__ import annotations

import heapq
import math

import numpy as np

from .model import INFEASIBLE, OPTIMAL, UNBOUNDED, MilpModel, NodeLimitError, Solution
from .simplex import fix_variable, solve_arrays, solve_state

INT_TOL = 1e-6


def _cutoff(best: float) -> float:
    return best - 1e-9 * max(1.0, abs(best)) if math.isfinite(best) else math.inf


def _polish(c, A, senses, b, lb, ub, bins, x):
    """Cold re-solve with the binaries of ``x`` fixed, removing pivoting drift."""
    flb, fub = lb.copy(), ub.copy()
    flb[bins] = fub[bins] = np.round(x[bins])
    sol = solve_arrays(c, A, senses, b, flb, fub)
    return sol if sol.status == OPTIMAL else None


def solve_milp_native(model: MilpModel, node_limit: int = 1_000_000, int_tol: float = INT_TOL) -> Solution:
    """Exact MILP solve by best-first branch and bound.

    Branches on the most fractional binary (ties: lowest id). Children are
    re-optimised from the parent tableau by dual simplex; the final incumbent
    is re-solved from scratch with its binaries fixed so reported values carry
    no accumulated pivoting error.
    """
    model.validate()
    A, senses, b = model.dense_rows()
    c = model.cost_vector()
    lb0, ub0 = model.bounds()
    bins = np.array(model.binaries(), dtype=int)

    status, state = solve_state(c, A, senses, b, lb0, ub0)
    if status != OPTIMAL:
        return Solution(status, nodes=1)
    x0, lp_bound = state.solution()
    if bins.size == 0:
        return Solution(OPTIMAL, objective=float(c @ x0), x=x0, nodes=1, lp_bound=lp_bound)

    incumbent: Solution | None = None
    best = math.inf
    counter = 0
    heap = [(lp_bound, counter, state, lb0, ub0, x0)]
    nodes = 1
    while heap:
        bound, _, st, lb, ub, x = heapq.heappop(heap)
        if bound >= _cutoff(best):
            continue
        frac = np.abs(x[bins] - np.round(x[bins]))
        if frac.max(initial=0.0) <= int_tol:
            best = bound
            incumbent = Solution(OPTIMAL, objective=bound, x=x)
            continue
        # most fractional: distance to nearest integer largest, lowest id on ties
        j = int(bins[np.argmax(frac)])
        for val in (0.0, 1.0):
            if nodes >= node_limit:
                raise NodeLimitError(
                    f"node limit {node_limit} reached",
                    incumbent=incumbent,
                    lower_bound=min([h[0] for h in heap] + [bound]),
                )
            nlb, nub = lb.copy(), ub.copy()
            nlb[j] = nub[j] = val
            status, child = fix_variable(st, j, val)
            nodes += 1
            if status != OPTIMAL:
                continue
            cx, cobj = child.solution()
            if cobj < _cutoff(best):
                counter += 1
                heapq.heappush(heap, (cobj, counter, child, nlb, nub, cx))
    if incumbent is None:
        return Solution(INFEASIBLE, nodes=nodes, lp_bound=lp_bound)
    clean = _polish(c, A, senses, b, lb0, ub0, bins, incumbent.x)
    incumbent = clean if clean is not None else incumbent
    incumbent.nodes = nodes
    incumbent.lp_bound = lp_bound
    return incumbent


def solve_milp_highs(
    model: MilpModel,
    time_limit: float | None = None,
    mip_rel_gap: float = 1e-9,
    node_limit: int | None = None,
) -> Solution:
    """Solve with the HiGHS MILP solver shipped with scipy.

    Hitting ``node_limit`` or ``time_limit`` raises :class:`NodeLimitError`
    carrying the incumbent (if any) and HiGHS' dual bound.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp

    model.validate()
    c = model.cost_vector()
    lb, ub = model.bounds()
    integrality = np.zeros(model.num_vars)
    integrality[model.binaries()] = 1
    A = model.sparse_rows()
    lo = np.full(model.num_constraints, -np.inf)
    hi = np.full(model.num_constraints, np.inf)
    for i, con in enumerate(model.constraints):
        if con.sense in ("=", ">="):
            lo[i] = con.rhs
        if con.sense in ("=", "<="):
            hi[i] = con.rhs
    options = {"mip_rel_gap": mip_rel_gap, "presolve": True}
    if time_limit is not None:
        options["time_limit"] = time_limit
    if node_limit is not None:
        options["node_limit"] = int(node_limit)
    cons = [LinearConstraint(A, lo, hi)] if model.num_constraints else []
    res = milp(c, constraints=cons, integrality=integrality, bounds=Bounds(lb, ub), options=options)
    if res.status == 2:
        return Solution(INFEASIBLE)
    if res.status == 3:
        return Solution(UNBOUNDED)
    bound = getattr(res, "mip_dual_bound", None)
    bound = math.nan if bound is None else float(bound)
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    x = None
    if res.x is not None:
        x = _polish_highs(model, np.array(res.x, dtype=float))
    if res.status == 0:
        return Solution(OPTIMAL, objective=float(c @ x), x=x, lp_bound=bound, nodes=nodes, info={"message": res.message})
    if res.status in (1, 4) and (x is not None or "limit" in str(res.message).lower()):
        inc = None
        if x is not None:
            inc = Solution(OPTIMAL, objective=float(c @ x), x=x, lp_bound=bound, nodes=nodes, info={"message": res.message})
        raise NodeLimitError(f"HiGHS stopped early: {res.message}", incumbent=inc, lower_bound=bound)
    return Solution("Error", info={"message": res.message})


def _polish_highs(model: MilpModel, x: np.ndarray) -> np.ndarray:
    """Round the binaries and re-solve the continuous part as an LP.

    HiGHS accepts MILP solutions within its 1e-6 feasibility tolerance; the
    LP with binaries fixed gives the continuous values at LP accuracy.
    """
    bins = model.binaries()
    x[bins] = np.round(x[bins])
    lb, ub = model.bounds()
    lb[bins] = ub[bins] = x[bins]
    ref = solve_lp_highs(model, lb=lb, ub=ub)
    return ref.x if ref.status == OPTIMAL else x


def solve_lp_highs(model: MilpModel, lb=None, ub=None) -> Solution:
    """LP relaxation via scipy's HiGHS linprog; used as an independent reference."""
    from scipy.optimize import linprog

    model.validate()
    A, senses, b = model.dense_rows()
    c = model.cost_vector()
    mlb, mub = model.bounds()
    lb = mlb if lb is None else lb
    ub = mub if ub is None else ub
    le = [i for i, s in enumerate(senses) if s == "<="]
    ge = [i for i, s in enumerate(senses) if s == ">="]
    eq = [i for i, s in enumerate(senses) if s == "="]
    A_ub = np.vstack([A[le], -A[ge]]) if le or ge else None
    b_ub = np.concatenate([b[le], -b[ge]]) if le or ge else None
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A[eq] if eq else None,
        b_eq=b[eq] if eq else None,
        bounds=list(zip([None if not np.isfinite(v) else v for v in lb], [None if not np.isfinite(v) else v for v in ub])),
        method="highs",
    )
    if res.status == 2:
        return Solution(INFEASIBLE)
    if res.status == 3:
        return Solution(UNBOUNDED)
    if res.status != 0:
        return Solution("Error", info={"message": res.message})
    return Solution(OPTIMAL, objective=float(res.fun), x=np.array(res.x))
