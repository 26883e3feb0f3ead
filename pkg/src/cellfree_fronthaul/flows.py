"""Joint fronthaul routing and cluster-processor placement.

Uplink traffic is unicast: RU ``l`` sends ``B[l, k]`` bits per sample for
UE ``k`` through routers to the DU hosting that UE's cluster processor, with
flow conservation at routers. Downlink traffic is multicast: the hosting DU
emits ``R_dl[k]`` and every RU of the cluster must receive it; a router may
replicate its input on every outgoing link.

Full duplex keeps separate UL and DL capacity triples and minimises the
larger of the two weighted sums. Half duplex shares one capacity triple,
scales UL demand by ``1 - alpha_dl`` and DL demand by ``alpha_dl`` and
minimises the weighted sum.

Constraint rows carry numeric row-family tags, e.g. ``(34)[k=2,n=1]``, that the
verifier reuses so violations can be traced back to a row family:

====  =========================================================
tag   meaning
====  =========================================================
(30)  UL flow conservation at each router
(31)  UL source: RU sends at least its quantization rate
(32)  UL source: per-link flow at most the quantization rate
(33)  each served UE hosted by exactly one DU
(34)  UL sink: hosting DU receives the cluster's total rate
(35)  UL sink: only the hosting DU receives UE traffic
(36)  DL multicast: router-to-RU output at most router input
(37)  DL multicast: router-to-router output at most router input
(38)  DL source: hosting DU emits at least the DL rate
(39)  DL source: only the hosting DU emits, at most the rate
(40)  DL sink: each cluster RU receives the DL rate
(41)  full-duplex capacity rows and objective
(42)  half-duplex capacity rows and objective
====  =========================================================
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .association import Association
from .milp import (
    OPTIMAL,
    MilpModel,
    NodeLimitError,
    Solution,
    solve_lp,
    solve_milp,
)
from .topology import NetworkTopology, build_grid_topology

FULL = "full"
HALF = "half"
CLASSES = ("L", "Q", "D")  # RU-router, router-router, router-DU links
TOL = 1e-6


class FlowInfeasibleError(ValueError):
    """A UE has positive demand but no usable RU-to-DU route."""


@dataclass
class FlowWeights:
    ul: tuple = (1.0, 1.0, 1.0)
    dl: tuple = (1.0, 1.0, 1.0)
    hd: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        for w in (self.ul, self.dl, self.hd):
            if len(w) != 3 or any(not v > 0 for v in w):
                raise ValueError("weights must be three positive numbers")
        self.ul, self.dl, self.hd = (tuple(float(v) for v in w) for w in (self.ul, self.dl, self.hd))


@dataclass
class FlowProblemInput:
    topology: NetworkTopology
    assoc: Association  # effective (pruned) association
    B: np.ndarray  # (L, K) UL quantization rates, bits per sample
    R_dl: np.ndarray  # (K,) DL rates, bits per symbol
    alpha_dl: float
    weights: FlowWeights = field(default_factory=FlowWeights)
    du_capacity: Optional[list] = None

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        self.R_dl = np.asarray(self.R_dl, dtype=float)
        L, K = self.assoc.mask.shape
        if self.B.shape != (L, K) or self.R_dl.shape != (K,):
            raise ValueError("B must be (L, K) and R_dl (K,) matching the association")
        if L != self.topology.num_rus:
            raise ValueError("association and topology disagree on L")
        if np.any(self.B < 0) or np.any(self.R_dl < 0):
            raise ValueError("rates must be nonnegative")
        if np.any(self.B[~self.assoc.mask] > 0):
            raise ValueError("B > 0 outside the effective association")
        if not 0 <= self.alpha_dl <= 1:
            raise ValueError("alpha_dl must lie in [0, 1]")
        if self.du_capacity is not None and len(self.du_capacity) != self.topology.num_dus:
            raise ValueError("du_capacity needs one entry per DU")

    @property
    def K(self) -> int:
        return self.assoc.mask.shape[1]

    @property
    def served(self) -> np.ndarray:
        return self.assoc.served_ues

    def demands(self, duplex: str) -> tuple[np.ndarray, np.ndarray]:
        """(B, R_dl) as they enter the constraints of the given duplex mode."""
        if duplex == FULL:
            return self.B, self.R_dl
        if duplex == HALF:
            return (1.0 - self.alpha_dl) * self.B, self.alpha_dl * self.R_dl
        raise ValueError(f"unknown duplex mode {duplex!r}")


@dataclass
class FlowSolution:
    duplex: str
    status: str
    objective: float
    b: np.ndarray  # (K, N) placement, zero rows for unserved UEs
    x: dict  # UL flows keyed (k, cls, a, b), cls in {"ru", "fh", "du"}
    y: dict  # DL flows keyed (k, cls, a, b), oriented in the DL direction
    C: dict  # capacity variables, keys like "L_ul" (FD) or "L" (HD)
    lp_bound: float = math.nan
    nodes: int = 0
    info: dict = field(default_factory=dict)

    @property
    def host(self) -> np.ndarray:
        """Hosting DU per UE, -1 when unserved."""
        out = np.full(self.b.shape[0], -1)
        rows = self.b.sum(axis=1) > 0.5
        out[rows] = np.argmax(self.b[rows], axis=1)
        return out


def _edges(topo: NetworkTopology):
    """Directed UL edges per class and their DL counterparts."""
    ul = {
        "ru": [(l, q) for l, q in topo.ru_router_edges],
        "fh": [(q, q2) for q, q2 in topo.router_router_edges],
        "du": [(q, n) for q, n in topo.router_du_edges],
    }
    dl = {
        "ru": [(q, l) for l, q in topo.ru_router_edges],
        "fh": [(q, q2) for q, q2 in topo.router_router_edges],
        "du": [(n, q) for q, n in topo.router_du_edges],
    }
    return ul, dl


def _router_reach(topo: NetworkTopology, starts, reverse=False) -> set:
    adj: dict[int, list[int]] = {}
    for a, b in topo.router_router_edges:
        if reverse:
            a, b = b, a
        adj.setdefault(a, []).append(b)
    seen = set(starts)
    queue = deque(starts)
    while queue:
        q = queue.popleft()
        for q2 in adj.get(q, []):
            if q2 not in seen:
                seen.add(q2)
                queue.append(q2)
    return seen


def candidate_dus(inp: FlowProblemInput, k: int) -> list[int]:
    """DUs able to host UE ``k``: reachable from every RU carrying UL demand for ``k``."""
    topo = inp.topology
    cands = set(range(topo.num_dus))
    for l in np.flatnonzero(inp.B[:, k] > 0):
        routers = _router_reach(topo, [q for ll, q in topo.ru_router_edges if ll == l])
        cands &= {n for q, n in topo.router_du_edges if q in routers}
    if inp.R_dl[k] > 0:
        with_edge = {n for _, n in topo.router_du_edges}
        cands &= with_edge
        for l in inp.assoc.cluster(k):
            if not any(ll == l for ll, _ in topo.ru_router_edges):
                cands = set()
    return sorted(cands)


def precheck(inp: FlowProblemInput) -> None:
    for k in np.flatnonzero(inp.served):
        if (inp.B[:, k].sum() > 0 or inp.R_dl[k] > 0) and not candidate_dus(inp, k):
            raise FlowInfeasibleError(f"UE {k} has positive demand but no RU-to-DU route")


def _build(inp: FlowProblemInput, duplex: str) -> MilpModel:
    precheck(inp)
    topo = inp.topology
    N = topo.num_dus
    B, R = inp.demands(duplex)
    mask = inp.assoc.mask
    served = np.flatnonzero(inp.served)
    ul_e, dl_e = _edges(topo)
    m = MilpModel(f"fronthaul_{duplex}")
    meta = {"duplex": duplex, "b": {}, "x": {}, "y": {}, "C": {}, "t": None}

    for k in served:
        for n in range(N):
            meta["b"][(int(k), n)] = m.add_binary(f"b_{k}_{n}")
    if duplex == FULL:
        for d in ("ul", "dl"):
            for c in CLASSES:
                meta["C"][f"{c}_{d}"] = m.add_var(f"C{c}_{d}")
        meta["t"] = m.add_var("t")
    else:
        for c in CLASSES:
            meta["C"][c] = m.add_var(f"C{c}")

    # flow variables, only for commodities with positive demand
    for k in served:
        k = int(k)
        cl = set(inp.assoc.cluster(k))
        if B[:, k].sum() > 0:
            for cls, edges in ul_e.items():
                for a, b_ in edges:
                    if cls == "ru" and B[a, k] <= 0:
                        continue
                    meta["x"][(k, cls, a, b_)] = m.add_var(f"x{cls}_{k}_{a}_{b_}")
        if R[k] > 0:
            for cls, edges in dl_e.items():
                for a, b_ in edges:
                    if cls == "ru" and b_ not in cl:
                        continue
                    meta["y"][(k, cls, a, b_)] = m.add_var(f"y{cls}_{k}_{a}_{b_}")

    X, Y, bv = meta["x"], meta["y"], meta["b"]
    Q = topo.num_routers
    xs: dict[int, dict] = {}
    ys: dict[int, dict] = {}
    for (k, cls, a, b_), j in X.items():
        xs.setdefault(k, {})[(cls, a, b_)] = j
    for (k, cls, a, b_), j in Y.items():
        ys.setdefault(k, {})[(cls, a, b_)] = j

    for k in served:
        k = int(k)
        m.add_constraint({bv[(k, n)]: 1.0 for n in range(N)}, "=", 1.0, f"(33)[k={k}]")
        tot = float(B[:, k].sum())
        if tot > 0:
            xk = xs[k]
            for q in range(Q):
                terms: dict[int, float] = {}
                for (cls, a, b_), j in xk.items():
                    if b_ == q and cls in ("ru", "fh"):
                        terms[j] = terms.get(j, 0.0) + 1.0
                    if a == q and cls in ("fh", "du"):
                        terms[j] = terms.get(j, 0.0) - 1.0
                if terms:
                    m.add_constraint(terms, "=", 0.0, f"(30)[k={k},q={q}]")
            for l in np.flatnonzero(B[:, k] > 0):
                outs = [(b_, j) for (cls, a, b_), j in xk.items() if cls == "ru" and a == l]
                m.add_constraint({j: 1.0 for _, j in outs}, ">=", float(B[l, k]), f"(31)[k={k},l={l}]")
                for q, j in outs:
                    m.add_constraint({j: 1.0}, "<=", float(B[l, k]), f"(32)[k={k},l={l},q={q}]")
            for n in range(N):
                ins = [(a, j) for (cls, a, b_), j in xk.items() if cls == "du" and b_ == n]
                terms = {j: 1.0 for _, j in ins}
                terms[bv[(k, n)]] = -tot
                m.add_constraint(terms, ">=", 0.0, f"(34)[k={k},n={n}]")
                for q, j in ins:
                    m.add_constraint({j: 1.0, bv[(k, n)]: -tot}, "<=", 0.0, f"(35)[k={k},q={q},n={n}]")
        if R[k] > 0:
            rk = float(R[k])
            yk = ys[k]
            for q in range(Q):
                inflow = [j for (cls, a, b_), j in yk.items() if b_ == q and cls in ("du", "fh")]
                for (cls, a, b_), j in yk.items():
                    if a != q or cls not in ("ru", "fh"):
                        continue
                    terms = {i: 1.0 for i in inflow}
                    terms[j] = terms.get(j, 0.0) - 1.0
                    tag = "(36)" if cls == "ru" else "(37)"
                    m.add_constraint(terms, ">=", 0.0, f"{tag}[k={k},q={q},to={b_}]")
            for n in range(N):
                outs = [(b_, j) for (cls, a, b_), j in yk.items() if cls == "du" and a == n]
                terms = {j: 1.0 for _, j in outs}
                terms[bv[(k, n)]] = -rk
                m.add_constraint(terms, ">=", 0.0, f"(38)[k={k},n={n}]")
                for q, j in outs:
                    m.add_constraint({j: 1.0, bv[(k, n)]: -rk}, "<=", 0.0, f"(39)[k={k},n={n},q={q}]")
            for l in inp.assoc.cluster(k):
                ins = [j for (cls, _, b_), j in yk.items() if cls == "ru" and b_ == l]
                m.add_constraint({j: 1.0 for j in ins}, ">=", rk, f"(40)[k={k},l={l}]")

    if inp.du_capacity is not None:
        for n, cap in enumerate(inp.du_capacity):
            terms = {bv[(int(k), n)]: 1.0 for k in served}
            if terms:
                m.add_constraint(terms, "<=", float(cap), f"(kappa)[n={n}]")

    cls_map = {"ru": "L", "fh": "Q", "du": "D"}
    if duplex == FULL:
        for flows, d in ((X, "ul"), (Y, "dl")):
            load: dict[tuple, dict[int, float]] = {}
            for (k, cls, a, b_), j in flows.items():
                load.setdefault((cls, a, b_), {})[j] = 1.0
            for (cls, a, b_), terms in sorted(load.items()):
                terms = dict(terms)
                terms[meta["C"][f"{cls_map[cls]}_{d}"]] = -1.0
                m.add_constraint(terms, "<=", 0.0, f"(41)[{d},{cls},{a},{b_}]")
        t = meta["t"]
        for d, scale, w in (("ul", 1.0 - inp.alpha_dl, inp.weights.ul), ("dl", inp.alpha_dl, inp.weights.dl)):
            terms = {meta["C"][f"{c}_{d}"]: -scale * wc for c, wc in zip(CLASSES, w)}
            terms[t] = 1.0
            m.add_constraint(terms, ">=", 0.0, f"(41)[t>={d}]")
        m.set_objective({t: 1.0})
    else:
        # shared physical link: UL (a, b) pairs with DL (b, a) on RU and DU links,
        # router-router pairs share the same ordered pair
        load = {}
        for (k, cls, a, b_), j in X.items():
            load.setdefault((cls, a, b_), {})[j] = 1.0
        for (k, cls, a, b_), j in Y.items():
            key = (cls, a, b_) if cls == "fh" else (cls, b_, a)
            load.setdefault(key, {})[j] = 1.0
        for (cls, a, b_), terms in sorted(load.items()):
            terms = dict(terms)
            terms[meta["C"][cls_map[cls]]] = -1.0
            m.add_constraint(terms, "<=", 0.0, f"(42)[{cls},{a},{b_}]")
        m.set_objective({meta["C"][c]: w for c, w in zip(CLASSES, inp.weights.hd)})
    m.meta = meta
    return m


def build_full_duplex_model(inp: FlowProblemInput) -> MilpModel:
    return _build(inp, FULL)


def build_half_duplex_model(inp: FlowProblemInput) -> MilpModel:
    return _build(inp, HALF)


def build_model(inp: FlowProblemInput, duplex: str) -> MilpModel:
    return _build(inp, duplex)


def extract_solution(model: MilpModel, sol: Solution, inp: FlowProblemInput) -> FlowSolution:
    if sol.status != OPTIMAL:
        raise ValueError(f"cannot extract a solution with status {sol.status}")
    meta = model.meta
    x = sol.x
    b = np.zeros((inp.K, inp.topology.num_dus))
    for (k, n), j in meta["b"].items():
        b[k, n] = 1.0 if x[j] > 0.5 else 0.0
    clean = lambda v: max(float(v), 0.0)  # noqa: E731
    return FlowSolution(
        duplex=meta["duplex"],
        status=sol.status,
        objective=float(model.objective_value(x)),
        b=b,
        x={key: clean(x[j]) for key, j in meta["x"].items()},
        y={key: clean(x[j]) for key, j in meta["y"].items()},
        C={key: clean(x[j]) for key, j in meta["C"].items()},
        lp_bound=sol.lp_bound,
        nodes=sol.nodes,
    )


def _tie_break(model: MilpModel, inp: FlowProblemInput, stage1: float) -> MilpModel:
    """Second stage: keep stage-1 optimality and make capacity variables tight.

    FD minimises the UL plus DL weighted capacity; HD minimises the sum of
    per-class maxima of directional loads.
    """
    meta = model.meta
    m2 = model.copy()
    m2.meta = meta
    slack = 1e-9 * max(1.0, abs(stage1))
    m2.add_constraint(dict(model.objective), "<=", stage1 + slack, "stage1")
    if meta["duplex"] == FULL:
        obj = {}
        for d, scale, w in (("ul", 1.0 - inp.alpha_dl, inp.weights.ul), ("dl", inp.alpha_dl, inp.weights.dl)):
            for c, wc in zip(CLASSES, w):
                obj[meta["C"][f"{c}_{d}"]] = scale * wc
        m2.set_objective(obj)
        return m2
    obj = {}
    cls_map = {"ru": "L", "fh": "Q", "du": "D"}
    for flows, d in ((meta["x"], "ul"), (meta["y"], "dl")):
        aux = {c: m2.add_var(f"M{c}_{d}") for c in CLASSES}
        load: dict[tuple, dict[int, float]] = {}
        for (k, cls, a, b_), j in flows.items():
            load.setdefault((cls, a, b_), {})[j] = 1.0
        for (cls, a, b_), terms in sorted(load.items()):
            terms = dict(terms)
            terms[aux[cls_map[cls]]] = -1.0
            m2.add_constraint(terms, "<=", 0.0, f"max[{d},{cls},{a},{b_}]")
        for c, wc in zip(CLASSES, inp.weights.hd):
            obj[aux[c]] = wc
    m2.set_objective(obj)
    return m2


def _fix_placement(model: MilpModel, x: np.ndarray, n_vars: int):
    lb, ub = model.bounds()
    for j in model.binaries():
        if j < n_vars:
            lb[j] = ub[j] = round(float(x[j]))
    return lb, ub


def _hint_bounds(model: MilpModel, inp: FlowProblemInput, hint):
    """Bounds fixing the placement to ``hint``, or None if it does not fit."""
    if hint is None:
        return None
    hint = np.asarray(hint)
    if hint.shape != (inp.K, inp.topology.num_dus):
        return None
    lb, ub = model.bounds()
    for (k, n), j in model.meta["b"].items():
        if abs(hint[k].sum() - 1) > 1e-9:
            return None
        lb[j] = ub[j] = float(hint[k, n] > 0.5)
    return lb, ub


def _second_stage(m2, n_vars, x1, inp, backend, node_limit, time_limit, hint, search: bool) -> Optional[Solution]:
    """Best tie-break solution among the stage-1 placement, the hint and, with
    ``search``, a MILP solve over all placements."""
    lb, ub = _fix_placement(m2, x1, n_vars)
    cands = [solve_lp(m2, backend=backend, lb=lb, ub=ub)]
    hinted = _hint_bounds(m2, inp, hint)
    if hinted is not None:
        cands.append(solve_lp(m2, backend=backend, lb=hinted[0], ub=hinted[1]))
    if not search:
        cands = [c for c in cands if c.status == OPTIMAL]
        return min(cands, key=lambda c: c.objective) if cands else None
    try:
        cands.append(solve_milp(m2, backend=backend, node_limit=node_limit, time_limit=time_limit))
    except NodeLimitError as exc:
        if exc.incumbent is not None:
            # clean routing for the incumbent placement
            lb, ub = _fix_placement(m2, exc.incumbent.x, n_vars)
            cands.append(solve_lp(m2, backend=backend, lb=lb, ub=ub))
    cands = [c for c in cands if c is not None and c.status == OPTIMAL]
    return min(cands, key=lambda c: c.objective) if cands else None


def solve_flow(
    inp: FlowProblemInput,
    duplex: str,
    backend: str = "auto",
    node_limit: int = 1_000_000,
    time_limit: Optional[float] = None,
    lexicographic: bool = True,
    accept_incumbent: bool = False,
    placement_hint: Optional[np.ndarray] = None,
) -> FlowSolution:
    """Build and solve the placement MILP.

    The second, lexicographic stage keeps the stage-1 objective and
    minimises the capacity tie-break objective over placements and flows, so
    that capacity variables not binding in the objective are tight and, among
    equally good placements, the one with the smallest tie-break value wins.
    After a node-limited stage 1 the second stage only re-routes the
    incumbent placement (and the hint), since the placement is heuristic
    already and a second MILP costs as much as the first.

    When the node limit is hit, :class:`NodeLimitError` propagates unless
    ``accept_incumbent`` is set; the incumbent is then used and the gap to
    the solver's lower bound is stored in ``info``. A ``placement_hint``
    (K, N), typically the placement found for a neighbouring sweep point, is
    then also evaluated and kept if its routing LP is cheaper.
    """
    model = _build(inp, duplex)
    info: dict = {"proven_optimal": True}
    try:
        sol = solve_milp(model, backend=backend, node_limit=node_limit, time_limit=time_limit)
    except NodeLimitError as exc:
        if not accept_incumbent or exc.incumbent is None:
            raise
        sol = exc.incumbent
        info = {"proven_optimal": False, "lower_bound": float(exc.lower_bound)}
        # best routing for the incumbent placement
        lb, ub = _fix_placement(model, sol.x, model.num_vars)
        ref = solve_lp(model, backend=backend, lb=lb, ub=ub)
        if ref.status == OPTIMAL and ref.objective < sol.objective:
            sol = Solution(OPTIMAL, objective=ref.objective, x=ref.x, nodes=sol.nodes, lp_bound=sol.lp_bound)
        hinted = _hint_bounds(model, inp, placement_hint)
        if hinted is not None:
            ref = solve_lp(model, backend=backend, lb=hinted[0], ub=hinted[1])
            if ref.status == OPTIMAL and ref.objective < sol.objective:
                sol = Solution(OPTIMAL, objective=ref.objective, x=ref.x, nodes=sol.nodes, lp_bound=sol.lp_bound)
                info["from_hint"] = True
    if sol.status != OPTIMAL:
        raise RuntimeError(f"{duplex}-duplex solve ended with status {sol.status}")
    stage1 = float(sol.objective)
    if lexicographic and model.num_vars:
        m2 = _tie_break(model, inp, stage1)
        sol2 = _second_stage(
            m2, model.num_vars, sol.x, inp, backend, node_limit, time_limit, placement_hint, info["proven_optimal"]
        )
        if sol2 is not None:
            x = sol2.x[: model.num_vars]
            sol = Solution(OPTIMAL, objective=float(model.objective_value(x)), x=x, nodes=sol.nodes, lp_bound=sol.lp_bound)
    fs = extract_solution(model, sol, inp)
    fs.objective = min(stage1, fs.objective)
    if not info["proven_optimal"]:
        lbd = info["lower_bound"]
        info["gap"] = (fs.objective - lbd) / max(abs(fs.objective), 1e-12) if math.isfinite(lbd) else math.nan
    fs.info = info
    return fs


# verification ---------------------------------------------------------------


def _flow(d: dict, key) -> float:
    return d.get(key, 0.0)


def verify_solution(fs: FlowSolution, inp: FlowProblemInput, tol: float = TOL) -> list[str]:
    """Re-evaluate every constraint family from the extracted flows.

    Returns violation messages, each starting with the row-family tag; an
    empty list means the solution is feasible.
    """
    out: list[str] = []
    topo = inp.topology
    N, Q = topo.num_dus, topo.num_routers
    B, R = inp.demands(fs.duplex)
    ul_e, dl_e = _edges(topo)
    edge_sets = {("x", c): set(e) for c, e in ul_e.items()}
    edge_sets.update({("y", c): set(e) for c, e in dl_e.items()})
    for name, flows in (("x", fs.x), ("y", fs.y)):
        for (k, cls, a, b_), v in flows.items():
            if (a, b_) not in edge_sets[(name, cls)]:
                out.append(f"(edge) {name}{cls} flow for UE {k} on missing link ({a}, {b_})")
            if v < -tol:
                out.append(f"(sign) negative {name}{cls} flow {v} for UE {k}")

    served = inp.served
    for k in range(inp.K):
        row = fs.b[k]
        if not served[k]:
            if np.any(np.abs(row) > tol):
                out.append(f"(33)[k={k}] unserved UE has a placement")
            continue
        if np.any(np.minimum(np.abs(row), np.abs(row - 1)) > tol) or abs(row.sum() - 1) > tol:
            out.append(f"(33)[k={k}] placement row {row.tolist()} is not a single one")
        tot = float(B[:, k].sum())
        xk = {(cls, a, b_): v for (kk, cls, a, b_), v in fs.x.items() if kk == k}
        yk = {(cls, a, b_): v for (kk, cls, a, b_), v in fs.y.items() if kk == k}
        for q in range(Q):
            inflow = sum(v for (cls, a, b_), v in xk.items() if b_ == q and cls in ("ru", "fh"))
            outflow = sum(v for (cls, a, b_), v in xk.items() if a == q and cls in ("fh", "du"))
            if abs(inflow - outflow) > tol:
                out.append(f"(30)[k={k},q={q}] inflow {inflow:.9g} != outflow {outflow:.9g}")
        for l in range(topo.num_rus):
            sent = sum(v for (cls, a, _), v in xk.items() if cls == "ru" and a == l)
            if sent < B[l, k] - tol:
                out.append(f"(31)[k={k},l={l}] RU sends {sent:.9g} < {B[l, k]:.9g}")
            for (cls, a, q), v in xk.items():
                if cls == "ru" and a == l and v > B[l, k] + tol:
                    out.append(f"(32)[k={k},l={l},q={q}] link flow {v:.9g} > {B[l, k]:.9g}")
        for n in range(N):
            got = sum(v for (cls, _, b_), v in xk.items() if cls == "du" and b_ == n)
            if got < row[n] * tot - tol:
                out.append(f"(34)[k={k},n={n}] DU receives {got:.9g} < {row[n] * tot:.9g}")
            for (cls, q, b_), v in xk.items():
                if cls == "du" and b_ == n and v > row[n] * tot + tol:
                    out.append(f"(35)[k={k},q={q},n={n}] link flow {v:.9g} > {row[n] * tot:.9g}")
        rk = float(R[k])
        for q in range(Q):
            inflow = sum(v for (cls, a, b_), v in yk.items() if b_ == q and cls in ("du", "fh"))
            for (cls, a, b_), v in yk.items():
                if a == q and cls in ("ru", "fh") and v > inflow + tol:
                    tag = "(36)" if cls == "ru" else "(37)"
                    out.append(f"{tag}[k={k},q={q},to={b_}] output {v:.9g} > router input {inflow:.9g}")
        for n in range(N):
            sent = sum(v for (cls, a, _), v in yk.items() if cls == "du" and a == n)
            if sent < row[n] * rk - tol:
                out.append(f"(38)[k={k},n={n}] DU sends {sent:.9g} < {row[n] * rk:.9g}")
            for (cls, a, q), v in yk.items():
                if cls == "du" and a == n and v > row[n] * rk + tol:
                    out.append(f"(39)[k={k},n={n},q={q}] link flow {v:.9g} > {row[n] * rk:.9g}")
        for l in inp.assoc.cluster(k):
            got = sum(v for (cls, _, b_), v in yk.items() if cls == "ru" and b_ == l)
            if got < rk - tol:
                out.append(f"(40)[k={k},l={l}] RU receives {got:.9g} < {rk:.9g}")

    if inp.du_capacity is not None:
        for n, cap in enumerate(inp.du_capacity):
            if fs.b[:, n].sum() > cap + tol:
                out.append(f"(kappa)[n={n}] hosts {fs.b[:, n].sum():.0f} > {cap}")

    loads = link_loads(fs, inp)
    cls_map = {"ru": "L", "fh": "Q", "du": "D"}
    if fs.duplex == FULL:
        for d in ("ul", "dl"):
            for (cls, a, b_), v in loads[d].items():
                cap = fs.C.get(f"{cls_map[cls]}_{d}", 0.0)
                if v > cap + tol:
                    out.append(f"(41)[{d},{cls},{a},{b_}] load {v:.9g} > capacity {cap:.9g}")
        terms = _fd_terms(fs, inp)
        if abs(max(terms) - fs.objective) > tol * max(1.0, abs(fs.objective)):
            out.append(f"(41) objective {fs.objective:.9g} != max{terms}")
    else:
        for (cls, a, b_), v in loads["hd"].items():
            cap = fs.C.get(cls_map[cls], 0.0)
            if v > cap + tol:
                out.append(f"(42)[{cls},{a},{b_}] shared load {v:.9g} > capacity {cap:.9g}")
        obj = sum(w * fs.C.get(c, 0.0) for c, w in zip(CLASSES, inp.weights.hd))
        if abs(obj - fs.objective) > tol * max(1.0, abs(fs.objective)):
            out.append(f"(42) objective {fs.objective:.9g} != weighted capacity {obj:.9g}")
    return out


def link_loads(fs: FlowSolution, inp: FlowProblemInput) -> dict:
    """Per-link loads keyed by UL orientation (cls, a, b): "ul", "dl" and shared "hd"."""
    ul: dict[tuple, float] = {}
    dl: dict[tuple, float] = {}
    hd: dict[tuple, float] = {}
    for (k, cls, a, b_), v in fs.x.items():
        ul[(cls, a, b_)] = ul.get((cls, a, b_), 0.0) + v
        hd[(cls, a, b_)] = hd.get((cls, a, b_), 0.0) + v
    for (k, cls, a, b_), v in fs.y.items():
        key = (cls, a, b_) if cls == "fh" else (cls, b_, a)
        dl[key] = dl.get(key, 0.0) + v
        hd[key] = hd.get(key, 0.0) + v
    return {"ul": ul, "dl": dl, "hd": hd}


def _fd_terms(fs: FlowSolution, inp: FlowProblemInput) -> tuple[float, float]:
    a = inp.alpha_dl
    ul = (1 - a) * sum(w * fs.C.get(f"{c}_ul", 0.0) for c, w in zip(CLASSES, inp.weights.ul))
    dl = a * sum(w * fs.C.get(f"{c}_dl", 0.0) for c, w in zip(CLASSES, inp.weights.dl))
    return ul, dl


def _class_max(loads: dict, weights) -> float:
    total = 0.0
    for cls, w in zip(("ru", "fh", "du"), weights):
        vals = [v for (c, _, _), v in loads.items() if c == cls]
        total += w * max(vals, default=0.0)
    return total


def fronthaul_capacities(fs: FlowSolution, inp: FlowProblemInput) -> dict:
    """UL/DL fronthaul capacity metrics and totals.

    Full duplex reads the capacity variables, each direction weighted by its
    TDD share. Half duplex takes per-class maxima of the directional link
    loads; its total is the optimised weighted capacity, and the sum of the
    two directional maxima is reported alongside as ``fh_tot_sum``.
    """
    if fs.duplex == FULL:
        ul, dl = _fd_terms(fs, inp)
        return {"fh_ul": ul, "fh_dl": dl, "fh_tot": ul + dl, "fh_tot_sum": ul + dl, "discrepancy": 0.0}
    loads = link_loads(fs, inp)
    ul = _class_max(loads["ul"], inp.weights.hd)
    dl = _class_max(loads["dl"], inp.weights.hd)
    tot = sum(w * fs.C.get(c, 0.0) for c, w in zip(CLASSES, inp.weights.hd))
    return {"fh_ul": ul, "fh_dl": dl, "fh_tot": tot, "fh_tot_sum": ul + dl, "discrepancy": ul + dl - tot}


# oracle -----------------------------------------------------------------------


def brute_force_placement(inp: FlowProblemInput, duplex: str, lp_backend: str = "highs", max_placements: int = 10_000) -> float:
    """Minimum over every placement of the LP with binaries fixed.

    Independent of branch-and-bound; the LPs are solved with HiGHS by default.
    Returns ``inf`` when no placement is feasible.
    """
    model = _build(inp, duplex)
    served = [k for k in range(inp.K) if inp.served[k]]
    N = inp.topology.num_dus
    if N ** len(served) > max_placements:
        raise ValueError(f"{N}^{len(served)} placements exceed the limit {max_placements}")
    lb0, ub0 = model.bounds()
    best = math.inf
    for combo in itertools.product(range(N), repeat=len(served)):
        lb, ub = lb0.copy(), ub0.copy()
        for k, host in zip(served, combo):
            for n in range(N):
                j = model.meta["b"][(k, n)]
                lb[j] = ub[j] = 1.0 if n == host else 0.0
        sol = solve_lp(model, backend=lp_backend, lb=lb, ub=ub)
        if sol.status == OPTIMAL:
            best = min(best, sol.objective)
    return best


def random_instance(rng: np.random.Generator, L: int = 4, K: int = 4, Q: int = 3, N: int = 2) -> FlowProblemInput:
    """Small random instance for oracle checks: grid topology, random clusters,
    B uniform on [0, 8] over cluster links, R_dl uniform on [0, 4]."""
    topo = build_grid_topology(
        L, K, Q, N, 100.0, deg_rq=min(2, Q), deg_qn=min(2, N), rng_seed=int(rng.integers(2**32))
    )
    mask = rng.random((L, K)) < 0.5
    mask[rng.integers(L, size=K), np.arange(K)] = True
    B = np.where(mask, rng.uniform(0, 8, (L, K)), 0.0)
    return FlowProblemInput(
        topology=topo,
        assoc=Association(mask),
        B=B,
        R_dl=rng.uniform(0, 4, K),
        alpha_dl=float(rng.choice([0.2, 0.5, 0.8])),
    )


# instance dump/load -----------------------------------------------------------


def dump_instance(inp: FlowProblemInput) -> str:
    return json.dumps(
        {
            "topology": inp.topology.to_dict(),
            "assoc": inp.assoc.mask.astype(int).tolist(),
            "B": inp.B.tolist(),
            "R_dl": inp.R_dl.tolist(),
            "alpha_dl": inp.alpha_dl,
            "weights": {"ul": inp.weights.ul, "dl": inp.weights.dl, "hd": inp.weights.hd},
            "du_capacity": inp.du_capacity,
        },
        sort_keys=True,
    )


def load_instance(text: str) -> FlowProblemInput:
    d = json.loads(text)
    w = d.get("weights", {})
    return FlowProblemInput(
        topology=NetworkTopology.from_dict(d["topology"]),
        assoc=Association(np.array(d["assoc"], dtype=bool)),
        B=np.array(d["B"], dtype=float),
        R_dl=np.array(d["R_dl"], dtype=float),
        alpha_dl=float(d["alpha_dl"]),
        weights=FlowWeights(**{k: tuple(v) for k, v in w.items()}),
        du_capacity=d.get("du_capacity"),
    )
