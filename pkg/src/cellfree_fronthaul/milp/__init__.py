"""Linear model container, exact LP/MILP solvers and MPS export.

Two backends are available. ``native`` is the in-package dense simplex with
branch-and-bound; ``highs`` delegates to scipy's HiGHS bindings and is meant
for models too large for a dense tableau. ``auto`` picks ``native`` for
models with at most ``NATIVE_SIZE_LIMIT`` variables.
"""

from __future__ import annotations

from .bnb import solve_lp_highs, solve_milp_highs, solve_milp_native
from .model import (
    BINARY,
    CONTINUOUS,
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    MilpModel,
    ModelError,
    NodeLimitError,
    Solution,
    constraint_violations,
)
from .mps import MpsNameError, export_mps
from .simplex import solve_lp as solve_lp_native

NATIVE_SIZE_LIMIT = 600


def _pick(model: MilpModel, backend: str) -> str:
    if backend == "auto":
        return "native" if model.num_vars <= NATIVE_SIZE_LIMIT else "highs"
    if backend not in ("native", "highs"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend


def solve_lp(model: MilpModel, backend: str = "native", lb=None, ub=None) -> Solution:
    """Solve the LP relaxation (binaries relaxed to [0, 1])."""
    if _pick(model, backend) == "native":
        return solve_lp_native(model, lb=lb, ub=ub)
    return solve_lp_highs(model, lb=lb, ub=ub)


def solve_milp(
    model: MilpModel,
    backend: str = "native",
    node_limit: int = 1_000_000,
    time_limit: float | None = None,
) -> Solution:
    """Exact MILP solve. A node or time limit raises :class:`NodeLimitError`
    with the incumbent attached."""
    if _pick(model, backend) == "native":
        return solve_milp_native(model, node_limit=node_limit)
    return solve_milp_highs(model, time_limit=time_limit, node_limit=node_limit)


__all__ = [
    "BINARY",
    "CONTINUOUS",
    "INFEASIBLE",
    "OPTIMAL",
    "UNBOUNDED",
    "MilpModel",
    "ModelError",
    "MpsNameError",
    "NodeLimitError",
    "Solution",
    "constraint_violations",
    "export_mps",
    "solve_lp",
    "solve_lp_highs",
    "solve_milp",
]
