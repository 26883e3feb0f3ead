from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

import numpy as np

CONTINUOUS = "continuous"
BINARY = "binary"

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"

SENSES = ("<=", "=", ">=")

Terms = Union[Mapping[int, float], Iterable[tuple[int, float]]]


class ModelError(ValueError):
    """Malformed model."""


class NodeLimitError(RuntimeError):
    """Branch-and-bound stopped at the node limit; carries the incumbent if any."""

    def __init__(self, message: str, incumbent: Optional["Solution"] = None, lower_bound: float = -math.inf):
        super().__init__(message)
        self.incumbent = incumbent
        self.lower_bound = lower_bound


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = math.inf
    kind: str = CONTINUOUS


@dataclass
class Constraint:
    terms: dict[int, float]
    sense: str
    rhs: float
    name: str


@dataclass
class Solution:
    status: str
    objective: float = math.nan
    x: Optional[np.ndarray] = None
    dual_objective: float = math.nan
    nodes: int = 0
    lp_bound: float = math.nan
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _merge(terms: Terms) -> dict[int, float]:
    items = terms.items() if isinstance(terms, Mapping) else terms
    out: dict[int, float] = {}
    for j, a in items:
        out[int(j)] = out.get(int(j), 0.0) + float(a)
    return {j: a for j, a in out.items() if a != 0.0}


class MilpModel:
    """Minimisation model with continuous and binary variables and sparse rows."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self._names: dict[str, int] = {}
        self._row_names: set[str] = set()

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf, kind: str = CONTINUOUS) -> int:
        if name in self._names:
            raise ModelError(f"duplicate variable name {name!r}")
        if kind not in (CONTINUOUS, BINARY):
            raise ModelError(f"unknown variable kind {kind!r}")
        if kind == BINARY:
            lb, ub = 0.0, 1.0
        self.variables.append(Variable(name, float(lb), float(ub), kind))
        self._names[name] = len(self.variables) - 1
        return len(self.variables) - 1

    def add_binary(self, name: str) -> int:
        return self.add_var(name, kind=BINARY)

    def var_index(self, name: str) -> int:
        return self._names[name]

    def add_constraint(self, terms: Terms, sense: str, rhs: float, name: Optional[str] = None) -> int:
        if sense not in SENSES:
            raise ModelError(f"unknown relation {sense!r}")
        t = _merge(terms)
        for j in t:
            if not 0 <= j < len(self.variables):
                raise ModelError(f"constraint references unknown variable {j}")
        name = name or f"r{len(self.constraints)}"
        if name in self._row_names:
            raise ModelError(f"duplicate constraint name {name!r}")
        self._row_names.add(name)
        self.constraints.append(Constraint(t, sense, float(rhs), name))
        return len(self.constraints) - 1

    def set_objective(self, terms: Terms) -> None:
        t = _merge(terms)
        for j in t:
            if not 0 <= j < len(self.variables):
                raise ModelError(f"objective references unknown variable {j}")
        self.objective = t

    def validate(self) -> None:
        names = set()
        for v in self.variables:
            if v.name in names:
                raise ModelError(f"duplicate variable name {v.name!r}")
            names.add(v.name)
            if v.kind == BINARY and (v.lb < 0 or v.ub > 1):
                raise ModelError(f"binary {v.name!r} must have bounds within [0, 1]")
            if math.isnan(v.lb) or math.isnan(v.ub):
                raise ModelError(f"NaN bound on {v.name!r}")
        n = len(self.variables)
        for c in self.constraints:
            if c.sense not in SENSES or any(not 0 <= j < n for j in c.terms) or not math.isfinite(c.rhs):
                raise ModelError(f"malformed constraint {c.name!r}")

    # views -------------------------------------------------------------

    def binaries(self) -> list[int]:
        return [j for j, v in enumerate(self.variables) if v.kind == BINARY]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return lb, ub

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for j, a in self.objective.items():
            c[j] = a
        return c

    def dense_rows(self) -> tuple[np.ndarray, list[str], np.ndarray]:
        A = np.zeros((self.num_constraints, self.num_vars))
        for i, con in enumerate(self.constraints):
            for j, a in con.terms.items():
                A[i, j] = a
        return A, [c.sense for c in self.constraints], np.array([c.rhs for c in self.constraints], dtype=float)

    def sparse_rows(self):
        from scipy.sparse import csr_matrix

        data, rows, cols = [], [], []
        for i, con in enumerate(self.constraints):
            for j, a in con.terms.items():
                rows.append(i)
                cols.append(j)
                data.append(a)
        return csr_matrix((data, (rows, cols)), shape=(self.num_constraints, self.num_vars))

    def relaxed(self) -> "MilpModel":
        m = self.copy()
        for v in m.variables:
            v.kind = CONTINUOUS
        return m

    def copy(self) -> "MilpModel":
        return copy.deepcopy(self)

    def objective_value(self, x) -> float:
        return float(sum(a * x[j] for j, a in self.objective.items()))


def constraint_violations(model: MilpModel, x, tol: float = 1e-6) -> list[tuple[str, float]]:
    """Rows and bounds violated by ``x`` beyond ``tol`` as (name, amount) pairs."""
    x = np.asarray(x, dtype=float)
    out = []
    for con in model.constraints:
        lhs = sum(a * x[j] for j, a in con.terms.items())
        if con.sense == "<=":
            v = lhs - con.rhs
        elif con.sense == ">=":
            v = con.rhs - lhs
        else:
            v = abs(lhs - con.rhs)
        if v > tol:
            out.append((con.name, float(v)))
    for j, var in enumerate(model.variables):
        if x[j] < var.lb - tol or x[j] > var.ub + tol:
            out.append((f"bound:{var.name}", float(max(var.lb - x[j], x[j] - var.ub))))
        if var.kind == BINARY and min(abs(x[j]), abs(x[j] - 1)) > tol:
            out.append((f"integrality:{var.name}", float(min(abs(x[j]), abs(x[j] - 1)))))
    return out
