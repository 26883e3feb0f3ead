"""Fixed-format MPS writer."""

from __future__ import annotations

import math

from .model import BINARY, MilpModel

NAME_WIDTH = 8
_SENSE_CODE = {"<=": "L", ">=": "G", "=": "E"}


class MpsNameError(ValueError):
    pass


def _num(v: float) -> str:
    """Shortest repr of ``v`` fitting the 12-character numeric field."""
    if v == 0:
        return "0"
    v = float(v)
    if v == int(v) and abs(v) < 1e11:
        return str(int(v))
    for prec in range(12, 0, -1):
        s = f"{v:.{prec}g}"
        if len(s) <= 12:
            return s
    raise ValueError(f"cannot format {v} in 12 characters")


def _names(raw: list[str], prefix: str, mode: str) -> list[str]:
    if mode == "index":
        width = NAME_WIDTH - len(prefix)
        if len(raw) > 10**width:
            raise MpsNameError("too many entries for index naming")
        return [f"{prefix}{i:0{width}d}" for i in range(len(raw))]
    out = []
    seen: dict[str, str] = {}
    for name in raw:
        if any(ch.isspace() for ch in name):
            raise MpsNameError(f"name {name!r} contains whitespace")
        short = name[:NAME_WIDTH]
        if short in seen:
            raise MpsNameError(f"names {seen[short]!r} and {name!r} collide after truncation to {short!r}")
        seen[short] = name
        out.append(short)
    return out


def _line(f1: str, f2: str, f3: str = "", f4: str = "") -> str:
    # field columns: 2-3, 5-12, 15-22, 25-36
    s = f" {f1:<2} {f2:<8}"
    if f3 or f4:
        s += f"  {f3:<8}"
    if f4:
        s += f"  {f4:>12}"
    return s.rstrip()


def export_mps(model: MilpModel, names: str = "model") -> str:
    """Fixed-format MPS text for ``model``.

    ``names="model"`` truncates variable/row names to 8 characters and
    raises :class:`MpsNameError` on collisions; ``names="index"`` uses
    generated names ``C0000000`` / ``R0000000``. Binary columns are wrapped in
    INTORG/INTEND markers and given explicit [0, 1] bounds.
    """
    model.validate()
    cols = _names([v.name for v in model.variables], "C", names)
    rows = _names([c.name for c in model.constraints], "R", names)
    obj_name = "OBJ"
    if obj_name in rows:
        raise MpsNameError("a constraint is named OBJ")

    col_entries: list[list[tuple[str, float]]] = [[] for _ in model.variables]
    for j, a in sorted(model.objective.items()):
        col_entries[j].append((obj_name, a))
    for i, con in enumerate(model.constraints):
        for j, a in sorted(con.terms.items()):
            col_entries[j].append((rows[i], a))

    out = [f"NAME          {model.name[:NAME_WIDTH]}", "ROWS", _line("N", obj_name)]
    for i, con in enumerate(model.constraints):
        out.append(_line(_SENSE_CODE[con.sense], rows[i]))
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for j, var in enumerate(model.variables):
        is_int = var.kind == BINARY
        if is_int != in_int:
            tag = "'INTORG'" if is_int else "'INTEND'"
            out.append(f"    MARKER{marker:02d}  'MARKER'                 {tag}")
            marker += 1
            in_int = is_int
        entries = col_entries[j] or [(obj_name, 0.0)]
        for r, a in entries:
            out.append(_line("", cols[j], r, _num(a)))
    if in_int:
        out.append(f"    MARKER{marker:02d}  'MARKER'                 'INTEND'")
    out.append("RHS")
    for i, con in enumerate(model.constraints):
        if con.rhs != 0:
            out.append(_line("", "RHS", rows[i], _num(con.rhs)))
    out.append("BOUNDS")
    for j, var in enumerate(model.variables):
        lb, ub = var.lb, var.ub
        if var.kind == BINARY:
            out.append(_line("LO", "BND", cols[j], _num(lb)))
            out.append(_line("UP", "BND", cols[j], _num(ub)))
            continue
        if lb == -math.inf and ub == math.inf:
            out.append(_line("FR", "BND", cols[j]))
            continue
        if lb == ub:
            out.append(_line("FX", "BND", cols[j], _num(lb)))
            continue
        if lb == -math.inf:
            out.append(_line("MI", "BND", cols[j]))
        elif lb != 0:
            out.append(_line("LO", "BND", cols[j], _num(lb)))
        if ub != math.inf:
            out.append(_line("UP", "BND", cols[j], _num(ub)))
    out.append("ENDATA")
    return "\n".join(out) + "\n"
