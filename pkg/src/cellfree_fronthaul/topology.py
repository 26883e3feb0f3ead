"""Node placement on a square torus and the three-layer fronthaul graph.

Fronthaul edges are stored in uplink orientation:

* ``ru_router_edges``     -- (ru, router)
* ``router_router_edges`` -- (router, router'), oriented
* ``router_du_edges``     -- (router, du)

Downlink traffic uses the same physical links in the reverse direction
(router-router links keep their orientation).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class Position:
    x: float
    y: float


def torus_distance(p1: Position, p2: Position, area_side: float) -> float:
    """Euclidean distance with per-axis wraparound on a square torus."""
    dx = abs(p1.x - p2.x) % area_side
    dy = abs(p1.y - p2.y) % area_side
    dx = min(dx, area_side - dx)
    dy = min(dy, area_side - dy)
    return math.hypot(dx, dy)


def torus_displacement(src: np.ndarray, dst: np.ndarray, area_side: float) -> np.ndarray:
    """Shortest displacement vectors ``dst - src`` on the torus.

    ``src`` has shape (A, 2) and ``dst`` shape (B, 2); the result is (A, B, 2).
    """
    d = dst[None, :, :] - src[:, None, :]
    return (d + area_side / 2.0) % area_side - area_side / 2.0


def torus_distance_matrix(src: np.ndarray, dst: np.ndarray, area_side: float) -> np.ndarray:
    return np.linalg.norm(torus_displacement(src, dst, area_side), axis=-1)


@dataclass
class NetworkTopology:
    area_side: float
    ru_positions: list[Position]
    ue_positions: list[Position]
    num_routers: int
    num_dus: int
    ru_router_edges: list[tuple[int, int]]
    router_router_edges: list[tuple[int, int]]
    router_du_edges: list[tuple[int, int]]
    router_positions: list[Position] = field(default_factory=list)
    du_positions: list[Position] = field(default_factory=list)
    du_capacity: Optional[list[int]] = None
    ru_grid: Optional[tuple[int, int]] = None
    seed: Optional[int] = None

    @property
    def num_rus(self) -> int:
        return len(self.ru_positions)

    @property
    def num_ues(self) -> int:
        return len(self.ue_positions)

    def ru_array(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.ru_positions], dtype=float).reshape(-1, 2)

    def ue_array(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.ue_positions], dtype=float).reshape(-1, 2)

    def to_dict(self) -> dict:
        def pts(ps):
            return [[p.x, p.y] for p in ps]

        return {
            "area_side": self.area_side,
            "ru_grid": list(self.ru_grid) if self.ru_grid else None,
            "seed": self.seed,
            "ru_positions": pts(self.ru_positions),
            "ue_positions": pts(self.ue_positions),
            "router_positions": pts(self.router_positions),
            "du_positions": pts(self.du_positions),
            "num_routers": self.num_routers,
            "num_dus": self.num_dus,
            "edges": {
                "ru_router": [list(e) for e in self.ru_router_edges],
                "router_router": [list(e) for e in self.router_router_edges],
                "router_du": [list(e) for e in self.router_du_edges],
            },
            "du_capacity": self.du_capacity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkTopology":
        def pts(xs):
            return [Position(float(a), float(b)) for a, b in xs]

        edges = d["edges"]
        return cls(
            area_side=float(d["area_side"]),
            ru_positions=pts(d["ru_positions"]),
            ue_positions=pts(d["ue_positions"]),
            num_routers=int(d["num_routers"]),
            num_dus=int(d["num_dus"]),
            ru_router_edges=[tuple(e) for e in edges["ru_router"]],
            router_router_edges=[tuple(e) for e in edges["router_router"]],
            router_du_edges=[tuple(e) for e in edges["router_du"]],
            router_positions=pts(d.get("router_positions", [])),
            du_positions=pts(d.get("du_positions", [])),
            du_capacity=d.get("du_capacity"),
            ru_grid=tuple(d["ru_grid"]) if d.get("ru_grid") else None,
            seed=d.get("seed"),
        )


def grid_centers(nx: int, ny: int, area_side: float) -> list[Position]:
    """Cell centers of an ``nx`` x ``ny`` grid, row-major over y then x."""
    sx, sy = area_side / nx, area_side / ny
    return [Position((i + 0.5) * sx, (j + 0.5) * sy) for j in range(ny) for i in range(nx)]


def lattice_positions(count: int, area_side: float) -> list[Position]:
    """Evenly spread points on the torus (rank-1 lattice).

    Point i sits at ((i + 1/2) / n, ((g i) mod n + 1/2) / n) scaled by the
    side, with g the integer closest to sqrt(n) that is coprime with n.
    """
    if count <= 0:
        return []
    gen = 1
    if count > 2:
        target = math.sqrt(count)
        candidates = [g for g in range(1, count) if math.gcd(g, count) == 1]
        gen = min(candidates, key=lambda g: (abs(g - target), g))
    step = area_side / count
    return [Position((i + 0.5) * step, (((gen * i) % count) + 0.5) * step) for i in range(count)]


def factor_grid(L: int) -> tuple[int, int]:
    """Most square factorisation ``nx * ny = L`` with ``nx >= ny``."""
    ny = int(math.isqrt(L))
    while L % ny:
        ny -= 1
    return L // ny, ny


def _nearest(src: Position, dst: Sequence[Position], k: int, area_side: float) -> list[int]:
    dists = [(torus_distance(src, p, area_side), j) for j, p in enumerate(dst)]
    dists.sort()
    return [j for _, j in dists[:k]]


def build_grid_topology(
    L: int,
    K: int,
    Q: int,
    N: int,
    area_side: float,
    deg_rq: int = 2,
    deg_qn: int = 2,
    rng_seed: int = 0,
    ru_grid: Optional[tuple[int, int]] = None,
    router_ring: bool = True,
    du_capacity: Optional[Sequence[int]] = None,
) -> NetworkTopology:
    """RUs on a regular grid, UEs i.i.d. uniform, routers and DUs on lattices.

    Each RU links to its ``deg_rq`` nearest routers and each router to its
    ``deg_qn`` nearest DUs. A DU left without any router edge is attached to
    its nearest router. Routers form a bidirectional ring when
    ``router_ring`` is set.
    """
    if area_side <= 0:
        raise ValueError("area_side must be positive")
    if min(L, Q, N) < 1 or K < 0:
        raise ValueError("need L, Q, N >= 1 and K >= 0")
    if deg_rq < 1 or deg_qn < 1:
        raise ValueError("connectivity degrees must be >= 1")
    if deg_rq > Q:
        raise ValueError(f"deg_rq={deg_rq} exceeds the number of routers Q={Q}")
    if deg_qn > N:
        raise ValueError(f"deg_qn={deg_qn} exceeds the number of DUs N={N}")
    nx, ny = ru_grid if ru_grid is not None else factor_grid(L)
    if nx * ny != L:
        raise ValueError(f"RU grid {nx}x{ny} does not hold L={L} RUs")

    rng = np.random.default_rng(rng_seed)
    rus = grid_centers(nx, ny, area_side)
    ue_xy = rng.uniform(0.0, area_side, size=(K, 2))
    ues = [Position(float(x), float(y)) for x, y in ue_xy]
    routers = lattice_positions(Q, area_side)
    dus = lattice_positions(N, area_side)

    ru_router = sorted((l, q) for l, p in enumerate(rus) for q in _nearest(p, routers, deg_rq, area_side))
    router_du = {(q, n) for q, p in enumerate(routers) for n in _nearest(p, dus, deg_qn, area_side)}
    for n, p in enumerate(dus):
        if not any(e[1] == n for e in router_du):
            router_du.add((_nearest(p, routers, 1, area_side)[0], n))
    rr: set[tuple[int, int]] = set()
    if router_ring and Q > 1:
        for q in range(Q):
            nxt = (q + 1) % Q
            if nxt != q:
                rr.add((q, nxt))
                rr.add((nxt, q))

    return NetworkTopology(
        area_side=float(area_side),
        ru_positions=rus,
        ue_positions=ues,
        num_routers=Q,
        num_dus=N,
        ru_router_edges=ru_router,
        router_router_edges=sorted(rr),
        router_du_edges=sorted(router_du),
        router_positions=routers,
        du_positions=dus,
        du_capacity=list(du_capacity) if du_capacity is not None else None,
        ru_grid=(nx, ny),
        seed=rng_seed,
    )


def reachable_dus(topo: NetworkTopology, ru: int) -> set[int]:
    """DUs reachable from ``ru`` along uplink-oriented fronthaul edges."""
    adj: dict[int, list[int]] = {}
    for a, b in topo.router_router_edges:
        adj.setdefault(a, []).append(b)
    start = [q for l, q in topo.ru_router_edges if l == ru]
    seen = set(start)
    queue = deque(start)
    while queue:
        q = queue.popleft()
        for q2 in adj.get(q, []):
            if q2 not in seen:
                seen.add(q2)
                queue.append(q2)
    return {n for q, n in topo.router_du_edges if q in seen}


def validate_topology(topo: NetworkTopology) -> list[str]:
    """Every violated structural invariant, as readable messages. Empty means ok."""
    L, Q, N = topo.num_rus, topo.num_routers, topo.num_dus
    out: list[str] = []
    for p in list(topo.ru_positions) + list(topo.ue_positions):
        if not (0 <= p.x < topo.area_side and 0 <= p.y < topo.area_side):
            out.append(f"position ({p.x}, {p.y}) outside area")
    for l, q in topo.ru_router_edges:
        if not (0 <= l < L and 0 <= q < Q):
            out.append(f"ru_router edge ({l}, {q}) out of range")
    for q, q2 in topo.router_router_edges:
        if not (0 <= q < Q and 0 <= q2 < Q):
            out.append(f"router_router edge ({q}, {q2}) out of range")
        if q == q2:
            out.append(f"self-loop at router {q}")
    for q, n in topo.router_du_edges:
        if not (0 <= q < Q and 0 <= n < N):
            out.append(f"router_du edge ({q}, {n}) out of range")
    for l in range(L):
        if not any(e[0] == l for e in topo.ru_router_edges):
            out.append(f"isolated RU {l}")
    for n in range(N):
        if not any(e[1] == n for e in topo.router_du_edges):
            out.append(f"isolated DU {n}")
    for l in range(L):
        if not reachable_dus(topo, l):
            out.append(f"no RU→DU path from RU {l}")
    if topo.du_capacity is not None and len(topo.du_capacity) != N:
        out.append("du_capacity length differs from number of DUs")
    return out
