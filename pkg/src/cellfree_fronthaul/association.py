"""User-centric clusters and greedy epsilon-orthogonal pilot assignment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelStats


@dataclass(frozen=True)
class Association:
    """UE-RU bipartite association stored as an (L, K) boolean mask."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def L(self) -> int:
        return self.mask.shape[0]

    @property
    def K(self) -> int:
        return self.mask.shape[1]

    def cluster(self, k: int) -> list[int]:
        return np.flatnonzero(self.mask[:, k]).tolist()

    def served(self, l: int) -> list[int]:
        return np.flatnonzero(self.mask[l]).tolist()

    @property
    def clusters(self) -> list[list[int]]:
        return [self.cluster(k) for k in range(self.K)]

    @property
    def served_sets(self) -> list[list[int]]:
        return [self.served(l) for l in range(self.L)]

    @property
    def served_ues(self) -> np.ndarray:
        """Boolean (K,) vector of UEs with a nonempty cluster."""
        return self.mask.any(axis=0)

    @classmethod
    def from_clusters(cls, clusters: list[list[int]], L: int) -> "Association":
        mask = np.zeros((L, len(clusters)), dtype=bool)
        for k, c in enumerate(clusters):
            mask[list(c), k] = True
        return cls(mask)

    @classmethod
    def from_served_sets(cls, served: list[list[int]], K: int) -> "Association":
        mask = np.zeros((len(served), K), dtype=bool)
        for l, u in enumerate(served):
            mask[l, list(u)] = True
        return cls(mask)


@dataclass
class PilotAssignment:
    pilots: np.ndarray  # (K,) int, -1 for unserved UEs
    tau_p: int
    fallback: list[int] = field(default_factory=list)  # UEs assigned despite an overlap violation


def form_clusters(stats: ChannelStats, snr: float, eta: float, c_max: int) -> Association:
    """Up to ``c_max`` strongest RUs per UE among those with beta * M * SNR >= eta.

    Ties in beta go to the lower RU index.
    """
    beta = stats.beta
    L, K = beta.shape
    mask = np.zeros((L, K), dtype=bool)
    for k in range(K):
        ok = [l for l in range(L) if beta[l, k] * stats.M * snr >= eta]
        ok.sort(key=lambda l: (-beta[l, k], l))
        mask[ok[:c_max], k] = True
    return Association(mask)


def subspace_overlap(s1, s2, M: int) -> float:
    """tr(F1^H F2 F2^H F1) for DFT-column subspaces; equals |s1 & s2|."""
    if not s1 or not s2:
        raise ValueError("index sets must be nonempty")
    return float(len(set(s1) & set(s2)))


def assign_pilots(assoc: Association, stats: ChannelStats, tau_p: int, epsilon: float = 0.1) -> PilotAssignment:
    """Greedy pilot assignment in decreasing order of each UE's strongest LSFC.

    A UE takes the lowest pilot that is epsilon-orthogonal (at every RU of its
    cluster) to all co-pilot UEs already served by that RU. When none
    qualifies, the pilot with the smallest worst overlap is used and the UE
    is recorded in ``fallback``.
    """
    if tau_p < 1:
        raise ValueError("tau_p must be >= 1")
    L, K = assoc.mask.shape
    sup = stats.support
    pilots = np.full(K, -1, dtype=int)
    served = assoc.served_ues
    best = np.where(served, np.max(np.where(assoc.mask, stats.beta, 0.0), axis=0), 0.0)
    order = sorted(np.flatnonzero(served).tolist(), key=lambda k: (-best[k], k))
    fallback = []
    for k in order:
        cl = assoc.cluster(k)
        worst = np.zeros(tau_p)
        for l in cl:
            others = [j for j in assoc.served(l) if pilots[j] >= 0]
            for j in others:
                ov = float(np.count_nonzero(sup[l, k] & sup[l, j]))
                worst[pilots[j]] = max(worst[pilots[j]], ov)
        ok = np.flatnonzero(worst <= epsilon)
        if ok.size:
            pilots[k] = int(ok[0])
        else:
            pilots[k] = int(np.argmin(worst))
            fallback.append(k)
    return PilotAssignment(pilots=pilots, tau_p=tau_p, fallback=fallback)


def pilot_violations(assoc: Association, stats: ChannelStats, pa: PilotAssignment, epsilon: float):
    """All (l, k, j) co-pilot pairs at a common RU whose overlap exceeds epsilon."""
    out = []
    for l in range(assoc.L):
        u = assoc.served(l)
        for a in range(len(u)):
            for b in range(a + 1, len(u)):
                k, j = u[a], u[b]
                if pa.pilots[k] == pa.pilots[j]:
                    ov = float(np.count_nonzero(stats.support[l, k] & stats.support[l, j]))
                    if ov > epsilon:
                        out.append((l, k, j))
    return out
