"""Uplink PHY: subspace channel estimation, local LMMSE combining, cluster-level
combining under fronthaul quantization, actual SINR and ergodic rates.

RU-local processing (estimates, LMMSE vectors, local interference variance)
always uses the association as formed. Cluster-level combining runs over the
effective (pruned) clusters only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .association import Association, PilotAssignment
from .channel import ChannelStats, crandn, dft_matrix, sample_channel


def estimate_channels(
    H: np.ndarray,
    pilots: PilotAssignment,
    assoc: Association,
    stats: ChannelStats,
    snr: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Subspace-projected pilot estimates, (L, K, M), zero outside the association.

    The projected pilot field at RU l for pilot t is the sum of channels of all
    UEs on pilot t plus white noise of per-component variance 1/(tau_p SNR).
    """
    L, K, M = H.shape
    tau = pilots.tau_p
    active = pilots.pilots >= 0
    onehot = np.zeros((K, tau))
    onehot[np.flatnonzero(active), pilots.pilots[active]] = 1.0
    Y = np.einsum("lim,it->ltm", H, onehot)
    Y = Y + crandn(rng, Y.shape) / np.sqrt(tau * snr)
    t = np.where(active, pilots.pilots, 0)
    Yk = Y[:, t, :]  # (L, K, M)
    F = dft_matrix(M)
    coef = (Yk @ F.conj()) * stats.support
    Hhat = coef @ F.T
    return Hhat * assoc.mask[..., None]


def noise_plus_oci_variance(assoc: Association, stats: ChannelStats, snr: float, active=None) -> np.ndarray:
    """nu_l = 1 + SNR * sum of beta_{l,i} over transmitting UEs i not served by RU l."""
    K = assoc.K
    act = np.ones(K, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    outside = (~assoc.mask) & act[None, :]
    return 1.0 + snr * np.sum(stats.beta * outside, axis=1)


def lmmse_vectors(Hhat: np.ndarray, nu: np.ndarray, snr: float) -> np.ndarray:
    """v_{l,k} = (nu_l I + SNR sum_i hhat hhat^H)^{-1} hhat_{l,k}, shape (L, K, M).

    ``Hhat`` must be zero outside the association so the sum runs over U_l.
    One batched solve per RU covers all its UEs.
    """
    L, K, M = Hhat.shape
    Ht = np.swapaxes(Hhat, 1, 2)  # (L, M, K): columns are hhat_{l,k}
    A = nu[:, None, None] * np.eye(M) + snr * Ht @ Ht.conj().swapaxes(1, 2)
    V = np.linalg.solve(A, Ht)
    return np.swapaxes(V, 1, 2)


def inner_products(V: np.ndarray, H: np.ndarray) -> np.ndarray:
    """out[l, k, i] = v_{l,k}^H h_{l,i}."""
    return np.einsum("lkm,lim->lki", V.conj(), H)


def observation_power(V: np.ndarray, H: np.ndarray, snr: float, active: np.ndarray) -> np.ndarray:
    """Per-realization E_s,z |v^H y_l|^2 = SNR sum_i |v^H h_{l,i}|^2 + ||v||^2."""
    VH = inner_products(V, H)
    return snr * np.sum(np.abs(VH) ** 2 * active[None, None, :], axis=2) + np.sum(np.abs(V) ** 2, axis=2)


@dataclass
class RealizationState:
    """D-independent per-realization quantities shared by UL and DL evaluation."""

    H: np.ndarray  # (L, K, M)
    Hhat: np.ndarray  # (L, K, M)
    V: np.ndarray  # (L, K, M)
    VH: np.ndarray  # (L, K, K) v_{l,k}^H h_{l,i}
    VHhat: np.ndarray  # (L, K, K) v_{l,k}^H hhat_{l,i}
    vnorm2: np.ndarray  # (L, K)


def realization_state(H, pilots, assoc, stats, snr, nu, rng) -> RealizationState:
    Hhat = estimate_channels(H, pilots, assoc, stats, snr, rng)
    V = lmmse_vectors(Hhat, nu, snr)
    return RealizationState(
        H=H,
        Hhat=Hhat,
        V=V,
        VH=inner_products(V, H),
        VHhat=inner_products(V, Hhat),
        vnorm2=np.sum(np.abs(V) ** 2, axis=2),
    )


def observation_variance(
    assoc: Association,
    stats: ChannelStats,
    pilots: PilotAssignment,
    snr: float,
    n_mc: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Monte Carlo sigma^2_{l,k} = E|r_{l,k}|^2 with symbols and noise averaged analytically."""
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    active = pilots.pilots >= 0
    nu = noise_plus_oci_variance(assoc, stats, snr, active)
    acc = np.zeros(assoc.mask.shape)
    for _ in range(n_mc):
        H = sample_channel(stats, rng)
        Hhat = estimate_channels(H, pilots, assoc, stats, snr, rng)
        V = lmmse_vectors(Hhat, nu, snr)
        acc += observation_power(V, H, snr, active)
    return np.where(assoc.mask, acc / n_mc, 0.0)


def padded_clusters(assoc: Association, c_max: int | None = None):
    """Cluster RU indices padded to a common width: (idx, valid), both (K, C)."""
    sizes = assoc.mask.sum(axis=0)
    C = int(max(int(sizes.max(initial=0)), 1) if c_max is None else max(c_max, int(sizes.max(initial=0)), 1))
    K = assoc.K
    idx = np.zeros((K, C), dtype=int)
    valid = np.zeros((K, C), dtype=bool)
    for k in range(K):
        c = assoc.cluster(k)
        idx[k, : len(c)] = c
        valid[k, : len(c)] = True
    return idx, valid


@dataclass
class ClusterCombining:
    """Padded per-UE cluster quantities; padded entries carry a = 0, w = 0."""

    idx: np.ndarray  # (K, C) RU index
    valid: np.ndarray  # (K, C)
    alpha: np.ndarray  # (K, C) quantization gain per cluster link
    err_var: np.ndarray  # (K, C)
    a: np.ndarray  # (K, C)
    G: np.ndarray  # (K, C, K) column k of row k is zero
    Gamma: np.ndarray  # (K, C, C)
    w: np.ndarray  # (K, C)


def cluster_combining(
    state: RealizationState,
    eff: Association,
    alpha: np.ndarray,
    err_var: np.ndarray,
    nu: np.ndarray,
    snr: float,
    padding=None,
) -> ClusterCombining:
    """Nominal-SINR-optimal cluster weights w_k = Gamma_k^{-1} a_k for every UE.

    ``alpha`` and ``err_var`` are (L, K). Pass alpha = 1, err_var = 0 for the
    unquantized weights used by the downlink precoders.
    """
    idx, valid = padding if padding is not None else padded_clusters(eff)
    K, C = idx.shape
    kk = np.arange(K)[:, None]
    al = np.where(valid, alpha[idx, kk], 0.0)
    ev = np.where(valid, err_var[idx, kk], 0.0)
    rows = state.VHhat[idx, kk, :]  # (K, C, K)
    a = al * rows[np.arange(K), :, np.arange(K)] * valid
    G = al[..., None] * rows * valid[..., None]
    G[np.arange(K), :, np.arange(K)] = 0.0
    d = al**2 * state.vnorm2[idx, kk] * nu[idx]
    diag = np.where(valid, d + ev, 1.0)
    diag = np.where(diag > 0, diag, 1.0)
    Gamma = snr * G @ G.conj().swapaxes(1, 2)
    Gamma = Gamma + diag[..., None] * np.eye(C)
    w = np.linalg.solve(Gamma, a[..., None])[..., 0]
    return ClusterCombining(idx=idx, valid=valid, alpha=al, err_var=ev, a=a, G=G, Gamma=Gamma, w=w)


def nominal_sinr(cc: ClusterCombining, snr: float, w=None) -> np.ndarray:
    """SNR |w^H a|^2 / (w^H Gamma w) per UE; 0 where w is zero."""
    w = cc.w if w is None else w
    num = snr * np.abs(np.einsum("kc,kc->k", w.conj(), cc.a)) ** 2
    den = np.real(np.einsum("kc,kcd,kd->k", w.conj(), cc.Gamma, w))
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def actual_sinr_ul(state: RealizationState, cc: ClusterCombining, snr: float, active: np.ndarray, w=None) -> np.ndarray:
    """Actual UL SINR per UE given the true channels of the realization.

    Interference is summed over every other transmitting UE. A zero
    denominator (all-zero weights) gives SINR 0.
    """
    w = cc.w if w is None else w
    K = w.shape[0]
    kk = np.arange(K)[:, None]
    rows = state.VH[cc.idx, kk, :]  # (K, C, K)
    coef = w.conj() * cc.alpha * cc.valid
    s = np.einsum("kc,kci->ki", coef, rows)
    sig = snr * np.abs(s[np.arange(K), np.arange(K)]) ** 2
    p = np.abs(s) ** 2 * active[None, :]
    p[np.arange(K), np.arange(K)] = 0.0
    interf = snr * p.sum(axis=1)
    vn = state.vnorm2[cc.idx, kk]
    noise = np.sum(np.abs(w) ** 2 * (cc.alpha**2 * vn + cc.err_var) * cc.valid, axis=1)
    den = noise + interf
    return np.where(den > 0, sig / np.where(den > 0, den, 1.0), 0.0)


def oer(sinr_samples) -> np.ndarray:
    """Optimistic ergodic rate: mean over realizations (axis 0) of log2(1 + SINR)."""
    s = np.asarray(sinr_samples, dtype=float)
    if s.shape[0] < 1:
        raise ValueError("need at least one realization")
    return np.mean(np.log2(1.0 + s), axis=0)


oer_ul = oer
