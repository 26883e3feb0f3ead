"""Downlink precoding by UL-DL reciprocity, DL SINR and ergodic rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .association import Association
from .uplink import ClusterCombining, RealizationState, cluster_combining, oer

oer_dl = oer


@dataclass
class Precoders:
    u: np.ndarray  # (K, L, M), unit norm per served UE, zero blocks outside the cluster
    q: np.ndarray  # (K,) power per UE


def unquantized_combining(state: RealizationState, eff: Association, nu: np.ndarray, snr: float, padding=None):
    """Cluster weights w0 with alpha = 1 and zero quantization error on the effective clusters."""
    ones = eff.mask.astype(float)
    return cluster_combining(state, eff, ones, np.zeros_like(ones), nu, snr, padding)


def build_precoders(state: RealizationState, eff: Association, nu: np.ndarray, snr: float) -> Precoders:
    """Stack blocks w0_{l,k} v_{l,k} over the effective cluster and normalise.

    UEs with an empty cluster, or an all-zero stacked vector, get u = 0, q = 0.
    """
    cc = unquantized_combining(state, eff, nu, snr)
    K, C = cc.w.shape
    L, _, M = state.V.shape
    u = np.zeros((K, L, M), dtype=complex)
    for k in range(K):
        for c in range(C):
            if cc.valid[k, c]:
                l = cc.idx[k, c]
                u[k, l] = cc.w[k, c] * state.V[l, k]
    norms = np.linalg.norm(u.reshape(K, -1), axis=1)
    ok = norms > 0
    u[ok] /= norms[ok, None, None]
    return Precoders(u=u, q=ok.astype(float))


def dl_sinr(H: np.ndarray, prec: Precoders, snr: float) -> np.ndarray:
    """|h_k^H u_k|^2 q_k / (1/SNR + sum_{j != k} |h_k^H u_j|^2 q_j) for every UE."""
    K = prec.u.shape[0]
    # T[k, j] = h_k^H u_j
    T = np.einsum("lkm,jlm->kj", H.conj(), prec.u)
    return _sinr_from_gains(T, prec.q, snr)


def _sinr_from_gains(T: np.ndarray, q: np.ndarray, snr: float) -> np.ndarray:
    K = T.shape[0]
    P = np.abs(T) ** 2 * q[None, :]
    sig = P[np.arange(K), np.arange(K)].copy()
    P[np.arange(K), np.arange(K)] = 0.0
    return sig / (1.0 / snr + P.sum(axis=1))


def dl_sinr_fast(state: RealizationState, cc0: ClusterCombining, snr: float) -> np.ndarray:
    """Same result as :func:`dl_sinr` with :func:`build_precoders`, from cached
    inner products h_{l,k}^H v_{l,j} instead of explicit precoding vectors."""
    K, C = cc0.w.shape
    jj = np.arange(K)[:, None]
    vn = state.vnorm2[cc0.idx, jj] * cc0.valid
    norm2 = np.sum(np.abs(cc0.w) ** 2 * vn, axis=1)
    ok = norm2 > 0
    coef = np.where(cc0.valid, cc0.w, 0.0) / np.sqrt(np.where(ok, norm2, 1.0))[:, None]
    rows = state.VH[cc0.idx, jj, :]  # (K_j, C, K_k): v_{l,j}^H h_{l,k}
    T = np.einsum("jc,jck->kj", coef, rows.conj())
    return _sinr_from_gains(T, ok.astype(float), snr)
