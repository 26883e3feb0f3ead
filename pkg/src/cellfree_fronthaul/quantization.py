"""Rate-distortion fronthaul quantization model and a dithered scalar quantizer."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .association import Association


def quant_rate(sigma2, D):
    """Bits per complex sample, max(log2(sigma2 / D), 0). Not rounded."""
    if np.any(np.asarray(D) <= 0):
        raise ValueError("distortion D must be positive")
    s = np.asarray(sigma2, dtype=float)
    if np.any(s < 0):
        raise ValueError("sigma2 must be >= 0")
    with np.errstate(divide="ignore"):
        r = np.where(s > D, np.log2(np.where(s > 0, s, 1.0) / D), 0.0)
    return float(r) if r.ndim == 0 else r


def bussgang_params(sigma2, D):
    """Gain alpha = 1 - D / sigma2 and error variance (1 - D / sigma2) * D.

    Both are zero on links with sigma2 <= D (nothing is forwarded).
    """
    s = np.asarray(sigma2, dtype=float)
    keep = s > D
    ratio = np.where(keep, D / np.where(keep, s, 1.0), 1.0)
    alpha = np.where(keep, 1.0 - ratio, 0.0)
    err = np.where(keep, (1.0 - ratio) * D, 0.0)
    if alpha.ndim == 0:
        return float(alpha), float(err)
    return alpha, err


@dataclass
class QuantProfile:
    """Per-link quantization quantities, all (L, K); zero outside the association."""

    sigma2: np.ndarray
    D: float
    B: np.ndarray
    alpha: np.ndarray
    err_var: np.ndarray

    @property
    def pruned(self) -> np.ndarray:
        return self.B <= 0


def quant_profile(sigma2: np.ndarray, D: float, assoc: Association) -> QuantProfile:
    s = np.where(assoc.mask, sigma2, 0.0)
    B = np.where(assoc.mask, quant_rate(s, D), 0.0)
    alpha, err = bussgang_params(s, D)
    return QuantProfile(
        sigma2=s,
        D=float(D),
        B=B,
        alpha=np.where(assoc.mask, alpha, 0.0),
        err_var=np.where(assoc.mask, err, 0.0),
    )


def prune_clusters(assoc: Association, profile: QuantProfile) -> Association:
    """Drop every link quantized with zero bits."""
    return Association(assoc.mask & (profile.B > 0))


def dithered_scalar_quantize(samples, D: float, rng: np.random.Generator):
    """Subtractive-dither uniform quantization of a complex sequence.

    Each real dimension uses step sqrt(6 D) so the complex MSE is D. The
    returned rate is the sum of the plug-in entropies of the two per-dimension
    index streams (bits per complex sample). When D is at least the sample
    power the source is mapped to zero with rate 0.

    Returns (reconstruction, empirical_rate, empirical_mse).
    """
    x = np.asarray(samples, dtype=complex).ravel()
    if x.size == 0:
        raise ValueError("empty input")
    if D <= 0:
        raise ValueError("distortion D must be positive")
    power = float(np.mean(np.abs(x) ** 2))
    if D >= power:
        xh = np.zeros_like(x)
        return xh, 0.0, power
    step = math.sqrt(6.0 * D)
    rate = 0.0
    parts = []
    for comp in (x.real, x.imag):
        dither = rng.uniform(-step / 2, step / 2, size=comp.shape)
        idx = np.round((comp + dither) / step).astype(np.int64)
        parts.append(idx * step - dither)
        _, counts = np.unique(idx, return_counts=True)
        p = counts / counts.sum()
        rate += float(-(p * np.log2(p)).sum())
    xh = parts[0] + 1j * parts[1]
    mse = float(np.mean(np.abs(x - xh) ** 2))
    return xh, rate, mse
