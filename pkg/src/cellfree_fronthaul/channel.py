"""Large-scale fading (3GPP TR 38.901 UMi street canyon) and one-ring channels.

Array conventions used throughout the package: link-indexed arrays have
shape (L, K) with ``[l, k]`` = RU l, UE k; channel blocks have shape
(L, K, M).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .topology import NetworkTopology, torus_displacement

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class LsfcModel:
    carrier_freq: float = 3.5  # GHz
    h_bs: float = 10.0
    h_ut: float = 1.5
    shadow_std_los: float = 4.0
    shadow_std_nlos: float = 7.82

    def __post_init__(self):
        if self.carrier_freq <= 0 or self.h_bs <= 0 or self.h_ut <= 0:
            raise ValueError("carrier frequency and antenna heights must be positive")
        if self.shadow_std_los < 0 or self.shadow_std_nlos < 0:
            raise ValueError("shadowing standard deviations must be >= 0")


@dataclass
class ChannelStats:
    beta: np.ndarray  # (L, K) linear gain
    los: np.ndarray  # (L, K) bool
    theta: np.ndarray  # (L, K) radians in [0, 2*pi)
    support: np.ndarray  # (L, K, M) bool, angular support S_{l,k}
    M: int

    @property
    def L(self) -> int:
        return self.beta.shape[0]

    @property
    def K(self) -> int:
        return self.beta.shape[1]

    def support_set(self, l: int, k: int) -> set[int]:
        return set(np.flatnonzero(self.support[l, k]).tolist())


def los_probability(d2d):
    """UMi street-canyon LOS probability (TR 38.901 Table 7.4.2-1)."""
    d = np.asarray(d2d, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        far = 18.0 / d + np.exp(-d / 36.0) * (1.0 - 18.0 / d)
    p = np.where(d <= 18.0, 1.0, far)
    return float(p) if p.ndim == 0 else p


def breakpoint_distance(model: LsfcModel) -> float:
    """Effective breakpoint distance d'_BP, with 1 m effective environment height."""
    return 4.0 * (model.h_bs - 1.0) * (model.h_ut - 1.0) * model.carrier_freq * 1e9 / SPEED_OF_LIGHT


def pathloss_db(d2d, los, model: LsfcModel = LsfcModel()):
    """Deterministic UMi street-canyon pathloss in dB (TR 38.901 Table 7.4.1-1).

    Distances below 1 m are clamped to 1 m. ``los`` may be a bool or an array
    broadcastable against ``d2d``.
    """
    d2 = np.maximum(np.asarray(d2d, dtype=float), 1.0)
    d3 = np.sqrt(d2**2 + (model.h_bs - model.h_ut) ** 2)
    fc = model.carrier_freq
    dbp = breakpoint_distance(model)
    pl1 = 32.4 + 21.0 * np.log10(d3) + 20.0 * math.log10(fc)
    pl2 = (
        32.4
        + 40.0 * np.log10(d3)
        + 20.0 * math.log10(fc)
        - 9.5 * math.log10(dbp**2 + (model.h_bs - model.h_ut) ** 2)
    )
    pl_los = np.where(d2 <= dbp, pl1, pl2)
    pl_nlos_prime = 35.3 * np.log10(d3) + 22.4 + 21.3 * math.log10(fc) - 0.3 * (model.h_ut - 1.5)
    pl_nlos = np.maximum(pl_los, pl_nlos_prime)
    out = np.where(np.asarray(los, dtype=bool), pl_los, pl_nlos)
    return float(out) if out.ndim == 0 else out


def angular_support(theta: float, delta: float, M: int) -> set[int]:
    """DFT indices m whose angle 2*pi*m/M lies within delta/2 of theta (mod 2*pi).

    Falls back to the single nearest index when no grid angle is inside.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if not (0 < delta <= 2 * math.pi):
        raise ValueError("delta must be in (0, 2*pi]")
    grid = 2 * np.pi * np.arange(M) / M
    diff = np.abs((grid - theta + np.pi) % (2 * np.pi) - np.pi)
    inside = np.flatnonzero(diff <= delta / 2 + 1e-12)
    if inside.size == 0:
        inside = np.array([int(np.argmin(diff))])
    return set(inside.tolist())


def support_mask(theta: np.ndarray, delta: float, M: int) -> np.ndarray:
    """Vectorised :func:`angular_support` returning a boolean (..., M) mask."""
    grid = 2 * np.pi * np.arange(M) / M
    diff = np.abs((grid - theta[..., None] + np.pi) % (2 * np.pi) - np.pi)
    mask = diff <= delta / 2 + 1e-12
    empty = ~mask.any(axis=-1)
    if empty.any():
        nearest = np.argmin(diff, axis=-1)
        idx = np.nonzero(empty)
        mask[idx + (nearest[idx],)] = True
    return mask


def link_geometry(topo: NetworkTopology) -> tuple[np.ndarray, np.ndarray]:
    """Torus distances and LOS angles, both (L, K)."""
    disp = torus_displacement(topo.ru_array(), topo.ue_array(), topo.area_side)
    d2d = np.linalg.norm(disp, axis=-1)
    theta = np.arctan2(disp[..., 1], disp[..., 0]) % (2 * np.pi)
    return d2d, theta


def sample_lsfc(
    topo: NetworkTopology,
    model: LsfcModel,
    rng: np.random.Generator,
    M: int,
    delta: float,
) -> ChannelStats:
    d2d, theta = link_geometry(topo)
    los = rng.random(d2d.shape) < los_probability(d2d)
    std = np.where(los, model.shadow_std_los, model.shadow_std_nlos)
    shadow = rng.standard_normal(d2d.shape) * std
    beta_db = -pathloss_db(d2d, los, model) + shadow
    beta = 10.0 ** (beta_db / 10.0)
    return ChannelStats(beta=beta, los=los, theta=theta, support=support_mask(theta, delta, M), M=M)


def dft_matrix(M: int) -> np.ndarray:
    """Unitary M-point DFT matrix; column m is the steering vector of angle 2*pi*m/M."""
    n = np.arange(M)
    return np.exp(2j * np.pi * np.outer(n, n) / M) / math.sqrt(M)


def crandn(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def sample_channel(stats: ChannelStats, rng: np.random.Generator) -> np.ndarray:
    """One small-scale fading draw h_{l,k} = sqrt(beta M / |S|) F_S nu, shape (L, K, M)."""
    M = stats.M
    F = dft_matrix(M)
    nsup = stats.support.sum(axis=-1)
    if np.any(nsup == 0):
        raise ValueError("every link needs a nonempty angular support")
    scale = np.sqrt(stats.beta * M / nsup)
    nu = crandn(rng, stats.support.shape) * stats.support
    return (scale[..., None] * nu) @ F.T


def mean_lsfc_at(d2d: float, model: LsfcModel, mode: str = "weighted") -> float:
    """Shadowing-free average gain at distance d2d.

    ``mode`` is "weighted" (LOS-probability mix), "los" or "nlos".
    """
    b_los = 10.0 ** (-pathloss_db(d2d, True, model) / 10.0)
    b_nlos = 10.0 ** (-pathloss_db(d2d, False, model) / 10.0)
    if mode == "los":
        return b_los
    if mode == "nlos":
        return b_nlos
    if mode != "weighted":
        raise ValueError(f"unknown beta_bar mode {mode!r}")
    p = los_probability(d2d)
    return p * b_los + (1.0 - p) * b_nlos


def reference_distance(area: float, L: int) -> float:
    """Radius d_L of a disk of area A / L."""
    return math.sqrt(area / (math.pi * L))


def calibrate_snr(topo: NetworkTopology, model: LsfcModel, M: int, mode: str = "weighted") -> float:
    """SNR such that beta_bar * M * SNR = 1, with beta_bar taken at 2.5 d_L."""
    d = 2.5 * reference_distance(topo.area_side**2, topo.num_rus)
    return 1.0 / (mean_lsfc_at(d, model, mode) * M)
