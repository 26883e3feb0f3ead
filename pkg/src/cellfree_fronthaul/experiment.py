"""Distortion sweeps: PHY spectral efficiency and optimised fronthaul load versus D."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .association import Association, PilotAssignment, assign_pilots, form_clusters
from .channel import ChannelStats, LsfcModel, calibrate_snr, sample_channel, sample_lsfc
from .downlink import dl_sinr_fast, unquantized_combining
from .flows import (
    FULL,
    HALF,
    FlowInfeasibleError,
    FlowProblemInput,
    FlowSolution,
    FlowWeights,
    build_model,
    dump_instance,
    fronthaul_capacities,
    solve_flow,
)
from .milp import NodeLimitError, export_mps
from .quantization import QuantProfile, prune_clusters, quant_profile
from .topology import NetworkTopology, build_grid_topology
from .uplink import (
    actual_sinr_ul,
    cluster_combining,
    noise_plus_oci_variance,
    observation_variance,
    padded_clusters,
    realization_state,
)

log = logging.getLogger(__name__)

CSV_HEADER = [
    "d_ratio",
    "d",
    "se_ul",
    "se_dl",
    "se_tot",
    "fh_ul",
    "fh_dl",
    "fh_tot",
    "objective",
    "duplex",
    "n_pruned_links",
    "runtime_s",
]

# independent random streams per network drop
STREAM_TOPOLOGY, STREAM_LSFC, STREAM_SIGMA, STREAM_FADING = range(4)


def default_d_ratios() -> list[float]:
    return [float(v) for v in np.geomspace(0.04, 4.0, 9)]


@dataclass
class ExperimentConfig:
    L: int = 20
    K: int = 70
    Q: int = 5
    N: int = 4
    M: int = 10
    area_side: float = 200.0
    delta: float = math.pi / 8
    tau_p: int = 20
    c_max: int = 7
    eta: float = 1.0
    epsilon: float = 0.1
    T: int = 200
    alpha_dl: float = 0.5
    d_ratios: list = field(default_factory=default_d_ratios)
    n_realizations: int = 100
    n_mc_sigma: int = 100
    seed: int = 0
    duplex: str = "both"
    backend: str = "auto"
    node_limit: int = 1_000_000
    time_limit: Optional[float] = None
    accept_incumbent: bool = False
    deg_rq: int = 2
    deg_qn: int = 2
    ru_grid: Optional[list] = None
    carrier_freq: float = 3.5
    h_bs: float = 10.0
    h_ut: float = 1.5
    shadow_std_los: float = 4.0
    shadow_std_nlos: float = 7.82
    beta_bar_mode: str = "weighted"
    weights_ul: list = field(default_factory=lambda: [1.0, 1.0, 1.0])
    weights_dl: list = field(default_factory=lambda: [1.0, 1.0, 1.0])
    weights_hd: list = field(default_factory=lambda: [1.0, 1.0, 1.0])
    du_capacity: Optional[list] = None

    def __post_init__(self):
        if self.tau_p < 1 or self.tau_p > self.T:
            raise ValueError("need 1 <= tau_p <= T")
        if not 0 < self.alpha_dl < 1:
            raise ValueError("alpha_dl must lie in (0, 1)")
        if not self.d_ratios or any(not r > 0 for r in self.d_ratios):
            raise ValueError("D ratios must be positive")
        if self.duplex not in ("full", "half", "both"):
            raise ValueError("duplex must be full, half or both")
        if self.n_realizations < 1 or self.n_mc_sigma < 1:
            raise ValueError("need at least one realization")
        if self.ru_grid is None and self.L == 20:
            self.ru_grid = [5, 4]

    @property
    def lsfc_model(self) -> LsfcModel:
        return LsfcModel(self.carrier_freq, self.h_bs, self.h_ut, self.shadow_std_los, self.shadow_std_nlos)

    @property
    def weights(self) -> FlowWeights:
        return FlowWeights(tuple(self.weights_ul), tuple(self.weights_dl), tuple(self.weights_hd))

    @property
    def duplex_modes(self) -> list[str]:
        return [FULL, HALF] if self.duplex == "both" else [self.duplex]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class SweepRow:
    d_ratio: float
    d: float
    se_ul: float
    se_dl: float
    se_tot: float
    fh_ul: float
    fh_dl: float
    fh_tot: float
    objective: float
    duplex: str
    n_pruned_links: int
    runtime_s: float = 0.0


@dataclass
class PhyPoint:
    """PHY outcome at one distortion level."""

    d_ratio: float
    D: float
    profile: QuantProfile
    eff: Association
    R_ul: np.ndarray  # (K,)
    R_dl: np.ndarray  # (K,)

    @property
    def n_pruned(self) -> int:
        return int(np.sum(self.profile.pruned & (self.profile.sigma2 > 0)))


@dataclass
class PhyResult:
    topology: NetworkTopology
    stats: ChannelStats
    snr: float
    assoc: Association
    pilots: PilotAssignment
    sigma2: np.ndarray
    sigma2_min: float
    points: list  # PhyPoint per D ratio, in grid order


@dataclass
class PointResult:
    phy: PhyPoint
    flow_input: FlowProblemInput
    solutions: dict  # duplex -> FlowSolution or None
    metrics: dict  # duplex -> fronthaul_capacities dict
    errors: dict  # duplex -> message


def compute_se(rates_ul, rates_dl, alpha_dl: float, tau_p: int, T: int) -> tuple[float, float]:
    """Total UL and DL spectral efficiency in bit/s/Hz."""
    r_ul = np.asarray(rates_ul, dtype=float)
    r_dl = np.asarray(rates_dl, dtype=float)
    if np.any(r_ul < 0) or np.any(r_dl < 0):
        raise ValueError("rates must be nonnegative")
    frac = 1.0 - tau_p / T
    return float((1.0 - alpha_dl) * frac * r_ul.sum()), float(alpha_dl * frac * r_dl.sum())


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), stream]))


def build_network(cfg: ExperimentConfig, seed: int):
    """Topology, LSFCs, SNR, clusters and pilots of one network drop."""
    topo_seed = int(np.random.SeedSequence([int(seed), STREAM_TOPOLOGY]).generate_state(1)[0])
    topo = build_grid_topology(
        cfg.L,
        cfg.K,
        cfg.Q,
        cfg.N,
        cfg.area_side,
        deg_rq=cfg.deg_rq,
        deg_qn=cfg.deg_qn,
        rng_seed=topo_seed,
        ru_grid=tuple(cfg.ru_grid) if cfg.ru_grid else None,
        du_capacity=cfg.du_capacity,
    )
    model = cfg.lsfc_model
    stats = sample_lsfc(topo, model, _rng(seed, STREAM_LSFC), cfg.M, cfg.delta)
    snr = calibrate_snr(topo, model, cfg.M, cfg.beta_bar_mode)
    assoc = form_clusters(stats, snr, cfg.eta, cfg.c_max)
    pilots = assign_pilots(assoc, stats, cfg.tau_p, cfg.epsilon)
    return topo, stats, snr, assoc, pilots


def compute_phy(cfg: ExperimentConfig, seed: Optional[int] = None) -> PhyResult:
    """Network drop, observation variances and UL/DL ergodic rates for every D.

    All D points see the same fading realizations (common random numbers).
    The result does not depend on alpha_dl.
    """
    seed = cfg.seed if seed is None else seed
    topo, stats, snr, assoc, pilots = build_network(cfg, seed)
    active = pilots.pilots >= 0
    nu = noise_plus_oci_variance(assoc, stats, snr, active)
    sigma2 = observation_variance(assoc, stats, pilots, snr, cfg.n_mc_sigma, _rng(seed, STREAM_SIGMA))
    sigma2_min = float(sigma2[assoc.mask].min()) if assoc.mask.any() else math.nan

    profiles, effs, pads = [], [], []
    for r in cfg.d_ratios:
        D = float(r) * sigma2_min
        prof = quant_profile(sigma2, D, assoc)
        eff = prune_clusters(assoc, prof)
        profiles.append(prof)
        effs.append(eff)
        pads.append(padded_clusters(eff))
    # DL weights only depend on the effective clusters
    dl_groups: dict[bytes, list[int]] = {}
    for i, eff in enumerate(effs):
        dl_groups.setdefault(eff.mask.tobytes(), []).append(i)

    K = cfg.K
    acc_ul = np.zeros((len(effs), K))
    acc_dl = np.zeros((len(effs), K))
    rng = _rng(seed, STREAM_FADING)
    for _ in range(cfg.n_realizations):
        H = sample_channel(stats, rng)
        state = realization_state(H, pilots, assoc, stats, snr, nu, rng)
        for i, (prof, eff) in enumerate(zip(profiles, effs)):
            cc = cluster_combining(state, eff, prof.alpha, prof.err_var, nu, snr, pads[i])
            acc_ul[i] += np.log2(1.0 + actual_sinr_ul(state, cc, snr, active))
        for members in dl_groups.values():
            i0 = members[0]
            cc0 = unquantized_combining(state, effs[i0], nu, snr, pads[i0])
            rate = np.log2(1.0 + dl_sinr_fast(state, cc0, snr))
            for i in members:
                acc_dl[i] += rate
    points = [
        PhyPoint(float(r), prof.D, prof, eff, acc_ul[i] / cfg.n_realizations, acc_dl[i] / cfg.n_realizations)
        for i, (r, prof, eff) in enumerate(zip(cfg.d_ratios, profiles, effs))
    ]
    return PhyResult(topo, stats, snr, assoc, pilots, sigma2, sigma2_min, points)


def flow_input(cfg: ExperimentConfig, phy: PhyResult, point: PhyPoint, alpha_dl: Optional[float] = None) -> FlowProblemInput:
    eff = point.eff
    return FlowProblemInput(
        topology=phy.topology,
        assoc=eff,
        B=np.where(eff.mask, point.profile.B, 0.0),
        R_dl=np.where(eff.served_ues, point.R_dl, 0.0),
        alpha_dl=cfg.alpha_dl if alpha_dl is None else alpha_dl,
        weights=cfg.weights,
        du_capacity=cfg.du_capacity,
    )


def solve_point(
    cfg: ExperimentConfig,
    phy: PhyResult,
    point: PhyPoint,
    alpha_dl: Optional[float] = None,
    hints: Optional[dict] = None,
) -> PointResult:
    """Solve the placement MILPs of one D point.

    ``hints`` maps duplex mode to a placement tried when a node-limited solve
    returns only an incumbent.
    """
    inp = flow_input(cfg, phy, point, alpha_dl)
    hints = hints or {}
    sols, mets, errs = {}, {}, {}
    for mode in cfg.duplex_modes:
        try:
            fs = solve_flow(
                inp,
                mode,
                backend=cfg.backend,
                node_limit=cfg.node_limit,
                time_limit=cfg.time_limit,
                accept_incumbent=cfg.accept_incumbent,
                placement_hint=hints.get(mode),
            )
            sols[mode] = fs
            mets[mode] = fronthaul_capacities(fs, inp)
            if not fs.info.get("proven_optimal", True):
                log.info(
                    "D ratio %g, %s duplex: node limit reached, objective %.6g, lower bound %.6g",
                    point.d_ratio,
                    mode,
                    fs.objective,
                    fs.info["lower_bound"],
                )
        except (NodeLimitError, FlowInfeasibleError, RuntimeError) as exc:
            log.warning("D ratio %g, %s duplex: %s", point.d_ratio, mode, exc)
            sols[mode] = None
            errs[mode] = str(exc)
            if isinstance(exc, NodeLimitError):
                errs[mode] += f" (lower bound {exc.lower_bound:.6g})"
    return PointResult(point, inp, sols, mets, errs)


def _rows_for(cfg: ExperimentConfig, pr: PointResult, alpha_dl: float, runtime: float) -> list[SweepRow]:
    se_ul, se_dl = compute_se(pr.phy.R_ul, pr.phy.R_dl, alpha_dl, cfg.tau_p, cfg.T)
    rows = []
    for mode in cfg.duplex_modes:
        fs: Optional[FlowSolution] = pr.solutions.get(mode)
        met = pr.metrics.get(mode)
        nan = math.nan
        rows.append(
            SweepRow(
                d_ratio=pr.phy.d_ratio,
                d=pr.phy.D,
                se_ul=se_ul,
                se_dl=se_dl,
                se_tot=se_ul + se_dl,
                fh_ul=met["fh_ul"] if met else nan,
                fh_dl=met["fh_dl"] if met else nan,
                fh_tot=met["fh_tot"] if met else nan,
                objective=fs.objective if fs else nan,
                duplex=mode,
                n_pruned_links=pr.phy.n_pruned,
                runtime_s=runtime,
            )
        )
    return rows


@dataclass
class SweepResult:
    config: ExperimentConfig
    phy: PhyResult
    points: list  # PointResult per D
    rows: list  # SweepRow


def run_sweep(
    cfg: ExperimentConfig,
    seed: Optional[int] = None,
    record_runtime: bool = False,
    phy: Optional[PhyResult] = None,
    alpha_dl: Optional[float] = None,
) -> SweepResult:
    """Full sweep with every intermediate result kept.

    ``phy`` may be passed to reuse one PHY computation across alpha_dl
    values. Placements found at one D point seed the next point's solve
    when the node limit is hit. With ``record_runtime`` off the runtime column is 0 so that
    repeated runs give identical CSV bytes.
    """
    alpha = cfg.alpha_dl if alpha_dl is None else alpha_dl
    t0 = time.perf_counter()
    if phy is None:
        phy = compute_phy(cfg, seed)
    phy_time = (time.perf_counter() - t0) / max(len(phy.points), 1)
    points, rows = [], []
    hints: dict = {}
    for p in phy.points:
        t1 = time.perf_counter()
        pr = solve_point(cfg, phy, p, alpha, hints)
        hints = {m: fs.b for m, fs in pr.solutions.items() if fs is not None}
        runtime = phy_time + time.perf_counter() - t1 if record_runtime else 0.0
        points.append(pr)
        rows.extend(_rows_for(cfg, pr, alpha, runtime))
    return SweepResult(cfg, phy, points, rows)


def run_distortion_sweep(cfg: ExperimentConfig, seed: Optional[int] = None, record_runtime: bool = False) -> list[SweepRow]:
    return run_sweep(cfg, seed, record_runtime).rows


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.6g" % v


def emit_csv(rows, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])


def write_artifacts(result: SweepResult, out_dir, export_mps_files: bool = False) -> None:
    """Per-point instance dumps and optional MPS files next to sweep.csv."""
    out = Path(out_dir)
    inst = out / "instances"
    inst.mkdir(parents=True, exist_ok=True)
    for i, pr in enumerate(result.points):
        (inst / f"point_{i:02d}.json").write_text(dump_instance(pr.flow_input))
        if export_mps_files:
            mps = out / "mps"
            mps.mkdir(exist_ok=True)
            for mode in result.config.duplex_modes:
                text = export_mps(build_model(pr.flow_input, mode), names="index")
                (mps / f"point_{i:02d}_{mode}.mps").write_text(text)
