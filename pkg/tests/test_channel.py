import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cellfree_fronthaul.channel import (
    ChannelStats,
    LsfcModel,
    angular_support,
    calibrate_snr,
    dft_matrix,
    los_probability,
    mean_lsfc_at,
    pathloss_db,
    reference_distance,
    sample_channel,
    sample_lsfc,
    support_mask,
)
from cellfree_fronthaul.topology import NetworkTopology, Position, build_grid_topology


def test_los_probability_values():
    assert los_probability(10.0) == 1.0
    assert los_probability(36.0) == pytest.approx(0.5 + 0.5 * math.exp(-1), abs=1e-12)
    assert los_probability(36.0) == pytest.approx(0.6839, abs=1e-4)
    # continuous at the 18 m boundary
    assert los_probability(18.0 + 1e-9) == pytest.approx(1.0, abs=1e-9)


def test_los_probability_decreasing_to_zero():
    d = np.linspace(18.0, 5000.0, 2000)
    p = los_probability(d)
    assert np.all(np.diff(p) <= 1e-15)
    assert np.all((p >= 0) & (p <= 1))
    assert los_probability(1e6) < 1e-4


def test_pathloss_reference_values():
    # d3D = sqrt(25^2 + 8.5^2) = 26.405; PL1 = 32.4 + 21 log10(d3D) + 20 log10(3.5)
    d3 = math.sqrt(25**2 + 8.5**2)
    pl_los = 32.4 + 21 * math.log10(d3) + 20 * math.log10(3.5)
    pl_nlos = 35.3 * math.log10(d3) + 22.4 + 21.3 * math.log10(3.5)
    assert pathloss_db(25.0, True) == pytest.approx(pl_los, abs=1e-12)
    assert pathloss_db(25.0, True) == pytest.approx(73.14, abs=0.01)
    assert pathloss_db(25.0, False) == pytest.approx(pl_nlos, abs=1e-12)
    assert pathloss_db(25.0, False) == pytest.approx(84.17, abs=0.01)


def test_pathloss_beyond_breakpoint():
    m = LsfcModel()
    dbp = 4 * 9 * 0.5 * 3.5e9 / 299_792_458.0
    d = 500.0
    d3 = math.sqrt(d**2 + 8.5**2)
    pl2 = 32.4 + 40 * math.log10(d3) + 20 * math.log10(3.5) - 9.5 * math.log10(dbp**2 + 8.5**2)
    assert pathloss_db(d, True, m) == pytest.approx(pl2, abs=1e-12)


def test_pathloss_monotone_and_nlos_above_los():
    d = np.linspace(1.0, 1000.0, 5000)
    los = pathloss_db(d, True)
    nlos = pathloss_db(d, False)
    assert np.all(np.diff(los) >= -1e-12)
    assert np.all(np.diff(nlos) >= -1e-12)
    assert np.all(nlos >= los)


def test_angular_support_examples():
    assert angular_support(0.0, math.pi / 8, 10) == {0}
    assert angular_support(0.3, 2 * math.pi, 10) == set(range(10))
    assert angular_support(math.pi, math.pi / 8, 10) == {5}
    # no grid angle inside: nearest index
    assert angular_support(0.3, math.pi / 8, 10) == {0}
    assert angular_support(2 * math.pi - 0.01, math.pi / 8, 10) == {0}
    with pytest.raises(ValueError):
        angular_support(0.0, 0.0, 10)


@given(st.floats(0, 2 * math.pi - 1e-9), st.floats(0.05, 2 * math.pi))
def test_support_mask_matches_scalar(theta, delta):
    mask = support_mask(np.array([theta]), delta, 10)[0]
    assert set(np.flatnonzero(mask).tolist()) == angular_support(theta, delta, 10)


def _close_topology():
    # single RU with UEs within 18 m: LOS with probability one
    return NetworkTopology(
        area_side=200.0,
        ru_positions=[Position(100, 100)],
        ue_positions=[Position(110, 100), Position(100, 112)],
        num_routers=1,
        num_dus=1,
        ru_router_edges=[(0, 0)],
        router_router_edges=[],
        router_du_edges=[(0, 0)],
    )


def test_lsfc_without_shadowing_is_deterministic_pathloss():
    topo = _close_topology()
    model = LsfcModel(shadow_std_los=0.0, shadow_std_nlos=0.0)
    stats = sample_lsfc(topo, model, np.random.default_rng(0), 10, math.pi / 8)
    assert stats.los.all()
    expected = 10 ** (-pathloss_db(np.array([[10.0, 12.0]]), True, model) / 10)
    assert np.array_equal(stats.beta, expected)
    assert stats.theta[0, 0] == pytest.approx(0.0)
    assert stats.theta[0, 1] == pytest.approx(math.pi / 2)


def test_lsfc_shadowing_mean():
    topo = _close_topology()
    model = LsfcModel()
    rng = np.random.default_rng(5)
    draws = np.array([sample_lsfc(topo, model, rng, 10, math.pi / 8).beta[0, 0] for _ in range(10_000)])
    mean_db = np.mean(10 * np.log10(draws))
    assert abs(mean_db + pathloss_db(10.0, True, model)) < 3 * 4.0 / 100


def test_lsfc_seed_determinism():
    topo = build_grid_topology(20, 30, 5, 4, 200.0, rng_seed=1)
    a = sample_lsfc(topo, LsfcModel(), np.random.default_rng(9), 10, math.pi / 8)
    b = sample_lsfc(topo, LsfcModel(), np.random.default_rng(9), 10, math.pi / 8)
    assert np.array_equal(a.beta, b.beta)
    assert np.array_equal(a.support, b.support)


def _stats(beta, support):
    beta = np.atleast_2d(beta)
    L, K = beta.shape
    return ChannelStats(beta=beta, los=np.ones((L, K), bool), theta=np.zeros((L, K)), support=support, M=support.shape[-1])


def test_dft_unitary():
    F = dft_matrix(10)
    assert np.allclose(F.conj().T @ F, np.eye(10), atol=1e-12)


def test_channel_rank_one_and_in_span():
    M = 10
    sup = np.zeros((1, 2, M), bool)
    sup[0, 0, 3] = True
    sup[0, 1, [3, 4]] = True
    stats = _stats(np.array([[2.0, 0.5]]), sup)
    F = dft_matrix(M)
    rng = np.random.default_rng(0)
    for _ in range(20):
        H = sample_channel(stats, rng)
        for k in range(2):
            Fs = F[:, sup[0, k]]
            resid = H[0, k] - Fs @ (Fs.conj().T @ H[0, k])
            assert np.linalg.norm(resid) < 1e-10 * max(1.0, np.linalg.norm(H[0, k]))
        # rank-one link is co-linear with DFT column 3
        h = H[0, 0]
        assert abs(abs(np.vdot(F[:, 3], h)) - np.linalg.norm(h)) < 1e-10


def test_channel_power_and_covariance():
    M = 10
    sup = np.zeros((1, 1, M), bool)
    sup[0, 0, [2, 3]] = True
    beta = 0.7
    stats = _stats(np.array([[beta]]), sup)
    rng = np.random.default_rng(1)
    n = 100_000
    H = np.stack([sample_channel(stats, rng)[0, 0] for _ in range(n)])
    assert np.mean(np.sum(np.abs(H) ** 2, axis=1)) / (M * beta) == pytest.approx(1.0, rel=0.05)
    F = dft_matrix(M)[:, [2, 3]]
    R = beta * M / 2 * F @ F.conj().T
    Rhat = H.T @ H.conj() / n
    big = np.abs(R) > 1e-9
    assert np.all(np.abs(Rhat[big] - R[big]) <= 0.03 * np.abs(R[big]))


def test_snr_calibration():
    assert reference_distance(40_000.0, 20) == pytest.approx(25.231, abs=1e-3)
    assert 2.5 * reference_distance(40_000.0, 20) == pytest.approx(63.08, abs=1e-2)
    topo = build_grid_topology(20, 5, 5, 4, 200.0)
    model = LsfcModel()
    d = 2.5 * reference_distance(40_000.0, 20)
    bbar = mean_lsfc_at(d, model)
    snr = calibrate_snr(topo, model, 10)
    assert bbar * 10 * snr == pytest.approx(1.0, rel=1e-12)
    assert calibrate_snr(topo, model, 1) == pytest.approx(10 * snr, rel=1e-12)
    p = los_probability(d)
    assert bbar == pytest.approx(p * 10 ** (-pathloss_db(d, True) / 10) + (1 - p) * 10 ** (-pathloss_db(d, False) / 10))
