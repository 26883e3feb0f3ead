import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellfree_fronthaul.association import (
    Association,
    PilotAssignment,
    assign_pilots,
    form_clusters,
    pilot_violations,
    subspace_overlap,
)
from cellfree_fronthaul.channel import ChannelStats


def _stats(beta, support=None, M=10):
    beta = np.asarray(beta, dtype=float)
    L, K = beta.shape
    if support is None:
        support = np.zeros((L, K, M), bool)
        support[..., 0] = True
    return ChannelStats(beta=beta, los=np.ones((L, K), bool), theta=np.zeros((L, K)), support=support, M=support.shape[-1])


def test_cluster_threshold_and_cap():
    # beta * M * snr with M = 10, snr = 1: 5, 0.5, 30, 20
    beta = np.array([[0.5], [0.05], [3.0], [2.0]])
    assoc = form_clusters(_stats(beta), snr=1.0, eta=1.0, c_max=2)
    assert assoc.cluster(0) == [2, 3]
    assoc = form_clusters(_stats(beta), snr=1.0, eta=1.0, c_max=7)
    assert assoc.cluster(0) == [0, 2, 3]


def test_cluster_ties_go_to_lower_index():
    beta = np.array([[1.0], [2.0], [2.0], [2.0]])
    assoc = form_clusters(_stats(beta), snr=1.0, eta=1.0, c_max=2)
    assert assoc.cluster(0) == [1, 2]


def test_unserved_ue_has_empty_cluster():
    beta = np.array([[1e-3, 1.0]])
    assoc = form_clusters(_stats(beta), snr=1.0, eta=1.0, c_max=3)
    assert assoc.cluster(0) == []
    assert assoc.served_ues.tolist() == [False, True]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 5), st.integers(0, 2**31))
def test_cluster_properties(L, K, c_max, seed):
    rng = np.random.default_rng(seed)
    beta = 10 ** rng.uniform(-3, 1, (L, K))
    stats = _stats(beta)
    assoc = form_clusters(stats, snr=1.0, eta=1.0, c_max=c_max)
    for k in range(K):
        cl = assoc.cluster(k)
        assert len(cl) <= c_max
        assert all(beta[l, k] * 10 >= 1.0 for l in cl)
        # every excluded eligible RU is no stronger than every member
        rest = [l for l in range(L) if l not in cl and beta[l, k] * 10 >= 1.0]
        if cl and rest:
            assert max(beta[rest, k]) <= min(beta[cl, k])


def test_association_views_are_consistent():
    assoc = Association.from_clusters([[0, 2], [1], []], L=3)
    assert assoc.served_sets == [[0], [1], [0]]
    assert Association.from_served_sets(assoc.served_sets, K=3).mask.tolist() == assoc.mask.tolist()
    with pytest.raises(ValueError):
        assoc.mask[0, 0] = False


def test_subspace_overlap_counts_shared_columns():
    assert subspace_overlap({1, 2, 3}, {3, 4}, 10) == 1.0
    assert subspace_overlap({1}, {2}, 10) == 0.0
    with pytest.raises(ValueError):
        subspace_overlap(set(), {1}, 10)


def test_pilots_reused_when_orthogonal():
    # one RU, two UEs with disjoint angular supports share pilot 0
    sup = np.zeros((1, 2, 10), bool)
    sup[0, 0, 1] = True
    sup[0, 1, 5] = True
    stats = _stats(np.array([[1.0, 0.5]]), sup)
    assoc = Association(np.ones((1, 2), bool))
    pa = assign_pilots(assoc, stats, tau_p=2)
    assert pa.pilots.tolist() == [0, 0]
    assert pa.fallback == []


def test_pilots_separated_when_overlapping():
    sup = np.zeros((1, 3, 10), bool)
    sup[0, :, 2] = True
    stats = _stats(np.array([[1.0, 3.0, 2.0]]), sup)
    assoc = Association(np.ones((1, 3), bool))
    pa = assign_pilots(assoc, stats, tau_p=3)
    # processing order by strongest LSFC: UE 1, UE 2, UE 0
    assert pa.pilots.tolist() == [2, 0, 1]
    assert pilot_violations(assoc, stats, pa, 0.1) == []


def test_pilot_fallback_when_exhausted():
    sup = np.zeros((1, 3, 10), bool)
    sup[0, :, 2] = True
    sup[0, 2, 3] = True
    stats = _stats(np.array([[3.0, 2.0, 1.0]]), sup)
    assoc = Association(np.ones((1, 3), bool))
    pa = assign_pilots(assoc, stats, tau_p=2)
    assert pa.pilots.tolist() == [0, 1, 0]
    assert pa.fallback == [2]
    assert pilot_violations(assoc, stats, pa, 0.1) == [(0, 0, 2)]


def test_unserved_ue_gets_no_pilot():
    stats = _stats(np.array([[1.0, 1.0]]))
    assoc = Association(np.array([[True, False]]))
    pa = assign_pilots(assoc, stats, tau_p=1)
    assert pa.pilots.tolist() == [0, -1]
    with pytest.raises(ValueError):
        assign_pilots(assoc, stats, tau_p=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 12), st.integers(1, 6), st.integers(0, 2**31))
def test_no_violation_without_fallback(L, K, tau, seed):
    rng = np.random.default_rng(seed)
    beta = 10 ** rng.uniform(-2, 1, (L, K))
    sup = rng.random((L, K, 10)) < 0.2
    sup[..., 0] |= ~sup.any(axis=-1)
    stats = _stats(beta, sup)
    assoc = form_clusters(stats, 1.0, 1.0, 3)
    pa = assign_pilots(assoc, stats, tau)
    assert isinstance(pa, PilotAssignment)
    assert np.all((pa.pilots >= 0) == assoc.served_ues)
    assert np.all(pa.pilots < tau)
    bad = pilot_violations(assoc, stats, pa, 0.1)
    involved = {k for _, a, b in bad for k in (a, b)}
    # every violating pair contains a UE that was flagged as a fallback
    assert all(a in pa.fallback or b in pa.fallback for _, a, b in bad)
    assert involved <= set(range(K))
