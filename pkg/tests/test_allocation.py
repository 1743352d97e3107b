import itertools

import numpy as np
import pytest

from keyshare_ofdm.allocation import (
    Allocation, allocate_dynamic, allocate_fixed, bob_metric, data_secured_otp,
    data_secured_wiretap, key_secured, select_alice_best, select_bob_greedy,
    select_bob_high_snr, slot_rates,
)
from keyshare_ofdm.channel import ChannelSet, draw_channels
from keyshare_ofdm.config import DEFAULT
from keyshare_ofdm.keyqueue import KeyQueueState


def _cs(ab_gain, n_a=1, ba=None, be=None, m=1, rng=None):
    """ChannelSet with prescribed ||h_AB||^2 per sub-channel."""
    n = len(ab_gain)
    rng = rng or np.random.default_rng(0)
    h_ab = np.zeros((n, n_a), complex)
    h_ab[:, 0] = np.sqrt(ab_gain)
    h_ba = np.ones((n, 1), complex) if ba is None else np.sqrt(np.asarray(ba, float))[:, None] + 0j
    h_ae = rng.standard_normal((m, n, n_a)) + 0j
    h_be = np.zeros((m, n, 1), complex) if be is None else np.sqrt(np.asarray(be, float)).reshape(m, n, 1) + 0j
    return ChannelSet(h_ab, h_ba, h_ae, h_be)


def test_allocation_disjoint():
    with pytest.raises(ValueError):
        Allocation((0, 1), (1, 2))
    a = Allocation.all_data(4)
    assert a.data_set == (0, 1, 2, 3) and not a.key_sharing


def test_alice_best_ties():
    cs = _cs([1, 5, 3, 5])
    assert select_alice_best(cs, 2) == (1, 3)
    assert select_alice_best(cs, 4) == (0, 1, 2, 3)
    flat = _cs([2, 2, 2, 2, 2])
    assert select_alice_best(flat, 3) == (0, 1, 2)
    with pytest.raises(ValueError):
        select_alice_best(cs, 0)


def test_bob_greedy_basics(rng):
    cfg = DEFAULT.replace(n_subchannels=8, n_cp=8, n_data_fixed=4)
    cs = draw_channels(cfg, rng)
    assert select_bob_greedy(cs, 0, cfg) == ()
    with pytest.raises(ValueError):
        select_bob_greedy(cs, 9, cfg)
    no_eve = cfg.replace(n_eves=0)
    cs0 = draw_channels(no_eve, rng)
    gba = np.sum(np.abs(cs0.h_ba) ** 2, axis=-1)
    expect = tuple(sorted(np.argsort(-gba, kind="stable")[:3]))
    assert select_bob_greedy(cs0, 3, no_eve) == expect


def test_bob_greedy_equals_sort_exhaustively(rng):
    cfg = DEFAULT.replace(n_subchannels=6, n_cp=6, n_taps=6, n_data_fixed=3)
    for _ in range(20):
        cs = draw_channels(cfg, rng)
        metric = bob_metric(cs, cfg)
        for n_key in range(7):
            best = max(itertools.combinations(range(6), n_key),
                       key=lambda s: (sorted(metric[list(s)], reverse=True), [-i for i in s]))
            assert select_bob_greedy(cs, n_key, cfg) == tuple(sorted(best))


def test_high_snr_agreement(rng):
    cfg = DEFAULT.replace(snr_bob=1e4)
    agree = total = 0
    for _ in range(100):
        cs = draw_channels(cfg, rng)
        a = set(select_bob_greedy(cs, 10, cfg))
        b = set(select_bob_high_snr(cs, 10))
        agree += len(a & b)
        total += 10
    assert agree / total >= 0.9
    assert select_bob_high_snr(cs, 0) == ()


def test_high_snr_dominance():
    be = np.ones(5)
    be[3] = 0.0
    cs = _cs(np.ones(5), be=be)
    assert select_bob_high_snr(cs, 1) == (3,)


def test_fixed_otp_branch_ignores_bob_quality():
    cfg = DEFAULT.replace(n_subchannels=8, n_cp=8, n_data_fixed=3, rate_data=0.05,
                          n_eves=1)
    ab = np.array([1, 9, 2, 8, 3, 7, 4, 0.5])
    ba = np.array([9, 0.1, 9, 0.1, 9, 0.1, 9, 9.0])
    cs = _cs(ab, ba=ba)
    a = allocate_fixed(cs, KeyQueueState(1, 1, 10), cfg)
    assert a.data_set == (1, 3, 5)
    assert a.key_set == (0, 2, 4, 6, 7)


def test_fixed_wiretap_branch_bob_first():
    cfg = DEFAULT.replace(n_subchannels=8, n_cp=8, n_data_fixed=5, rate_data=0.05,
                          n_eves=1)
    ba = np.array([1, 9, 2, 8, 3, 7, 4, 0.5])
    cs = _cs(np.ones(8), ba=ba)
    a = allocate_fixed(cs, KeyQueueState.empty(1, 10), cfg)
    assert a.key_set == (1, 3, 5)
    assert len(a.key_set) == cfg.n_key_fixed


def test_fixed_fallback_all_data():
    cfg = DEFAULT.replace(n_subchannels=8, n_cp=8, n_data_fixed=5, n_eves=1)
    cs = _cs(np.ones(8), ba=np.full(8, 0.01), be=np.full(8, 5.0))
    for q in (0, 1):
        a = allocate_fixed(cs, KeyQueueState(q, 1, 10), cfg)
        assert a == Allocation.all_data(8)


def test_dynamic_otp_minimal_set():
    cfg = DEFAULT
    cs = _cs(np.full(64, 2.0))
    a = allocate_dynamic(cs, KeyQueueState(1, 1, 10), cfg)
    assert len(a.data_set) == 11
    assert len(a.data_set) + len(a.key_set) == 64


def test_dynamic_otp_zero_rate_keeps_one():
    cfg = DEFAULT.replace(rate_data=0.0)
    a = allocate_dynamic(_cs(np.full(64, 2.0)), KeyQueueState(1, 1, 10), cfg)
    assert len(a.data_set) == 1


def test_dynamic_wiretap_fallback():
    cfg = DEFAULT.replace(n_subchannels=8, n_cp=8, n_data_fixed=5, n_eves=1)
    cs = _cs(np.ones(8), ba=np.full(8, 0.01), be=np.full(8, 5.0))
    assert allocate_dynamic(cs, KeyQueueState.empty(1, 10), cfg) == Allocation.all_data(8)


def test_dynamic_wiretap_minimal_key(rng):
    cfg = DEFAULT
    for _ in range(5):
        cs = draw_channels(cfg, rng)
        rates = slot_rates(cs, cfg)
        a = allocate_dynamic(cs, KeyQueueState.empty(1, 10), cfg, rates)
        if not a.key_sharing:
            continue
        assert key_secured(rates, a.key_set, cfg)
        order = np.argsort(-bob_metric(cs, cfg), kind="stable")
        smaller = tuple(sorted(order[:len(a.key_set) - 1]))
        assert not key_secured(rates, smaller, cfg)


def test_allocations_cover_and_deterministic(rng):
    cfg = DEFAULT
    for q in (0, 1, 5):
        cs = draw_channels(cfg, rng)
        for fn in (allocate_fixed, allocate_dynamic):
            a = fn(cs, KeyQueueState(q, 1, 10), cfg)
            assert set(a.data_set) | set(a.key_set) == set(range(64))
            assert fn(cs, KeyQueueState(q, 1, 10), cfg) == a


def test_data_checks():
    cfg = DEFAULT
    rates = slot_rates(_cs(np.full(64, 2.0)), cfg)
    assert data_secured_otp(rates, range(11), cfg)
    assert not data_secured_otp(rates, range(10), cfg)
    assert not data_secured_wiretap(rates, (), cfg)
    assert not key_secured(rates, (), cfg)
