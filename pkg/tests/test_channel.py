import numpy as np
import pytest
from scipy import stats

from keyshare_ofdm.channel import (
    ChannelSet, Cir, draw_channels, dump_channel_set, effective_gain,
    frequency_response, generate_cir, load_channel_set, mrt_gains, mrt_precoder,
)


def test_two_tap_dft_by_hand():
    h = frequency_response(Cir(np.array([[1.0 + 0j, 1.0]])), 4)
    np.testing.assert_allclose(h[:, 0], [2, 1 - 1j, 0, 1 + 1j], atol=1e-12)


def test_parseval(rng):
    cir = generate_cir(3, 8, rng)
    h = frequency_response(cir, 64)
    np.testing.assert_allclose(np.sum(np.abs(h) ** 2, axis=0),
                               64 * np.sum(np.abs(cir.taps) ** 2, axis=1))


def test_matches_fft(rng):
    cir = generate_cir(2, 5, rng)
    h = frequency_response(cir, 32)
    np.testing.assert_allclose(h.T, np.fft.fft(cir.taps, 32, axis=-1), atol=1e-12)


def test_n_smaller_than_taps():
    with pytest.raises(ValueError):
        frequency_response(Cir(np.ones((1, 8), complex)), 4)


def test_single_tap_variance_one(rng):
    taps = generate_cir(1, 1, rng, size=100_000).taps
    assert taps.shape == (100_000, 1, 1)
    assert np.var(taps) == pytest.approx(1.0, abs=3 * np.sqrt(1 / 100_000) * 1.5)


def test_tap_variance(rng):
    n = 100_000
    taps = generate_cir(2, 8, rng, size=n).taps
    var = np.mean(np.abs(taps) ** 2, axis=0)
    # |CN(0, s)|^2 is exponential with std s
    assert np.all(np.abs(var - 1 / 8) < 3 * (1 / 8) / np.sqrt(n))


def test_generate_deterministic():
    a = generate_cir(2, 8, np.random.default_rng(3)).taps
    b = generate_cir(2, 8, np.random.default_rng(3)).taps
    assert np.array_equal(a, b)


def test_frequency_entries_unit_variance(cfg, rng):
    cs = draw_channels(cfg, rng, size=4000)
    assert np.mean(np.abs(cs.h_ab) ** 2) == pytest.approx(1.0, abs=0.02)
    assert np.mean(np.abs(cs.h_be) ** 2) == pytest.approx(1.0, abs=0.02)


def test_mrt_examples():
    p = mrt_precoder(np.array([3, 4j]))
    assert np.linalg.norm(p.weights) == pytest.approx(1.0)
    assert effective_gain(np.array([3, 4j]), p) == pytest.approx(25.0)
    assert np.allclose(mrt_precoder(np.array([1.0])).weights, [1.0])
    assert effective_gain(np.array([1, 0]), np.array([1, 1]) / np.sqrt(2)) == pytest.approx(0.5)
    assert effective_gain(np.array([1, 0]), np.array([0, 1])) == 0.0


def test_mrt_errors():
    with pytest.raises(ValueError):
        mrt_precoder(np.zeros(3))
    with pytest.raises(ValueError):
        effective_gain(np.ones(2), np.ones(3))


def test_large_array_gain_concentrates(rng):
    h = (rng.standard_normal((2000, 64)) + 1j * rng.standard_normal((2000, 64))) / np.sqrt(2)
    assert np.mean(np.sum(np.abs(h) ** 2, axis=1) / 64) == pytest.approx(1.0, rel=0.02)


def test_eve_gain_exponential(cfg, rng):
    g = mrt_gains(draw_channels(cfg, rng, size=1000))
    sample = g.ae[:, 0, 5]
    assert stats.kstest(sample, "expon").pvalue > 0.01
    assert np.mean(g.be) == pytest.approx(1.0, abs=0.02)


def test_gains_match_precoder(cfg, rng):
    cs = draw_channels(cfg, rng)
    g = mrt_gains(cs)
    k = 7
    p = mrt_precoder(cs.h_ba[k])
    assert g.be[1, k] == pytest.approx(effective_gain(cs.h_be[1, k], p))
    assert g.ba[k] == pytest.approx(effective_gain(cs.h_ba[k], p))


def test_channel_set_shapes(cfg, rng):
    cs = draw_channels(cfg, rng, size=3)
    assert cs.batched and len(cs) == 3
    assert cs.h_ae.shape == (3, 2, 64, 2) and cs.h_be.shape == (3, 2, 64, 8)
    one = cs.slot(1)
    assert not one.batched and one.n_subchannels == 64 and one.n_eves == 2
    assert len(cs.slots(0, 2)) == 2
    with pytest.raises(TypeError):
        len(one)


def test_csv_roundtrip(cfg, rng, tmp_path):
    cs = draw_channels(cfg.replace(n_subchannels=8, n_cp=8, n_data_fixed=4), rng)
    path = tmp_path / "cs.csv"
    dump_channel_set(cs, path)
    back = load_channel_set(path)
    for name in ("h_ab", "h_ba", "h_ae", "h_be"):
        assert np.array_equal(getattr(cs, name), getattr(back, name))
    with pytest.raises(ValueError):
        dump_channel_set(ChannelSet(cs.h_ab[None], cs.h_ba[None], cs.h_ae[None], cs.h_be[None]), path)
