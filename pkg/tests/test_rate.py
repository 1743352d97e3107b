import math

import numpy as np
import pytest
from scipy.special import erfc

from keyshare_ofdm.rate import (
    SubchannelRates, eve_subchannel_rate, link_rate, meets_secrecy_target,
    q_inv, secrecy_rate, snr_gap, subchannel_rate,
)


def _q_inv_bisect(p):
    # independent oracle: bisection on the Gaussian tail
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 0.5 * erfc(mid / math.sqrt(2)) > p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("p", [1e-12, 1e-9, 2.5e-7, 1e-4, 0.01, 0.1, 0.3, 0.499])
def test_q_inv_against_bisection(p):
    assert q_inv(p) == pytest.approx(_q_inv_bisect(p), rel=1e-8)


def test_q_inv_half():
    assert abs(q_inv(0.5)) < 1e-15


def test_gap_example():
    assert snr_gap(1e-6) == pytest.approx(8.4, abs=0.05)
    assert 10 * math.log10(snr_gap(1e-6)) == pytest.approx(9.2, abs=0.1)


def test_gap_one_recovers_shannon():
    q = q_inv(1e-3 / 4)
    assert snr_gap(1e-3, gamma_c=1.0, gamma_m=3.0 / q ** 2) == pytest.approx(1.0)


def test_gap_monotone():
    pe = np.logspace(-10, -1, 30)
    gaps = [snr_gap(p) for p in pe]
    assert np.all(np.diff(gaps) < 0)


@pytest.mark.parametrize("p_e", [0.0, 1.0, -0.1])
def test_gap_domain(p_e):
    with pytest.raises(ValueError):
        snr_gap(p_e)


def test_subchannel_rate_examples():
    assert subchannel_rate(0.0, 1000, 1.2, 64, 8) == 0.0
    assert subchannel_rate(2.0, 1000, 1.2, 64, 8) == pytest.approx(0.1487, abs=1e-4)
    assert 11 * subchannel_rate(2.0, 1000, 1.2, 64, 8) == pytest.approx(1.635, abs=1e-3)
    assert eve_subchannel_rate(1.0, 1.0, 1, 0) == 1.0


def test_eve_rate_is_gap_one(rng):
    g = rng.exponential(size=50)
    assert np.array_equal(eve_subchannel_rate(g, 30.0, 64, 8),
                          subchannel_rate(g, 30.0, 1.0, 64, 8))


def _rates(main, eves):
    return SubchannelRates(np.asarray(main, float), np.asarray(eves, float).reshape(-1, len(main)))


def test_link_rate():
    r = _rates([0.1, 0.2, 0.3], [[0, 0, 0]])
    assert link_rate(r, []) == 0.0
    assert link_rate(r, [1]) == 0.2
    assert link_rate(r, [0, 2]) + link_rate(r, [1]) == pytest.approx(link_rate(r, range(3)))
    with pytest.raises(IndexError):
        link_rate(r, [3])


def test_secrecy_examples():
    r = _rates([0.5, 0.5], [[0.0, 0.0]])
    assert secrecy_rate(r, [0, 1]) == link_rate(r, [0, 1])
    r = _rates([0.1, 0.2], [[0.2, 0.3]])
    assert secrecy_rate(r, [0, 1]) == 0.0
    r = _rates([0.6, 0.4], [[0.1, 0.2], [0.3, 0.4]])
    assert secrecy_rate(r, [0, 1]) == pytest.approx(0.3)
    assert secrecy_rate(r, []) == 0.0
    assert secrecy_rate(_rates([0.4], np.zeros((0, 1))), [0]) == 0.4


def test_secrecy_modes():
    r = _rates([0.5, 0.1], [[0.1, 0.4]])
    assert secrecy_rate(r, [0, 1], "sum") == pytest.approx(0.1)
    assert secrecy_rate(r, [0, 1], "per_subchannel") == pytest.approx(0.4)
    with pytest.raises(ValueError):
        secrecy_rate(r, [0], "other")


def test_meets_target():
    assert not meets_secrecy_target(0.0, 0.0)
    assert meets_secrecy_target(1e-9, 0.0)
    assert meets_secrecy_target(1.5, 1.5)
    assert not meets_secrecy_target(1.4, 1.5)
    assert list(meets_secrecy_target([0.0, 2.0], 1.0)) == [False, True]
