import numpy as np
import pytest

from keyshare_ofdm.config import DEFAULT


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cfg():
    return DEFAULT


@pytest.fixture
def small_cfg():
    # small enough for exhaustive or reference-loop checks
    return DEFAULT.replace(n_subchannels=16, n_cp=4, n_taps=4, n_data_fixed=6,
                           rate_data=0.8, snr_alice=100.0, snr_bob=100.0)
