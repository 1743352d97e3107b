"""Analytic secure throughput, key arrival rate and the offline grid search."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .channel import draw_channels, mrt_gains
from .config import SystemConfig
from .outage import (
    CHUNK, _as_rng, ranked_rows, secrecy_sums, sop_ab_product_numeric,
    sop_ba_product_numeric,
)
from .rate import eve_subchannel_rate, meets_secrecy_target, subchannel_rate


@dataclass(frozen=True)
class ThroughputInputs:
    """Outage probabilities feeding the throughput expression.

    ``p_sop_ba_nkey_wiretap`` optionally gives the key-link SOP seen in
    slots without enough keys, when it differs from the one in OTP slots.
    """

    p_op_ndata: float
    p_op_n: float
    p_sop_ab_ndata: float
    p_sop_ab_n: float
    p_sop_ba_nkey: float
    lam: float
    k: int
    rate_data: float
    p_sop_ba_nkey_wiretap: float | None = None

    def __post_init__(self):
        for name in ("p_op_ndata", "p_op_n", "p_sop_ab_ndata", "p_sop_ab_n",
                     "p_sop_ba_nkey", "lam"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.k < 1:
            raise ValueError("K must be >= 1")


def arrival_rate(p_sop_ba_nkey: float, p_sop_ba_n: float,
                 p_op_ab_ndata: float) -> float:
    """Mean key-packet arrival rate per slot."""
    return ((1.0 - p_sop_ba_nkey) * (1.0 - p_op_ab_ndata)
            + (1.0 - p_sop_ba_n) * p_op_ab_ndata)


def secure_throughput(inputs: ThroughputInputs) -> float:
    """Secure throughput in bits/channel-use with Pr{Q >= K} = lam/K."""
    x = inputs
    ready = x.lam / x.k
    assert 0.0 <= ready <= 1.0
    ba_otp = x.p_sop_ba_nkey
    ba_wt = ba_otp if x.p_sop_ba_nkey_wiretap is None else x.p_sop_ba_nkey_wiretap
    otp = (1 - x.p_op_ndata) * (1 - ba_otp) + (1 - x.p_op_n) * ba_otp
    wiretap = (1 - x.p_sop_ab_ndata) * (1 - ba_wt) + (1 - x.p_sop_ab_n) * ba_wt
    return (ready * otp + (1.0 - ready) * wiretap) * x.rate_data


class OutageProvider(Protocol):
    def inputs(self, n_data: int, k: int) -> ThroughputInputs: ...


class MonteCarloEstimator:
    """Outage probabilities estimated on one shared set of realizations.

    Every (N_data, K) cell reads the same channels (common random numbers).
    Per realization and N_data the estimator keeps: Alice's link rate over
    her best N_data sub-channels, Bob's secrecy rate over his best
    N_key = N - N_data sub-channels, and Alice's wiretap secrecy rate over
    the complement of Bob's set.
    """

    def __init__(self, cfg: SystemConfig, samples: int = 2000, rng=None):
        self.cfg = cfg
        self.samples = samples
        rng = _as_rng(rng)
        n, ncp = cfg.n_subchannels, cfg.n_cp
        link, key, data, link_all, key_all, data_all = [], [], [], [], [], []
        for start in range(0, samples, CHUNK):
            size = min(CHUNK, samples - start)
            cs = draw_channels(cfg, rng, size)
            g = mrt_gains(cs)
            r_ab = subchannel_rate(g.ab, cfg.snr_alice, cfg.gap_ab, n, ncp)
            r_ae = eve_subchannel_rate(g.ae, cfg.snr_alice, n, ncp)
            r_ba = subchannel_rate(g.ba, cfg.snr_bob, cfg.gap_ba, n, ncp)
            r_be = eve_subchannel_rate(g.be, cfg.snr_bob, n, ncp)

            oa = ranked_rows(g.ab)
            cum_ab = np.cumsum(np.take_along_axis(r_ab, oa, -1), axis=-1)
            link.append(cum_ab)  # [:, j] = best j+1 sub-channels
            link_all.append(cum_ab[:, -1])

            main = np.log2(1.0 + cfg.snr_bob * g.ba / cfg.gap_ba)
            if cfg.n_eves:
                main = main - np.log2(1.0 + cfg.snr_bob * g.be).max(axis=-2)
            ob = ranked_rows(main)
            pad = lambda a: np.concatenate(
                [np.zeros(a.shape[:-1] + (1,)), np.cumsum(a, axis=-1)], axis=-1)
            cb_main = pad(np.take_along_axis(r_ba, ob, -1))
            cb_eve = pad(np.take_along_axis(r_be, ob[:, None, :], -1))
            # prefix length j = N_key, for j = 0..N
            key_pref = secrecy_sums(cb_main, np.moveaxis(cb_eve, 1, -1))
            ca_main = pad(np.take_along_axis(r_ab, ob, -1))
            ca_eve = pad(np.take_along_axis(r_ae, ob[:, None, :], -1))
            rest_main = ca_main[:, -1:] - ca_main
            rest_eve = ca_eve[..., -1:] - ca_eve
            data_rest = secrecy_sums(rest_main, np.moveaxis(rest_eve, 1, -1))
            # reorder so column j corresponds to N_data = j + 1
            key.append(key_pref[:, n - 1::-1])
            data.append(data_rest[:, n - 1::-1])
            key_all.append(key_pref[:, -1])
            data_all.append(data_rest[:, 0])
        self._link = np.concatenate(link)
        self._key = np.concatenate(key)
        self._data = np.concatenate(data)
        self._link_all = np.concatenate(link_all)
        self._key_all = np.concatenate(key_all)
        self._data_all = np.concatenate(data_all)

    def _fail(self, secrecy, target):
        return float(np.mean(~meets_secrecy_target(secrecy, target)))

    def inputs(self, n_data: int, k: int) -> ThroughputInputs:
        cfg = self.cfg
        j = n_data - 1
        r_key = cfg.rate_data / k
        p_op_ndata = float(np.mean(self._link[:, j] < cfg.rate_data))
        p_op_n = float(np.mean(self._link_all < cfg.rate_data))
        if n_data == cfg.n_subchannels:
            p_ba = 1.0
        else:
            p_ba = self._fail(self._key[:, j], r_key)
        p_ba_n = self._fail(self._key_all, r_key)
        return ThroughputInputs(
            p_op_ndata=p_op_ndata,
            p_op_n=p_op_n,
            p_sop_ab_ndata=self._fail(self._data[:, j], cfg.rate_data),
            p_sop_ab_n=self._fail(self._data_all, cfg.rate_data),
            p_sop_ba_nkey=p_ba,
            lam=arrival_rate(p_ba, p_ba_n, p_op_ndata),
            k=k,
            rate_data=cfg.rate_data,
        )


class AnalyticEstimator:
    """Channel-free estimator from the large-array approximations.

    Connection outage is 0 or 1 depending on whether N_data sub-channels
    at ||h||^2 = N_A carry R_data; secrecy outages come from the numerical
    eavesdropper-sum distribution.
    """

    def __init__(self, cfg: SystemConfig, n_points: int = 2048):
        self.cfg = cfg
        self.n_points = n_points

    def _p_op(self, n_data: int) -> float:
        c = self.cfg
        link = n_data / c.symbol_length * np.log2(
            1.0 + c.snr_alice * c.n_tx_alice / c.gap_ab)
        return 0.0 if link >= c.rate_data else 1.0

    def inputs(self, n_data: int, k: int) -> ThroughputInputs:
        c = self.cfg
        n = c.n_subchannels
        r_key = c.rate_data / k
        p_op_nd = self._p_op(n_data)
        p_ba = sop_ba_product_numeric(c, n - n_data, r_key, self.n_points)
        p_ba_n = sop_ba_product_numeric(c, n, r_key, self.n_points)
        return ThroughputInputs(
            p_op_ndata=p_op_nd,
            p_op_n=self._p_op(n),
            p_sop_ab_ndata=sop_ab_product_numeric(c, n_data, self.n_points),
            p_sop_ab_n=sop_ab_product_numeric(c, n, self.n_points),
            p_sop_ba_nkey=p_ba,
            lam=arrival_rate(p_ba, p_ba_n, p_op_nd),
            k=k,
            rate_data=c.rate_data,
        )


@dataclass
class OptimizationResult:
    best_n_data: int
    best_k: int
    best_throughput: float
    surface: dict[tuple[int, int], float] = field(repr=False)

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n_data", "k", "throughput"])
            for (nd, k), t in sorted(self.surface.items()):
                w.writerow([nd, k, repr(float(t))])


def optimize_grid(cfg: SystemConfig, estimator: OutageProvider | None = None,
                  channel_sample_count: int = 2000, rng=None,
                  n_data_values=None, k_values=None) -> OptimizationResult:
    """Exhaustive search of N_data in 1..N and K in 1..Q_max.

    Without an explicit ``estimator`` a :class:`MonteCarloEstimator` is
    built on ``channel_sample_count`` shared realizations.  Ties go to the
    lexicographically smallest (N_data, K).
    """
    if estimator is None:
        estimator = MonteCarloEstimator(cfg, channel_sample_count, rng)
    n_values = range(1, cfg.n_subchannels + 1) if n_data_values is None else n_data_values
    k_values = range(1, cfg.q_max + 1) if k_values is None else k_values
    surface: dict[tuple[int, int], float] = {}
    best = None
    for nd in n_values:
        for k in k_values:
            t = secure_throughput(estimator.inputs(nd, k))
            surface[(nd, k)] = t
            if best is None or t > best[2]:
                best = (nd, k, t)
    if best is None:
        raise ValueError("empty optimization grid")
    return OptimizationResult(best[0], best[1], best[2], surface)
