"""Sub-channel partitioning between Alice's data and Bob's keys.

Ties are always broken towards the lowest sub-channel index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, mrt_gains
from .config import SystemConfig
from .keyqueue import KeyQueueState, otp_ready
from .rate import SubchannelRates, link_rate, meets_secrecy_target, secrecy_rate


@dataclass(frozen=True)
class Allocation:
    data_set: tuple[int, ...]
    key_set: tuple[int, ...]

    def __post_init__(self):
        if set(self.data_set) & set(self.key_set):
            raise ValueError("data and key sets overlap")

    @classmethod
    def all_data(cls, n: int) -> "Allocation":
        return cls(tuple(range(n)), ())

    @property
    def key_sharing(self) -> bool:
        return bool(self.key_set)


def ranked(metric: np.ndarray) -> np.ndarray:
    """Indices sorted by decreasing ``metric``, lowest index first on ties."""
    return np.argsort(-np.asarray(metric), kind="stable")


def _complement(n: int, chosen) -> tuple[int, ...]:
    chosen = set(int(i) for i in chosen)
    return tuple(i for i in range(n) if i not in chosen)


@dataclass(frozen=True)
class SlotRates:
    ab: SubchannelRates
    ba: SubchannelRates


def slot_rates(channels: ChannelSet, cfg: SystemConfig) -> SlotRates:
    g = mrt_gains(channels)
    n, ncp = cfg.n_subchannels, cfg.n_cp
    return SlotRates(
        ab=SubchannelRates.from_gains(g.ab, g.ae, cfg.snr_alice, cfg.gap_ab, n, ncp),
        ba=SubchannelRates.from_gains(g.ba, g.be, cfg.snr_bob, cfg.gap_ba, n, ncp),
    )


def bob_metric(channels: ChannelSet, cfg: SystemConfig) -> np.ndarray:
    """Per-sub-channel B->A rate advantage over the strongest eavesdropper."""
    g = mrt_gains(channels)
    main = np.log2(1.0 + cfg.snr_bob * g.ba / cfg.gap_ba)
    if g.be.shape[-2] == 0:
        return main
    return main - np.log2(1.0 + cfg.snr_bob * g.be).max(axis=-2)


def bob_metric_high_snr(channels: ChannelSet) -> np.ndarray:
    g = mrt_gains(channels)
    if g.be.shape[-2] == 0:
        return g.ba
    with np.errstate(divide="ignore"):
        return g.ba / g.be.max(axis=-2)


def select_alice_best(channels: ChannelSet, n_data: int) -> tuple[int, ...]:
    n = channels.n_subchannels
    if not 1 <= n_data <= n:
        raise ValueError(f"n_data must lie in [1, {n}]")
    gains = np.sum(np.abs(channels.h_ab) ** 2, axis=-1)
    return tuple(sorted(int(i) for i in ranked(gains)[:n_data]))


def _greedy(metric: np.ndarray, count: int) -> tuple[int, ...]:
    remaining = np.asarray(metric, dtype=float).copy()
    chosen = []
    for _ in range(count):
        i = int(np.argmax(remaining))  # first maximum -> lowest index
        chosen.append(i)
        remaining[i] = -np.inf
    return tuple(sorted(chosen))


def select_bob_greedy(channels: ChannelSet, n_key: int,
                      cfg: SystemConfig) -> tuple[int, ...]:
    """Pick ``n_key`` sub-channels one at a time by Bob's secrecy metric."""
    n = channels.n_subchannels
    if not 0 <= n_key <= n:
        raise ValueError(f"n_key must lie in [0, {n}]")
    return _greedy(bob_metric(channels, cfg), n_key)


def select_bob_high_snr(channels: ChannelSet, n_key: int) -> tuple[int, ...]:
    """Like :func:`select_bob_greedy` with the high-SNR gain-ratio metric."""
    n = channels.n_subchannels
    if not 0 <= n_key <= n:
        raise ValueError(f"n_key must lie in [0, {n}]")
    return _greedy(bob_metric_high_snr(channels), n_key)


def key_secured(rates: SlotRates, key_set, cfg: SystemConfig) -> bool:
    if not key_set:
        return False
    return bool(meets_secrecy_target(secrecy_rate(rates.ba, key_set),
                                     cfg.rate_key))


def allocate_fixed(channels: ChannelSet, queue: KeyQueueState,
                   cfg: SystemConfig, rates: SlotRates | None = None) -> Allocation:
    """Fixed-size split (N_data, N_key) following the queue state.

    With enough keys for OTP Alice chooses her best N_data sub-channels and
    Bob gets the rest; otherwise Bob chooses his N_key first.  If Bob's
    secrecy rate on his set misses R_key, every sub-channel carries data.
    """
    n = cfg.n_subchannels
    rates = slot_rates(channels, cfg) if rates is None else rates
    if otp_ready(queue):
        data = select_alice_best(channels, cfg.n_data_fixed)
        key = _complement(n, data)
    else:
        key = select_bob_greedy(channels, cfg.n_key_fixed, cfg)
        data = _complement(n, key)
    if not key_secured(rates, key, cfg):
        return Allocation.all_data(n)
    return Allocation(data, key)


def allocate_dynamic(channels: ChannelSet, queue: KeyQueueState,
                     cfg: SystemConfig, rates: SlotRates | None = None) -> Allocation:
    """Per-slot minimal allocation.

    OTP slots: Alice adds her best sub-channels until her link rate reaches
    R_data (at least one, at most all N); Bob keeps the rest.  Wiretap
    slots: Bob adds sub-channels in metric order until his secrecy rate
    reaches R_key; if even all N fail, every sub-channel carries data.
    """
    n = cfg.n_subchannels
    rates = slot_rates(channels, cfg) if rates is None else rates
    if otp_ready(queue):
        order = ranked(np.sum(np.abs(channels.h_ab) ** 2, axis=-1))
        cum = np.cumsum(rates.ab.main[order])
        hit = np.nonzero(cum >= cfg.rate_data)[0]
        size = int(hit[0]) + 1 if hit.size else n
        data = tuple(sorted(int(i) for i in order[:size]))
        return Allocation(data, _complement(n, data))

    order = ranked(bob_metric(channels, cfg))
    for size in range(1, n + 1):
        key = tuple(sorted(int(i) for i in order[:size]))
        if key_secured(rates, key, cfg):
            return Allocation(_complement(n, key), key)
    return Allocation.all_data(n)


def data_secured_otp(rates: SlotRates, data_set, cfg: SystemConfig) -> bool:
    return link_rate(rates.ab, data_set) >= cfg.rate_data


def data_secured_wiretap(rates: SlotRates, data_set, cfg: SystemConfig) -> bool:
    if not data_set:
        return False
    return bool(meets_secrecy_target(secrecy_rate(rates.ab, data_set),
                                     cfg.rate_data))
