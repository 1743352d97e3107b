"""Connection-outage and secrecy-outage probabilities.

Three routes are provided: Monte Carlo over full channel realizations,
the single-key-sub-channel closed forms, and a numerical evaluation of the
tail of a sum of ``log2(1 + snr * G)`` terms with i.i.d. ``G ~ Exp(1)``
(the eavesdropper's rate under a precoder matched to someone else).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Sequence, Union

import numpy as np

from .allocation import bob_metric, bob_metric_high_snr
from .channel import ChannelSet, Gains, draw_channels, mrt_gains
from .config import SystemConfig
from .rate import eve_subchannel_rate, meets_secrecy_target, subchannel_rate

CHUNK = 1000

Policy = Union[str, Callable[[ChannelSet, int], Sequence[int]]]


@dataclass(frozen=True)
class OutageEstimate:
    probability: float
    trials: int
    events: int

    @classmethod
    def from_counts(cls, events: int, trials: int) -> "OutageEstimate":
        return cls(events / trials, trials, int(events))

    @property
    def std_error(self) -> float:
        p = self.probability
        return math.sqrt(p * (1.0 - p) / self.trials)

    def merge(self, other: "OutageEstimate") -> "OutageEstimate":
        return OutageEstimate.from_counts(self.events + other.events,
                                          self.trials + other.trials)


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _subset_masks(policy: Policy, cs: ChannelSet, gains: Gains, size: int,
                  cfg: SystemConfig) -> np.ndarray:
    """Boolean (S, N) selection masks for a batch of realizations."""
    s, n = gains.ab.shape
    mask = np.zeros((s, n), dtype=bool)
    if size <= 0:
        return mask
    if callable(policy):
        for i in range(s):
            mask[i, list(policy(cs.slot(i), size))] = True
        return mask
    if policy == "first":
        mask[:, :size] = True
        return mask
    if policy == "all":
        mask[:] = True
        return mask
    if policy == "alice_best":
        metric = gains.ab
    elif policy == "bob_greedy":
        metric = bob_metric(cs, cfg)
    elif policy == "bob_high_snr":
        metric = bob_metric_high_snr(cs)
    else:
        raise ValueError(f"unknown subset policy {policy!r}")
    order = ranked_rows(metric)
    np.put_along_axis(mask, order[:, :size], True, axis=1)
    return mask


def ranked_rows(metric: np.ndarray) -> np.ndarray:
    return np.argsort(-metric, axis=-1, kind="stable")


def secrecy_sums(main: np.ndarray, eves: np.ndarray) -> np.ndarray:
    """Worst-case clipped secrecy from link sums ``main`` (...) and
    per-eavesdropper sums ``eves`` (..., M)."""
    if eves.shape[-1] == 0:
        return main
    return np.maximum(0.0, (main[..., None] - eves).min(axis=-1))


def connection_outage_mc(cfg: SystemConfig, n_data: int, policy: Policy = "alice_best",
                         trials: int = 10_000, rng=None) -> OutageEstimate:
    """Fraction of realizations with sum-rate over the data set < R_data."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = _as_rng(rng)
    events = 0
    for start in range(0, trials, CHUNK):
        size = min(CHUNK, trials - start)
        cs = draw_channels(cfg, rng, size)
        g = mrt_gains(cs)
        mask = _subset_masks(policy, cs, g, n_data, cfg)
        r = subchannel_rate(g.ab, cfg.snr_alice, cfg.gap_ab,
                            cfg.n_subchannels, cfg.n_cp)
        link = np.where(mask, r, 0.0).sum(axis=-1)
        events += int(np.count_nonzero(link < cfg.rate_data))
    return OutageEstimate.from_counts(events, trials)


def sop_wiretap_mc(cfg: SystemConfig, direction: Literal["ab", "ba"],
                   policy: Policy, target_rate: float, trials: int = 10_000,
                   rng=None, size: int | None = None) -> OutageEstimate:
    """Fraction of realizations whose secrecy rate misses ``target_rate``.

    ``direction="ab"`` uses Alice's data link and the A->E_m links, "ba"
    Bob's key link and the B->E_m links.  ``size`` defaults to the fixed
    scheme's N_data or N_key.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if direction not in ("ab", "ba"):
        raise ValueError(f"direction must be 'ab' or 'ba', got {direction!r}")
    if size is None:
        size = cfg.n_data_fixed if direction == "ab" else cfg.n_key_fixed
    rng = _as_rng(rng)
    n, ncp = cfg.n_subchannels, cfg.n_cp
    events = 0
    for start in range(0, trials, CHUNK):
        chunk = min(CHUNK, trials - start)
        cs = draw_channels(cfg, rng, chunk)
        g = mrt_gains(cs)
        mask = _subset_masks(policy, cs, g, size, cfg)
        if direction == "ab":
            main = subchannel_rate(g.ab, cfg.snr_alice, cfg.gap_ab, n, ncp)
            eve = eve_subchannel_rate(g.ae, cfg.snr_alice, n, ncp)
        else:
            main = subchannel_rate(g.ba, cfg.snr_bob, cfg.gap_ba, n, ncp)
            eve = eve_subchannel_rate(g.be, cfg.snr_bob, n, ncp)
        main_sum = np.where(mask, main, 0.0).sum(axis=-1)
        eve_sum = np.where(mask[:, None, :], eve, 0.0).sum(axis=-1)
        secrecy = secrecy_sums(main_sum, eve_sum)
        ok = meets_secrecy_target(secrecy, target_rate) & mask.any(axis=-1)
        events += int(np.count_nonzero(~ok))
    return OutageEstimate.from_counts(events, trials)


def sop_ba_closed_form(snr: float, gap: float, r_key: float,
                       n_subchannels: int, n_cp: int) -> float:
    """Key-link SOP for one SISO key sub-channel and one eavesdropper."""
    t = 2.0 ** (r_key * (n_subchannels + n_cp))
    return 1.0 - math.exp(-(t - 1.0) / (snr / gap)) / (1.0 + t)


def sop_ba_high_snr(r_key: float, n_subchannels: int) -> float:
    return 1.0 - 2.0 ** (-r_key * n_subchannels)


def r_threshold(cfg: SystemConfig, n_data: int) -> float:
    """Excess of Alice's large-array link rate over R_data."""
    if n_data < 1:
        raise ValueError("n_data must be >= 1")
    link = (n_data / cfg.symbol_length) * math.log2(
        1.0 + cfg.snr_alice * cfg.n_tx_alice / cfg.gap_ab)
    return link - cfg.rate_data


class GridResolutionError(RuntimeError):
    pass


def _single_cdf(y: np.ndarray, snr: float) -> np.ndarray:
    y = np.maximum(y, 0.0)
    return -np.expm1(-np.expm1(y * math.log(2.0)) / snr)


def _single_tail(y, snr: float):
    y = np.asarray(y, dtype=float)
    tail = np.exp(-np.expm1(np.maximum(y, 0.0) * math.log(2.0)) / snr)
    return np.where(y < 0, 1.0, tail)


def eve_sum_tail(n_terms: int, snr: float, threshold: float,
                 n_points: int = 4096, span: float | None = None,
                 max_truncated: float = 1e-6) -> float:
    """Pr{ sum_{d=1}^{n} log2(1 + snr*G_d) > threshold }, G_d i.i.d. Exp(1).

    The last term is integrated exactly against the distribution of the
    other ``n - 1`` terms, which is obtained by FFT convolution of the
    single-term law discretized on ``n_points`` bins of ``[0, span]``
    (masses at bin midpoints).  ``span`` defaults to the point where the
    single-term tail drops to 1e-16.

    Raises GridResolutionError when the probability mass cut off by
    ``span`` exceeds ``max_truncated``.
    """
    if threshold < 0 or (threshold == 0 and n_terms > 0):
        return 1.0
    if n_terms == 0:
        return 0.0
    if n_terms == 1:
        return float(_single_tail(threshold, snr))
    if span is None:
        span = math.log2(1.0 + snr * 16.0 * math.log(10.0))
    truncated = (n_terms - 1) * float(_single_tail(span, snr))
    if truncated > max_truncated:
        raise GridResolutionError(
            f"grid span {span:.3g} truncates {truncated:.2e} of probability mass")
    h = span / n_points
    edges = np.arange(n_points + 1) * h
    pmf = np.diff(_single_cdf(edges, snr))
    m = n_terms - 1
    length = m * (n_points - 1) + 1
    nfft = 1 << (length - 1).bit_length()
    spec = np.fft.rfft(pmf, nfft) ** m
    dist = np.clip(np.fft.irfft(spec, nfft)[:length], 0.0, None)
    support = m * 0.5 * h + np.arange(length) * h
    return float(min(1.0, np.dot(dist, _single_tail(threshold - support, snr))))


def max_of_eves(p_single: float, n_eves: int) -> float:
    """Probability that at least one of ``n_eves`` i.i.d. eavesdroppers
    exceeds the threshold."""
    return 1.0 - (1.0 - p_single) ** n_eves


def sop_ab_product_numeric(cfg: SystemConfig, n_data: int,
                           n_points: int = 4096) -> float:
    """Wiretap SOP of Alice's data over ``n_data`` sub-channels.

    Alice's own rate uses the large-array approximation ||h||^2 = N_A;
    each eavesdropper's per-sub-channel gain is taken as i.i.d. Exp(1).
    """
    r_th = r_threshold(cfg, n_data)
    if r_th <= 0:
        return 1.0
    if cfg.n_eves == 0:
        return 0.0
    p = eve_sum_tail(n_data, cfg.snr_alice, r_th * cfg.symbol_length, n_points)
    return max_of_eves(p, cfg.n_eves)


def sop_ba_product_numeric(cfg: SystemConfig, n_key: int, r_key: float,
                           n_points: int = 4096) -> float:
    """Key-link counterpart of :func:`sop_ab_product_numeric`."""
    if n_key <= 0:
        return 1.0
    main = (n_key / cfg.symbol_length) * math.log2(
        1.0 + cfg.snr_bob * cfg.n_tx_bob / cfg.gap_ba)
    r_th = main - r_key
    if r_th <= 0:
        return 1.0
    if cfg.n_eves == 0:
        return 0.0
    p = eve_sum_tail(n_key, cfg.snr_bob, r_th * cfg.symbol_length, n_points)
    return max_of_eves(p, cfg.n_eves)
