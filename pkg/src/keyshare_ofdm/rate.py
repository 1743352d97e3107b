"""Per-sub-channel achievable rates, link sums and secrecy rates.

Rates are in bits per channel use and carry the 1/(N + N_cp) cyclic
prefix overhead.  The SNR gap applies to the legitimate links only;
eavesdropper rates use the Shannon formula (gap = 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np
from scipy.special import ndtri


def q_inv(p):
    """Inverse Gaussian tail function, Q^{-1}(p)."""
    return -ndtri(p)


def snr_gap(p_e: float, gamma_c: float = 1.0, gamma_m: float = 1.0) -> float:
    """SNR gap of coded QAM at symbol error rate ``p_e``.

    ``gamma_c`` is the coding gain and ``gamma_m`` the design margin, both
    linear.  Gap = gamma_m / (3 gamma_c) * Q^{-1}(p_e / 4)^2.
    """
    if not 0.0 < p_e < 1.0:
        raise ValueError(f"p_e must lie in (0, 1), got {p_e}")
    if gamma_c <= 0 or gamma_m <= 0:
        raise ValueError("gamma_c and gamma_m must be positive")
    return float(gamma_m / (3.0 * gamma_c) * q_inv(p_e / 4.0) ** 2)


def subchannel_rate(gain, snr, gap, n_subchannels: int, n_cp: int):
    """log2(1 + snr * gain / gap) / (N + N_cp); vectorised over ``gain``."""
    return np.log2(1.0 + snr * np.asarray(gain) / gap) / (n_subchannels + n_cp)


def eve_subchannel_rate(gain, snr, n_subchannels: int, n_cp: int):
    return subchannel_rate(gain, snr, 1.0, n_subchannels, n_cp)


@dataclass(frozen=True)
class SubchannelRates:
    main: np.ndarray  # (N,)
    eves: np.ndarray  # (M, N)

    @classmethod
    def from_gains(cls, main_gain, eve_gain, snr: float, gap: float,
                   n_subchannels: int, n_cp: int) -> "SubchannelRates":
        return cls(subchannel_rate(main_gain, snr, gap, n_subchannels, n_cp),
                   eve_subchannel_rate(eve_gain, snr, n_subchannels, n_cp))

    @property
    def n_subchannels(self) -> int:
        return self.main.shape[-1]


def _indices(subset: Iterable[int], n: int) -> np.ndarray:
    idx = np.fromiter((int(i) for i in subset), dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"sub-channel index out of range [0, {n})")
    return idx


def link_rate(rates: SubchannelRates, subset: Iterable[int]) -> float:
    idx = _indices(subset, rates.n_subchannels)
    return float(rates.main[idx].sum())


SecrecyMode = Literal["sum", "per_subchannel"]


def secrecy_rate(rates: SubchannelRates, subset: Iterable[int],
                 mode: SecrecyMode = "sum") -> float:
    """Worst-case secrecy rate over the eavesdroppers on ``subset``.

    ``mode="sum"`` clips once: min_m [sum(main) - sum(eve_m)]^+.
    ``mode="per_subchannel"`` clips each term: min_m sum [main - eve_m]^+,
    which is never smaller.  With no eavesdroppers the secrecy rate is the
    link rate.  An empty subset has zero secrecy rate.
    """
    idx = _indices(subset, rates.n_subchannels)
    if idx.size == 0:
        return 0.0
    main = rates.main[idx]
    eves = rates.eves[:, idx]
    if eves.shape[0] == 0:
        return float(main.sum())
    if mode == "sum":
        return float(max(0.0, (main.sum() - eves.sum(axis=1)).min()))
    if mode == "per_subchannel":
        return float(np.clip(main - eves, 0.0, None).sum(axis=1).min())
    raise ValueError(f"unknown secrecy mode {mode!r}")


def meets_secrecy_target(secrecy, target):
    """Secure iff the secrecy rate reaches ``target`` and is positive.

    A clipped (zero) secrecy rate never counts as secure, even for a zero
    target.
    """
    secrecy = np.asarray(secrecy)
    return (secrecy >= target) & (secrecy > 0)
