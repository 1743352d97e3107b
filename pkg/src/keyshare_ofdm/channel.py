"""Quasi-static multipath channels, their OFDM frequency responses and MRT.

Every CIR tap is CN(0, 1/L) (flat power-delay profile), so each entry of
the frequency response has unit variance.  The DFT is evaluated directly
as ``sum_l tap[l] * exp(-2j*pi*k*l/N)`` without a ``1/sqrt(N)`` factor.

All links (A->B, B->A, A->E_m, B->E_m) are drawn independently; there is
no reciprocity between A->B and B->A.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import SystemConfig


@dataclass(frozen=True)
class Cir:
    taps: np.ndarray  # (..., n_tx, L)

    @property
    def n_tx(self) -> int:
        return self.taps.shape[-2]

    @property
    def n_taps(self) -> int:
        return self.taps.shape[-1]


@dataclass(frozen=True)
class Precoder:
    weights: np.ndarray


def _cn(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    scale = np.sqrt(variance / 2.0)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return scale * (re + 1j * im)


def generate_cir(n_tx: int, n_taps: int, rng: np.random.Generator,
                 size: int | None = None) -> Cir:
    """Draw i.i.d. CN(0, 1/L) taps; ``size`` prepends a batch axis."""
    shape = (n_tx, n_taps) if size is None else (size, n_tx, n_taps)
    return Cir(_cn(rng, shape, 1.0 / n_taps))


def dft_matrix(n_subchannels: int, n_taps: int) -> np.ndarray:
    k = np.arange(n_subchannels)[:, None]
    l = np.arange(n_taps)[None, :]
    return np.exp(-2j * np.pi * k * l / n_subchannels)


def frequency_response(cir: Cir, n_subchannels: int) -> np.ndarray:
    """Per-sub-channel channel vectors, shape ``(..., N, n_tx)``."""
    if n_subchannels < cir.n_taps:
        raise ValueError(
            f"N ({n_subchannels}) must be >= number of taps ({cir.n_taps})")
    f = dft_matrix(n_subchannels, cir.n_taps)
    # (..., n_tx, L) @ (L, N) -> (..., n_tx, N)
    return np.swapaxes(cir.taps @ f.T, -1, -2)


def mrt_precoder(h: np.ndarray) -> Precoder:
    h = np.asarray(h, dtype=complex)
    norm = np.linalg.norm(h)
    if norm == 0:
        raise ValueError("cannot build an MRT precoder for a zero channel")
    return Precoder(np.conj(h) / norm)


def effective_gain(h: np.ndarray, p: Precoder | np.ndarray) -> float:
    """|h^T p|^2 for one channel vector and precoder."""
    w = p.weights if isinstance(p, Precoder) else np.asarray(p)
    h = np.asarray(h)
    if h.shape != w.shape:
        raise ValueError(f"dimension mismatch: h {h.shape} vs p {w.shape}")
    return float(abs(h @ w) ** 2)


@dataclass(frozen=True)
class ChannelSet:
    """Frequency-domain channels of one slot, or of a batch of slots.

    Shapes (without the optional leading batch axis):
    ``h_ab (N, N_A)``, ``h_ba (N, N_B)``, ``h_ae (M, N, N_A)``,
    ``h_be (M, N, N_B)``.
    """

    h_ab: np.ndarray
    h_ba: np.ndarray
    h_ae: np.ndarray
    h_be: np.ndarray

    @property
    def batched(self) -> bool:
        return self.h_ab.ndim == 3

    def __len__(self) -> int:
        if not self.batched:
            raise TypeError("unbatched ChannelSet has no length")
        return self.h_ab.shape[0]

    @property
    def n_subchannels(self) -> int:
        return self.h_ab.shape[-2]

    @property
    def n_eves(self) -> int:
        return self.h_ae.shape[-3]

    def slot(self, i: int) -> "ChannelSet":
        return ChannelSet(self.h_ab[i], self.h_ba[i], self.h_ae[i], self.h_be[i])

    def slots(self, start: int, stop: int) -> "ChannelSet":
        s = slice(start, stop)
        return ChannelSet(self.h_ab[s], self.h_ba[s], self.h_ae[s], self.h_be[s])


def draw_channels(cfg: SystemConfig, rng: np.random.Generator,
                  size: int | None = None) -> ChannelSet:
    """Draw one realization (``size=None``) or a batch of ``size`` slots."""
    n, l, m = cfg.n_subchannels, cfg.n_taps, cfg.n_eves
    batch = () if size is None else (size,)

    def link(shape):
        taps = _cn(rng, batch + shape + (l,), 1.0 / l)
        return frequency_response(Cir(taps), n)

    h_ab = link((cfg.n_tx_alice,))
    h_ba = link((cfg.n_tx_bob,))
    h_ae = link((m, cfg.n_tx_alice))
    h_be = link((m, cfg.n_tx_bob))
    return ChannelSet(h_ab, h_ba, h_ae, h_be)


@dataclass(frozen=True)
class Gains:
    """Effective power gains under per-sub-channel MRT.

    ``ab``/``ba`` are the legitimate gains ||h||^2, ``ae``/``be`` the
    eavesdropper gains |h_E^T p|^2 under Alice's and Bob's precoders.
    Shapes ``(..., N)`` and ``(..., M, N)``.
    """

    ab: np.ndarray
    ba: np.ndarray
    ae: np.ndarray
    be: np.ndarray


def _projected(h_eve: np.ndarray, h_main: np.ndarray) -> np.ndarray:
    # h_eve (..., M, N, n), h_main (..., N, n)
    norm2 = np.sum(np.abs(h_main) ** 2, axis=-1)
    inner = np.einsum("...mkn,...kn->...mk", h_eve, np.conj(h_main))
    return np.abs(inner) ** 2 / norm2[..., None, :]


def mrt_gains(cs: ChannelSet) -> Gains:
    return Gains(
        ab=np.sum(np.abs(cs.h_ab) ** 2, axis=-1),
        ba=np.sum(np.abs(cs.h_ba) ** 2, axis=-1),
        ae=_projected(cs.h_ae, cs.h_ab),
        be=_projected(cs.h_be, cs.h_ba),
    )


_LINKS = ("h_ab", "h_ba", "h_ae", "h_be")
_CSV_HEADER = ["link", "eve", "subchannel", "antenna", "re", "im"]


def dump_channel_set(cs: ChannelSet, path: str | Path) -> None:
    """Write an unbatched ChannelSet as CSV.

    The first line is a comment ``# channelset v1 N=.. N_A=.. N_B=.. M=..``,
    followed by the columns ``link,eve,subchannel,antenna,re,im`` in
    row-major order; ``eve`` is -1 for the A<->B links.  Floats are written
    with ``repr`` so a round trip is bit-exact.
    """
    if cs.batched:
        raise ValueError("dump a single slot, not a batch")
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# channelset v1 N={cs.n_subchannels} "
                 f"N_A={cs.h_ab.shape[-1]} N_B={cs.h_ba.shape[-1]} "
                 f"M={cs.n_eves}\n")
        w = csv.writer(fh)
        w.writerow(_CSV_HEADER)
        for name in _LINKS:
            arr = getattr(cs, name)
            if arr.ndim == 2:
                arr = arr[None]
                eves = [-1]
            else:
                eves = list(range(arr.shape[0]))
            for e_idx, e in enumerate(eves):
                for k in range(arr.shape[1]):
                    for a in range(arr.shape[2]):
                        z = arr[e_idx, k, a]
                        w.writerow([name, e, k, a, repr(float(z.real)),
                                    repr(float(z.imag))])


def load_channel_set(path: str | Path) -> ChannelSet:
    path = Path(path)
    with path.open() as fh:
        meta_line = fh.readline()
        if not meta_line.startswith("# channelset v1"):
            raise ValueError("not a channelset v1 file")
        meta = dict(tok.split("=") for tok in meta_line.split()[3:])
        n, na, nb, m = (int(meta[k]) for k in ("N", "N_A", "N_B", "M"))
        arrays = {
            "h_ab": np.zeros((n, na), complex),
            "h_ba": np.zeros((n, nb), complex),
            "h_ae": np.zeros((m, n, na), complex),
            "h_be": np.zeros((m, n, nb), complex),
        }
        reader = csv.DictReader(fh)
        for row in reader:
            z = complex(float(row["re"]), float(row["im"]))
            k, a, e = int(row["subchannel"]), int(row["antenna"]), int(row["eve"])
            arr = arrays[row["link"]]
            if e < 0:
                arr[k, a] = z
            else:
                arr[e, k, a] = z
    return ChannelSet(**arrays)
