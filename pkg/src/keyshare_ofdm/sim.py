"""Slot-driven simulation of the fixed, dynamic and benchmark schemes.

One slot is one coherence interval: a fresh channel realization is drawn
every slot.  Channels are drawn in chunks of :data:`CHUNK` slots and every
per-slot quantity that does not depend on the queue is computed for both
queue branches at once; the queue itself is then stepped sequentially.
:func:`simulate_slots` is a slower reference implementation built on the
per-slot allocation functions.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import allocation as alloc
from .channel import ChannelSet, draw_channels, mrt_gains
from .config import SystemConfig
from .keyqueue import KeyQueueState, dequeue_data, enqueue_key, otp_ready
from .outage import ranked_rows, secrecy_sums
from .rate import eve_subchannel_rate, meets_secrecy_target, subchannel_rate
from .throughput import ThroughputInputs, optimize_grid, MonteCarloEstimator

CHUNK = 1000
SCHEMES = ("fixed", "dynamic", "benchmark")
OTP, WIRETAP, NO_KEYS = "otp", "wiretap", "no-key-sharing"


@dataclass(frozen=True)
class SlotOutcome:
    mode: str
    data_secured: bool
    key_arrived: bool
    queue_after: int
    allocation: alloc.Allocation | None = None


@dataclass
class BranchCounts:
    """Per-branch tallies; ``*_ks`` = slots where the key condition held."""

    otp_slots: int = 0
    otp_ks: int = 0
    otp_ks_secured: int = 0
    otp_kf_secured: int = 0
    wt_slots: int = 0
    wt_ks: int = 0
    wt_ks_secured: int = 0
    wt_kf_secured: int = 0


@dataclass
class ThroughputReport:
    scheme: str
    secure_throughput: float
    slots: int
    rate_data: float
    key_ratio: int
    secured_slots: int
    otp_slots: int
    sop_events: int
    outage_events: int
    key_arrivals: int
    key_failures: int
    n_data: int | None = None
    seed: int | None = None
    branches: BranchCounts = field(default_factory=BranchCounts, repr=False)

    @property
    def otp_fraction(self) -> float:
        return self.otp_slots / self.slots

    @property
    def secured_fraction(self) -> float:
        return self.secured_slots / self.slots

    @property
    def std_error(self) -> float:
        p = self.secured_fraction
        return self.rate_data * math.sqrt(p * (1.0 - p) / self.slots)

    @property
    def ci_95(self) -> float:
        return 1.96 * self.std_error

    @property
    def key_arrival_rate(self) -> float:
        return self.key_arrivals / self.slots


@dataclass
class SlotTable:
    """Queue-independent outcomes of a batch of slots for one scheme.

    ``otp_*`` describe the branch taken with enough keys, ``wt_*`` the one
    without: ``key_ok`` whether Bob's key condition holds on the key set,
    ``data_split`` whether data is secured on the split allocation and
    ``data_all`` whether it is secured with every sub-channel on data.
    """

    otp_key_ok: np.ndarray
    otp_data_split: np.ndarray
    otp_data_all: np.ndarray
    wt_key_ok: np.ndarray
    wt_data_split: np.ndarray
    wt_data_all: np.ndarray


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _prefix(a: np.ndarray) -> np.ndarray:
    z = np.zeros(a.shape[:-1] + (1,))
    return np.concatenate([z, np.cumsum(a, axis=-1)], axis=-1)


def _pick(a: np.ndarray, size: np.ndarray) -> np.ndarray:
    """Entry ``size[s]`` of the last axis of ``a``, for every row ``s``."""
    idx = size.reshape(size.shape + (1,) * (a.ndim - 1))
    idx = np.broadcast_to(idx, a.shape[:-1] + (1,))
    return np.take_along_axis(a, idx, axis=-1)[..., 0]


def slot_table(cs: ChannelSet, cfg: SystemConfig, scheme: str) -> SlotTable:
    n, ncp = cfg.n_subchannels, cfg.n_cp
    g = mrt_gains(cs)
    s = g.ab.shape[0]
    r_ab = subchannel_rate(g.ab, cfg.snr_alice, cfg.gap_ab, n, ncp)
    r_ae = eve_subchannel_rate(g.ae, cfg.snr_alice, n, ncp)
    r_ba = subchannel_rate(g.ba, cfg.snr_bob, cfg.gap_ba, n, ncp)
    r_be = eve_subchannel_rate(g.be, cfg.snr_bob, n, ncp)
    r_data, r_key = cfg.rate_data, cfg.rate_key

    def eves_last(x):
        return np.moveaxis(x, 1, -1)

    # every sub-channel on data
    link_all = r_ab.sum(axis=-1)
    wt_all = secrecy_sums(link_all, r_ae.sum(axis=-1))
    otp_data_all = link_all >= r_data
    wt_data_all = meets_secrecy_target(wt_all, r_data)
    if scheme == "benchmark":
        no = np.zeros(s, dtype=bool)
        return SlotTable(no, no, otp_data_all, no, no, wt_data_all)

    # prefix sums in Alice's order (best A->B gain first)
    oa = ranked_rows(g.ab)
    a_ab = _prefix(np.take_along_axis(r_ab, oa, -1))
    a_ba = _prefix(np.take_along_axis(r_ba, oa, -1))
    a_be = _prefix(np.take_along_axis(r_be, oa[:, None, :], -1))
    # prefix sums in Bob's order
    metric = np.log2(1.0 + cfg.snr_bob * g.ba / cfg.gap_ba)
    if cfg.n_eves:
        metric = metric - np.log2(1.0 + cfg.snr_bob * g.be).max(axis=-2)
    ob = ranked_rows(metric)
    b_ba = _prefix(np.take_along_axis(r_ba, ob, -1))
    b_be = _prefix(np.take_along_axis(r_be, ob[:, None, :], -1))
    b_ab = _prefix(np.take_along_axis(r_ab, ob, -1))
    b_ae = _prefix(np.take_along_axis(r_ae, ob[:, None, :], -1))

    def key_on_alice_complement(size):
        main = a_ba[:, -1] - _pick(a_ba, size)
        eve = a_be[..., -1] - _pick(a_be, size)
        ok = meets_secrecy_target(secrecy_sums(main, eve), r_key)
        return ok & (size < n)

    def data_on_bob_complement(size):
        main = b_ab[:, -1] - _pick(b_ab, size)
        eve = b_ae[..., -1] - _pick(b_ae, size)
        return meets_secrecy_target(secrecy_sums(main, eve), r_data) & (size < n)

    if scheme == "fixed":
        nd = np.full(s, cfg.n_data_fixed)
        nk = np.full(s, cfg.n_key_fixed)
        otp_split = _pick(a_ab, nd) >= r_data
        otp_key = key_on_alice_complement(nd)
        wt_key_secrecy = secrecy_sums(_pick(b_ba, nk), _pick(b_be, nk))
        wt_key = meets_secrecy_target(wt_key_secrecy, r_key) & (nk > 0)
        wt_split = data_on_bob_complement(nk)
        return SlotTable(otp_key, otp_split, otp_data_all,
                         wt_key, wt_split, wt_data_all)

    if scheme == "dynamic":
        # OTP: smallest prefix of Alice's order reaching R_data (>= 1)
        reach = a_ab[:, 1:] >= r_data
        nd = np.where(reach.any(axis=-1), reach.argmax(axis=-1) + 1, n)
        otp_split = _pick(a_ab, nd) >= r_data
        otp_key = key_on_alice_complement(nd)
        # wiretap: smallest prefix of Bob's order meeting R_key
        pref = secrecy_sums(b_ba[:, 1:], eves_last(b_be[..., 1:]))
        hit = meets_secrecy_target(pref, r_key)
        wt_key = hit.any(axis=-1)
        nk = np.where(wt_key, hit.argmax(axis=-1) + 1, 0)
        wt_split = data_on_bob_complement(nk)
        # in the dynamic scheme a failed OTP-branch key set does not change
        # Alice's data set
        return SlotTable(otp_key, otp_split, otp_split,
                         wt_key, wt_split, wt_data_all)

    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass
class RunTrace:
    """Per-slot record; ``mode`` is 0 OTP, 1 wiretap, 2 no key sharing."""

    mode: np.ndarray
    secured: np.ndarray
    key_ok: np.ndarray
    key_arrived: np.ndarray
    queue_after: np.ndarray


def _step_table(table: SlotTable, cfg: SystemConfig, scheme: str,
                q: int, counts: BranchCounts, out: list,
                transmit_anyway: bool) -> int:
    k, q_max = cfg.key_ratio, cfg.q_max
    for t in range(table.otp_key_ok.shape[0]):
        if scheme == "benchmark":
            out.append((2, bool(table.wt_data_all[t]), False, False, q))
            continue
        if q >= k:
            mode = 0
            key_ok = bool(table.otp_key_ok[t])
            split = key_ok or transmit_anyway
            secured = bool(table.otp_data_split[t] if split
                           else table.otp_data_all[t])
            counts.otp_slots += 1
            if key_ok:
                counts.otp_ks += 1
                counts.otp_ks_secured += secured
            else:
                counts.otp_kf_secured += secured
            if secured:
                q -= k
        else:
            mode = 1
            key_ok = bool(table.wt_key_ok[t])
            split = key_ok or transmit_anyway
            secured = bool(table.wt_data_split[t] if split
                           else table.wt_data_all[t])
            counts.wt_slots += 1
            if key_ok:
                counts.wt_ks += 1
                counts.wt_ks_secured += secured
            else:
                counts.wt_kf_secured += secured
        if split:
            q = min(q + 1, q_max)
        out.append((mode, secured, key_ok, split, q))
    return q


def _simulate(cfg: SystemConfig, scheme: str, slots: int, rng,
              bob_abstains: bool = True, trace: bool = False):
    if slots < 1:
        raise ValueError("slots must be >= 1")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    rng = _as_rng(rng)
    transmit_anyway = (not bob_abstains and scheme == "fixed"
                       and cfg.n_key_fixed > 0)
    counts = BranchCounts()
    rows: list = []
    q = 0
    for start in range(0, slots, CHUNK):
        size = min(CHUNK, slots - start)
        table = slot_table(draw_channels(cfg, rng, size), cfg, scheme)
        q = _step_table(table, cfg, scheme, q, counts, rows, transmit_anyway)
    mode, secured, key_ok, arrived, queue = np.array(rows, dtype=np.int64).T
    secured, key_ok, arrived = (x.astype(bool) for x in (secured, key_ok, arrived))
    otp = mode == 0
    report = ThroughputReport(
        scheme=scheme,
        secure_throughput=float(secured.mean() * cfg.rate_data),
        slots=slots,
        rate_data=cfg.rate_data,
        key_ratio=cfg.key_ratio,
        secured_slots=int(secured.sum()),
        otp_slots=int(otp.sum()),
        sop_events=int((~otp & ~secured).sum()),
        outage_events=int((otp & ~secured).sum()),
        key_arrivals=int(arrived.sum()),
        key_failures=int(((mode != 2) & ~key_ok).sum()),
        n_data=cfg.n_data_fixed if scheme == "fixed" else None,
        branches=counts,
    )
    if trace:
        return report, RunTrace(mode, secured, key_ok, arrived, queue)
    return report


def run_fixed(cfg: SystemConfig, slots: int, rng=None, *,
              bob_abstains: bool = True) -> ThroughputReport:
    """Fixed (N_data, N_key) split.

    With ``bob_abstains=False`` Bob sends keys on his set even when they
    are not secure; ``key_failures`` then counts leaked key packets.  This
    mode only exists to check the key-link SOP estimators.
    """
    return _simulate(cfg, "fixed", slots, rng, bob_abstains)


def run_dynamic(cfg: SystemConfig, slots: int, rng=None) -> ThroughputReport:
    return _simulate(cfg, "dynamic", slots, rng)


def run_benchmark(cfg: SystemConfig, slots: int, rng=None) -> ThroughputReport:
    return _simulate(cfg, "benchmark", slots, rng)


def run_scheme(cfg: SystemConfig, scheme: str, slots: int, rng=None, *,
               trace: bool = False):
    """Run one scheme; with ``trace`` also return the per-slot RunTrace."""
    return _simulate(cfg, scheme, slots, rng, trace=trace)


def simulate_slots(cfg: SystemConfig, scheme: str,
                   channels: ChannelSet) -> list[SlotOutcome]:
    """Reference slot loop over a batch of channels via the allocators."""
    q = KeyQueueState.empty(cfg.key_ratio, cfg.q_max)
    out = []
    for t in range(len(channels)):
        cs = channels.slot(t)
        rates = alloc.slot_rates(cs, cfg)
        if scheme == "benchmark":
            a = alloc.Allocation.all_data(cfg.n_subchannels)
            secured = alloc.data_secured_wiretap(rates, a.data_set, cfg)
            out.append(SlotOutcome(NO_KEYS, secured, False, q.occupancy, a))
            continue
        allocate = alloc.allocate_fixed if scheme == "fixed" else alloc.allocate_dynamic
        a = allocate(cs, q, cfg, rates)
        key_ok = alloc.key_secured(rates, a.key_set, cfg)
        if otp_ready(q):
            mode = OTP
            secured = alloc.data_secured_otp(rates, a.data_set, cfg)
            if secured:
                q = dequeue_data(q)
        else:
            mode = WIRETAP
            secured = alloc.data_secured_wiretap(rates, a.data_set, cfg)
        if key_ok:
            q = enqueue_key(q)
        out.append(SlotOutcome(mode, secured, key_ok, q.occupancy, a))
    return out


def empirical_inputs(report: ThroughputReport) -> ThroughputInputs:
    """Throughput-expression inputs measured on a finished run.

    Outage probabilities are conditioned on the queue branch and on
    whether the key condition held, so they plug straight into the
    analytic expression; lam is the empirical key-arrival rate.
    """
    b = report.branches

    def fail(secured, total):
        return 1.0 - secured / total if total else 0.0

    otp_kf = b.otp_slots - b.otp_ks
    wt_kf = b.wt_slots - b.wt_ks
    return ThroughputInputs(
        p_op_ndata=fail(b.otp_ks_secured, b.otp_ks),
        p_op_n=fail(b.otp_kf_secured, otp_kf),
        p_sop_ab_ndata=fail(b.wt_ks_secured, b.wt_ks),
        p_sop_ab_n=fail(b.wt_kf_secured, wt_kf),
        p_sop_ba_nkey=otp_kf / b.otp_slots if b.otp_slots else 0.0,
        p_sop_ba_nkey_wiretap=wt_kf / b.wt_slots if b.wt_slots else 0.0,
        lam=min(1.0, report.key_arrival_rate),
        k=report.key_ratio,
        rate_data=report.rate_data,
    )


# ---------------------------------------------------------------- sweeps

SWEEP_PARAMS = {
    "snr": ("snr_alice", "snr_bob"),
    "n_b": ("n_tx_bob",),
    "rate_data": ("rate_data",),
    "gap_ab": ("gap_ab",),
    "n_data": ("n_data_fixed",),
    "k": ("key_ratio",),
}


def apply_param(cfg: SystemConfig, parameter: str, value) -> SystemConfig:
    if parameter not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {parameter!r}; "
                         f"expected one of {sorted(SWEEP_PARAMS)}")
    names = SWEEP_PARAMS[parameter]
    if names[0] in ("n_tx_bob", "n_data_fixed", "key_ratio"):
        value = int(value)
    else:
        value = float(value)
    return cfg.replace(**{n: value for n in names})


def point_seed(seed: int, index: int, stream: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(index, stream))


def tune_n_data(cfg: SystemConfig, samples: int, rng) -> int:
    """N_data maximizing the analytic throughput at the configured K."""
    est = MonteCarloEstimator(cfg, samples, rng)
    return optimize_grid(cfg, est, k_values=[cfg.key_ratio]).best_n_data


@dataclass
class SweepRow:
    parameter: str
    value: float
    report: ThroughputReport
    seed: int


def _sweep_point(args):
    cfg, parameter, value, index, slots, seed, schemes, tune, samples = args
    pcfg = apply_param(cfg, parameter, value)
    rows = []
    for scheme in schemes:
        run_cfg = pcfg
        if scheme == "fixed" and tune and parameter != "n_data":
            nd = tune_n_data(pcfg, samples,
                             np.random.default_rng(point_seed(seed, index, 1)))
            run_cfg = pcfg.replace(n_data_fixed=nd)
        rng = np.random.default_rng(point_seed(seed, index, 0))
        report = _simulate(run_cfg, scheme, slots, rng)
        report.seed = seed
        rows.append(SweepRow(parameter, value, report, seed))
    return rows


def sweep(cfg: SystemConfig, parameter: str, grid: Sequence[float], slots: int,
          seed: int = 0, *, schemes: Sequence[str] = SCHEMES,
          tune_fixed: bool = True, tune_samples: int = 2000,
          workers: int = 1) -> list[SweepRow]:
    """Run every scheme at every grid value.

    All schemes at a grid point share the same channel stream.  With
    ``tune_fixed`` the fixed scheme's N_data is re-optimized at each point
    (for the configured K) unless N_data itself is swept.  Output does not
    depend on ``workers``.
    """
    if parameter not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {parameter!r}")
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}")
    jobs = [(cfg, parameter, v, i, slots, seed, tuple(schemes), tune_fixed,
             tune_samples) for i, v in enumerate(grid)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    return [row for rows in results for row in rows]


SWEEP_COLUMNS = ["parameter", "value", "scheme", "throughput", "ci95",
                 "otp_fraction", "sop_events", "slots", "seed", "n_data"]


def sweep_records(rows: Sequence[SweepRow]) -> list[dict]:
    out = []
    for r in rows:
        rep = r.report
        out.append({
            "parameter": r.parameter,
            "value": repr(float(r.value)),
            "scheme": rep.scheme,
            "throughput": repr(rep.secure_throughput),
            "ci95": repr(rep.ci_95),
            "otp_fraction": repr(rep.otp_fraction),
            "sop_events": rep.sop_events,
            "slots": rep.slots,
            "seed": r.seed,
            "n_data": "" if rep.n_data is None else rep.n_data,
        })
    return out
