"""Secret-key queue: state machine and steady-state analysis.

Keys arrive one packet per slot at most; K packets leave together when a
data packet is OTP-encrypted.  Arrivals at a full buffer are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class QueueError(ValueError):
    pass


class StationaryError(RuntimeError):
    pass


@dataclass(frozen=True)
class KeyQueueState:
    occupancy: int
    k: int
    q_max: int

    def __post_init__(self):
        if not 0 <= self.occupancy <= self.q_max:
            raise QueueError(
                f"occupancy {self.occupancy} outside [0, {self.q_max}]")
        if not 1 <= self.k <= self.q_max:
            raise QueueError(f"K={self.k} must lie in [1, {self.q_max}]")

    @classmethod
    def empty(cls, k: int, q_max: int) -> "KeyQueueState":
        return cls(0, k, q_max)


def otp_ready(state: KeyQueueState) -> bool:
    return state.occupancy >= state.k


def enqueue_key(state: KeyQueueState) -> KeyQueueState:
    return KeyQueueState(min(state.occupancy + 1, state.q_max), state.k,
                         state.q_max)


def dequeue_data(state: KeyQueueState) -> KeyQueueState:
    if state.occupancy < state.k:
        raise QueueError(
            f"cannot release K={state.k} keys from a queue holding "
            f"{state.occupancy}")
    return KeyQueueState(state.occupancy - state.k, state.k, state.q_max)


@dataclass(frozen=True)
class MarkovParams:
    """Per-slot key arrival probability ``lam`` and service probability ``f``.

    ``f`` is the probability that K packets are consumed in a slot where
    at least K are queued.
    """

    lam: float
    f: float
    k: int
    q_max: int

    def __post_init__(self):
        for name in ("lam", "f"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 1 <= self.k <= self.q_max:
            raise ValueError(f"K={self.k} must lie in [1, {self.q_max}]")


def transition_matrix(params: MarkovParams) -> np.ndarray:
    """Row-stochastic one-slot transition matrix on states 0..Q_max.

    Arrival and departure are independent events within the same slot:
    from q >= K the queue moves to q-K, q-K+1, q+1 or stays with
    probabilities (1-lam)f, lam f, lam(1-f), (1-lam)(1-f).  Growth beyond
    Q_max is capped.
    """
    lam, f, k, q_max = params.lam, params.f, params.k, params.q_max
    size = q_max + 1
    p = np.zeros((size, size))
    for q in range(size):
        serve = f if q >= k else 0.0
        for departs, p_d in ((1, serve), (0, 1.0 - serve)):
            for arrives, p_a in ((1, lam), (0, 1.0 - lam)):
                w = p_d * p_a
                if w == 0.0:
                    continue
                nxt = min(q - k * departs + arrives, q_max)
                p[q, nxt] += w
    return p


def stationary_exact(matrix: np.ndarray, tol: float = 1e-12,
                     max_squarings: int = 64) -> np.ndarray:
    """Steady state from powers of the transition matrix.

    The matrix is squared until its rows stop changing, the uniform
    distribution is propagated through the limit and then refined by a
    few plain iterations.  Raises StationaryError if the residual
    ``max|pi P - pi|`` does not drop below ``tol``.
    """
    p = np.asarray(matrix, dtype=float)
    n = p.shape[0]
    power = p.copy()
    for _ in range(max_squarings):
        nxt = power @ power
        # keep rows stochastic, otherwise rounding compounds with each squaring
        nxt /= nxt.sum(axis=1, keepdims=True)
        if np.max(np.abs(nxt - power)) < tol * 1e-2:
            power = nxt
            break
        power = nxt
    pi = np.full(n, 1.0 / n) @ power
    for _ in range(1000):
        pi = pi @ p
        pi = pi / pi.sum()
        residual = np.max(np.abs(pi @ p - pi))
        if residual < tol:
            return pi
    raise StationaryError(
        f"power iteration did not converge (residual {residual:.3e})")


def stationary_closed_form(lam: float, k: int, q_max: int | None = None) -> np.ndarray:
    """Steady state when K packets are always consumed as soon as present.

    pi_0 = (1-lam)/K, pi_l = 1/K for 0 < l < K, pi_K = lam/K and zero
    above K.  The vector has Q_max+1 entries (K+1 if ``q_max`` is None).
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lam must lie in [0, 1], got {lam}")
    q_max = k if q_max is None else q_max
    if not 1 <= k <= q_max:
        raise ValueError(f"K={k} must lie in [1, {q_max}]")
    pi = np.zeros(q_max + 1)
    pi[0] = (1.0 - lam) / k
    pi[1:k] = 1.0 / k
    pi[k] = lam / k
    return pi


def prob_otp_ready(lam: float, k: int) -> float:
    """Pr{queue >= K} under the closed-form steady state."""
    return lam / k


def queue_trajectory(lam: float, k: int, q_max: int, slots: int,
                     rng: np.random.Generator, f: float = 1.0) -> np.ndarray:
    """Occupancy at the start of each slot of a slot-driven Bernoulli queue.

    Starts empty.  Within a slot a ready queue releases K packets with
    probability ``f`` and a key packet arrives with probability ``lam``;
    arrivals beyond Q_max are dropped.
    """
    MarkovParams(lam, f, k, q_max)
    arrivals = rng.random(slots) < lam
    serves = rng.random(slots) < f
    occ = np.empty(slots, dtype=np.int64)
    q = 0
    for t in range(slots):
        occ[t] = q
        if q >= k and serves[t]:
            q -= k
        if arrivals[t]:
            q = min(q + 1, q_max)
    return occ


def simulate_queue(lam: float, k: int, q_max: int, slots: int,
                   rng: np.random.Generator, f: float = 1.0) -> np.ndarray:
    """Occupancy histogram (Q_max+1 bins) of :func:`queue_trajectory`."""
    occ = queue_trajectory(lam, k, q_max, slots, rng, f)
    return np.bincount(occ, minlength=q_max + 1)
