"""Discrete-event simulation of an editorial queue with periodic batch service.

Manuscripts arrive as a Poisson stream into a bounded queue. At fixed
intervals (Editorial Board meetings, one per publishing period) up to a
fixed number of queued manuscripts are accepted for publication, chosen
either oldest-first (FIFO) or uniformly at random (RANDOM). When the queue
is full, an arriving manuscript triggers a rejection, either of itself
(LIFO) or of a uniformly drawn candidate among queue plus newcomer (RANDOM).

Randomness comes from numpy's PCG64 generator; a run is bit-reproducible
given the config seed. Arrival generation and policy decisions use two
independent child streams spawned from the seed, so a run with injected
arrivals consumes the same decision stream as a generated one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "SelectionPolicy",
    "RejectionPolicy",
    "Regime",
    "ConfigError",
    "SimulationConfig",
    "Manuscript",
    "AcceptedEntry",
    "RejectedEntry",
    "SimulationTrace",
    "make_rng",
    "generate_arrivals",
    "admit_arrival",
    "step_meeting",
    "simulate",
    "traffic_intensity",
    "classify_regime",
]

#: tolerance for calling a traffic intensity exactly critical
CRITICAL_TOLERANCE = 1e-9


class SelectionPolicy(Enum):
    """How a meeting picks manuscripts from the queue."""

    FIFO = "fifo"
    RANDOM = "random"


class RejectionPolicy(Enum):
    """Which manuscript is dropped when an arrival finds the queue full."""

    LIFO = "lifo"
    RANDOM = "random"


class Regime(Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


class ConfigError(ValueError):
    """Invalid simulation configuration; `field` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


@dataclass(frozen=True)
class SimulationConfig:
    """All parameters of one simulation run.

    ``queue_cap=None`` means an unbounded queue. ``lambda_per_period`` is the
    expected number of arrivals per publishing period, so the traffic
    intensity is ``lambda_per_period / capacity_per_meeting``.
    """

    lambda_per_period: float = 10.0
    capacity_per_meeting: int = 10
    period_days: float = 30.0
    queue_cap: Optional[int] = 50
    selection_policy: SelectionPolicy = SelectionPolicy.FIFO
    rejection_policy: RejectionPolicy = RejectionPolicy.LIFO
    horizon_periods: int = 1000
    warmup_periods: int = 100
    seed: int = 1

    def __post_init__(self):
        if not math.isfinite(self.lambda_per_period) or self.lambda_per_period < 0:
            raise ConfigError("lambda_per_period", "must be a finite value >= 0")
        if self.capacity_per_meeting < 1:
            raise ConfigError("capacity_per_meeting", "must be >= 1")
        if not math.isfinite(self.period_days) or self.period_days <= 0:
            raise ConfigError("period_days", "must be a finite value > 0")
        if self.queue_cap is not None and self.queue_cap < 1:
            raise ConfigError("queue_cap", "must be >= 1 or unbounded")
        if self.horizon_periods < 1:
            raise ConfigError("horizon_periods", "must be >= 1")
        if self.warmup_periods < 0:
            raise ConfigError("warmup_periods", "must be >= 0")
        if self.warmup_periods >= self.horizon_periods:
            raise ConfigError("warmup_periods", "must be < horizon_periods")

    @property
    def traffic_intensity(self) -> float:
        return traffic_intensity(self.lambda_per_period, self.capacity_per_meeting)


@dataclass(frozen=True, slots=True)
class Manuscript:
    """One submitted manuscript; ids increase with arrival time."""

    id: int
    arrival_time: float


@dataclass(frozen=True, slots=True)
class AcceptedEntry:
    manuscript: Manuscript
    decision_time: float
    meeting_index: int

    @property
    def waiting_time(self) -> float:
        return self.decision_time - self.manuscript.arrival_time


@dataclass(frozen=True, slots=True)
class RejectedEntry:
    manuscript: Manuscript
    rejection_time: float


@dataclass(frozen=True)
class SimulationTrace:
    """Full outcome of one run.

    ``queue_lengths`` holds one ``(meeting_index, length)`` pair per meeting,
    sampled immediately before selection. Conservation holds exactly:
    ``len(accepted) + len(rejected) + len(in_queue_at_end)`` equals the
    total number of arrivals.
    """

    accepted: list[AcceptedEntry]
    rejected: list[RejectedEntry]
    in_queue_at_end: list[Manuscript]
    queue_lengths: list[tuple[int, int]]
    config: SimulationConfig

    @property
    def total_arrivals(self) -> int:
        return len(self.accepted) + len(self.rejected) + len(self.in_queue_at_end)


def make_rng(seed) -> np.random.Generator:
    """Seeded PCG64 generator (numpy's documented, portable default)."""
    return np.random.Generator(np.random.PCG64(seed))


def traffic_intensity(lambda_per_period: float, capacity_per_meeting: int) -> float:
    """Arrival rate over service rate, both measured per publishing period."""
    if capacity_per_meeting < 1:
        raise ConfigError("capacity_per_meeting", "must be >= 1")
    return lambda_per_period / capacity_per_meeting


def classify_regime(rho: float) -> Regime:
    """Three-way split of queue behaviour by traffic intensity."""
    if abs(rho - 1.0) <= CRITICAL_TOLERANCE:
        return Regime.CRITICAL
    return Regime.SUBCRITICAL if rho < 1.0 else Regime.SUPERCRITICAL


def generate_arrivals(
    lambda_per_period: float,
    period_days: float,
    horizon_periods: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Homogeneous Poisson arrival times on [0, horizon_periods * period_days).

    The rate is ``lambda_per_period / period_days`` per day. Times are drawn
    as cumulative exponential gaps, so the output is sorted and fully
    determined by the generator state.
    """
    if lambda_per_period < 0:
        raise ConfigError("lambda_per_period", "must be >= 0")
    if period_days <= 0:
        raise ConfigError("period_days", "must be > 0")
    if horizon_periods < 1:
        raise ConfigError("horizon_periods", "must be >= 1")
    if lambda_per_period == 0:
        return np.empty(0, dtype=float)

    end = horizon_periods * period_days
    scale = period_days / lambda_per_period  # mean gap in days
    chunks = []
    total = 0.0
    while total < end:
        gaps = rng.exponential(scale, size=1024)
        times = total + np.cumsum(gaps)
        chunks.append(times)
        total = times[-1]
    arrivals = np.concatenate(chunks)
    return arrivals[arrivals < end]


def _admit_in_place(
    queue: list[Manuscript],
    manuscript: Manuscript,
    queue_cap: Optional[int],
    rejection_policy: RejectionPolicy,
    rng: np.random.Generator,
) -> Optional[Manuscript]:
    """Mutating core of admit_arrival; returns the rejected manuscript, if any."""
    if queue_cap is None or len(queue) < queue_cap:
        queue.append(manuscript)
        return None
    if len(queue) > queue_cap:
        raise RuntimeError(
            f"queue length {len(queue)} exceeds cap {queue_cap}; "
            "internal consistency violated"
        )
    if rejection_policy is RejectionPolicy.LIFO:
        # Newest loses: the arriving manuscript bounces, queue untouched.
        return manuscript
    # RANDOM: one of cap+1 candidates (queue plus newcomer) drops uniformly.
    victim_idx = int(rng.integers(0, len(queue) + 1))
    if victim_idx == len(queue):
        return manuscript
    victim = queue.pop(victim_idx)
    queue.append(manuscript)
    return victim


def admit_arrival(
    queue: Sequence[Manuscript],
    manuscript: Manuscript,
    queue_cap: Optional[int],
    rejection_policy: RejectionPolicy,
    rng: np.random.Generator,
) -> tuple[list[Manuscript], Optional[Manuscript]]:
    """Offer one arriving manuscript to the queue.

    Below the cap the manuscript is appended. At the cap the rejection
    policy picks the loser: LIFO rejects the newcomer, RANDOM rejects a
    uniform draw from queue plus newcomer. Returns the new queue (arrival
    order preserved) and the rejected manuscript or None.
    """
    new_queue = list(queue)
    rejected = _admit_in_place(new_queue, manuscript, queue_cap, rejection_policy, rng)
    return new_queue, rejected


def step_meeting(
    queue: Sequence[Manuscript],
    selection_policy: SelectionPolicy,
    capacity_per_meeting: int,
    meeting_time: float,
    rng: np.random.Generator,
) -> tuple[list[Manuscript], list[Manuscript]]:
    """Run one meeting: select up to capacity manuscripts from the queue.

    FIFO takes the oldest; RANDOM takes a uniform sample without
    replacement. Both the selected list and the remaining queue preserve
    arrival order. The caller guarantees every queued manuscript arrived
    before ``meeting_time``.
    """
    queue = list(queue)
    k = min(capacity_per_meeting, len(queue))
    if k == 0:
        return [], queue
    if selection_policy is SelectionPolicy.FIFO or k == len(queue):
        return queue[:k], queue[k:]
    chosen = np.sort(rng.choice(len(queue), size=k, replace=False))
    chosen_set = set(int(i) for i in chosen)
    selected = [queue[int(i)] for i in chosen]
    remaining = [m for i, m in enumerate(queue) if i not in chosen_set]
    return selected, remaining


def _check_injected(arrivals) -> np.ndarray:
    times = np.asarray(arrivals, dtype=float)
    if times.ndim != 1:
        raise ValueError("injected arrivals must be a 1-d sequence of times")
    if times.size and (not np.all(np.isfinite(times)) or times[0] < 0):
        raise ValueError("injected arrival times must be finite and >= 0")
    if np.any(np.diff(times) < 0):
        raise ValueError("injected arrival times must be non-decreasing")
    return times


def simulate(
    config: SimulationConfig,
    arrivals: Optional[Sequence[float]] = None,
) -> SimulationTrace:
    """Run the full model and return its trace.

    ``arrivals`` replaces the Poisson stream with an explicit sorted list of
    arrival times (used in tests); the policy decision stream is unaffected.
    Meetings happen at t = k * period_days for k = 1..horizon_periods; an
    arrival exactly at a meeting instant waits for the next meeting, so
    every accepted waiting time is strictly positive.
    """
    arrival_ss, decision_ss = np.random.SeedSequence(config.seed).spawn(2)
    decision_rng = make_rng(decision_ss)
    if arrivals is None:
        times = generate_arrivals(
            config.lambda_per_period,
            config.period_days,
            config.horizon_periods,
            make_rng(arrival_ss),
        )
    else:
        times = _check_injected(arrivals)

    queue: list[Manuscript] = []
    accepted: list[AcceptedEntry] = []
    rejected: list[RejectedEntry] = []
    queue_lengths: list[tuple[int, int]] = []
    i = 0
    n = len(times)
    for k in range(1, config.horizon_periods + 1):
        meeting_time = k * config.period_days
        while i < n and times[i] < meeting_time:
            m = Manuscript(id=i, arrival_time=float(times[i]))
            loser = _admit_in_place(
                queue, m, config.queue_cap, config.rejection_policy, decision_rng
            )
            if loser is not None:
                rejected.append(RejectedEntry(loser, rejection_time=float(times[i])))
            i += 1
        queue_lengths.append((k, len(queue)))
        selected, queue = step_meeting(
            queue,
            config.selection_policy,
            config.capacity_per_meeting,
            meeting_time,
            decision_rng,
        )
        accepted.extend(
            AcceptedEntry(m, decision_time=meeting_time, meeting_index=k)
            for m in selected
        )
    # Injected lists may extend past the last meeting; those arrivals still
    # face admission (and possible rejection) but are never decided.
    while i < n:
        m = Manuscript(id=i, arrival_time=float(times[i]))
        loser = _admit_in_place(
            queue, m, config.queue_cap, config.rejection_policy, decision_rng
        )
        if loser is not None:
            rejected.append(RejectedEntry(loser, rejection_time=float(times[i])))
        i += 1

    return SimulationTrace(
        accepted=accepted,
        rejected=rejected,
        in_queue_at_end=queue,
        queue_lengths=queue_lengths,
        config=config,
    )
