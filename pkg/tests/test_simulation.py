import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edqueue.simulation import (
    ConfigError,
    Manuscript,
    Regime,
    RejectionPolicy,
    SelectionPolicy,
    SimulationConfig,
    admit_arrival,
    classify_regime,
    generate_arrivals,
    make_rng,
    simulate,
    step_meeting,
    traffic_intensity,
)


def ms(i, t):
    return Manuscript(id=i, arrival_time=float(t))


# --- generate_arrivals ------------------------------------------------------


def test_zero_rate_yields_no_arrivals():
    assert len(generate_arrivals(0.0, 30.0, 100, make_rng(1))) == 0


def test_arrivals_deterministic_given_seed():
    a = generate_arrivals(10.0, 30.0, 50, make_rng(99))
    b = generate_arrivals(10.0, 30.0, 50, make_rng(99))
    assert np.array_equal(a, b)


def test_arrivals_sorted_and_in_range():
    arr = generate_arrivals(7.5, 12.0, 40, make_rng(5))
    assert np.all(np.diff(arr) >= 0)
    assert arr.min() >= 0.0
    assert arr.max() < 40 * 12.0


def test_poisson_calibration_over_1000_periods():
    # law-of-large-numbers oracle: total within 3*sqrt(10*1000) of 10000,
    # per-period dispersion (variance/mean) close to the Poisson value 1
    arr = generate_arrivals(10.0, 30.0, 1000, make_rng(3))
    assert abs(len(arr) - 10_000) <= 300
    counts, _ = np.histogram(arr, bins=np.arange(0.0, 30.0 * 1001, 30.0))
    dispersion = counts.var() / counts.mean()
    assert 0.9 <= dispersion <= 1.1


# --- admit_arrival -----------------------------------------------------------


@pytest.mark.parametrize("policy", list(RejectionPolicy))
def test_admit_below_cap_appends(policy):
    queue = [ms(0, 1), ms(1, 2), ms(2, 3)]
    new_queue, rejected = admit_arrival(queue, ms(3, 4), 10, policy, make_rng(0))
    assert rejected is None
    assert new_queue == queue + [ms(3, 4)]
    assert len(queue) == 3  # input untouched


def test_admit_full_queue_lifo_rejects_newcomer():
    queue = [ms(i, i) for i in range(5)]
    new_queue, rejected = admit_arrival(queue, ms(9, 9), 5, RejectionPolicy.LIFO, make_rng(0))
    assert rejected == ms(9, 9)
    assert new_queue == queue


def test_admit_full_queue_random_is_uniform():
    # 10^4 trials, each of cap+1 candidates rejected with frequency
    # 1/(cap+1) within 3 binomial standard deviations
    cap = 4
    trials = 10_000
    rng = make_rng(12345)
    queue = [ms(i, i) for i in range(cap)]
    newcomer = ms(cap, cap)
    hits = np.zeros(cap + 1, dtype=int)
    for _ in range(trials):
        _, rejected = admit_arrival(queue, newcomer, cap, RejectionPolicy.RANDOM, rng)
        hits[rejected.id] += 1
    p = 1.0 / (cap + 1)
    sigma = np.sqrt(p * (1 - p) / trials)
    assert np.all(np.abs(hits / trials - p) <= 3 * sigma)


def test_admit_random_preserves_arrival_order():
    rng = make_rng(7)
    queue = [ms(i, i) for i in range(6)]
    for j in range(6, 200):
        queue, _ = admit_arrival(queue, ms(j, j), 6, RejectionPolicy.RANDOM, rng)
        assert [m.id for m in queue] == sorted(m.id for m in queue)


def test_admit_oversized_queue_is_internal_fault():
    queue = [ms(i, i) for i in range(6)]
    with pytest.raises(RuntimeError):
        admit_arrival(queue, ms(9, 9), 5, RejectionPolicy.LIFO, make_rng(0))


def test_admit_unbounded_never_rejects():
    queue = []
    rng = make_rng(1)
    for i in range(1000):
        queue, rejected = admit_arrival(queue, ms(i, i), None, RejectionPolicy.RANDOM, rng)
        assert rejected is None
    assert len(queue) == 1000


# --- step_meeting ------------------------------------------------------------


def test_fifo_selects_oldest():
    queue = [ms(0, 1), ms(1, 2), ms(2, 3)]
    selected, remaining = step_meeting(queue, SelectionPolicy.FIFO, 2, 10.0, make_rng(0))
    assert selected == [ms(0, 1), ms(1, 2)]
    assert remaining == [ms(2, 3)]


def test_empty_queue_selects_nothing():
    selected, remaining = step_meeting([], SelectionPolicy.RANDOM, 5, 10.0, make_rng(0))
    assert selected == [] and remaining == []


def test_random_takes_whole_queue_when_below_capacity():
    queue = [ms(i, i) for i in range(7)]
    selected, remaining = step_meeting(queue, SelectionPolicy.RANDOM, 10, 10.0, make_rng(0))
    assert selected == queue and remaining == []


def test_random_selection_partitions_queue():
    rng = make_rng(21)
    queue = [ms(i, i) for i in range(20)]
    selected, remaining = step_meeting(queue, SelectionPolicy.RANDOM, 8, 100.0, rng)
    assert len(selected) == 8 and len(remaining) == 12
    assert sorted(m.id for m in selected + remaining) == list(range(20))
    # both halves keep arrival order
    assert [m.id for m in selected] == sorted(m.id for m in selected)
    assert [m.id for m in remaining] == sorted(m.id for m in remaining)


# --- simulate ----------------------------------------------------------------


def assert_conserved(trace):
    # every generated manuscript id appears exactly once across the
    # accepted/rejected/queued partition
    ids = sorted(
        [e.manuscript.id for e in trace.accepted]
        + [r.manuscript.id for r in trace.rejected]
        + [m.id for m in trace.in_queue_at_end]
    )
    assert ids == list(range(len(ids)))
    assert trace.total_arrivals == len(ids)


def config(**overrides):
    base = dict(
        lambda_per_period=10.0,
        capacity_per_meeting=10,
        period_days=30.0,
        queue_cap=50,
        selection_policy=SelectionPolicy.FIFO,
        rejection_policy=RejectionPolicy.LIFO,
        horizon_periods=10,
        warmup_periods=0,
        seed=1,
    )
    base.update(overrides)
    return SimulationConfig(**base)


def test_single_injected_arrival_decided_at_first_meeting():
    trace = simulate(config(period_days=10.0, horizon_periods=3), arrivals=[3.0])
    assert len(trace.accepted) == 1
    entry = trace.accepted[0]
    assert entry.meeting_index == 1
    assert entry.decision_time == 10.0
    assert entry.waiting_time == 7.0


def test_two_injected_arrivals_waiting_times():
    trace = simulate(config(period_days=10.0, horizon_periods=3), arrivals=[3.0, 7.0])
    assert [e.waiting_time for e in trace.accepted] == [7.0, 3.0]


def test_arrival_exactly_at_meeting_waits_for_next():
    trace = simulate(config(period_days=10.0, horizon_periods=3), arrivals=[10.0])
    assert len(trace.accepted) == 1
    assert trace.accepted[0].meeting_index == 2
    assert trace.accepted[0].waiting_time == 10.0


def test_arrival_after_last_meeting_stays_queued():
    trace = simulate(config(period_days=10.0, horizon_periods=3), arrivals=[5.0, 31.0])
    assert len(trace.accepted) == 1
    assert [m.arrival_time for m in trace.in_queue_at_end] == [31.0]
    assert trace.total_arrivals == 2


def test_conservation_critical_run():
    cfg = config(horizon_periods=10_000, warmup_periods=100, seed=77)
    trace = simulate(cfg)
    counts, _ = np.histogram(
        [e.meeting_index for e in trace.accepted],
        bins=np.arange(0.5, cfg.horizon_periods + 1.5),
    )
    assert counts.max() <= cfg.capacity_per_meeting
    assert len(trace.queue_lengths) == cfg.horizon_periods
    assert_conserved(trace)
    assert all(e.waiting_time > 0 for e in trace.accepted)


def test_bit_identical_reruns():
    cfg = config(
        horizon_periods=300,
        warmup_periods=10,
        selection_policy=SelectionPolicy.RANDOM,
        rejection_policy=RejectionPolicy.RANDOM,
        seed=4242,
    )
    t1, t2 = simulate(cfg), simulate(cfg)
    assert t1.accepted == t2.accepted
    assert t1.rejected == t2.rejected
    assert t1.in_queue_at_end == t2.in_queue_at_end
    assert t1.queue_lengths == t2.queue_lengths


def test_fifo_acceptance_order_follows_arrival_order():
    cfg = config(horizon_periods=500, seed=9)
    trace = simulate(cfg)
    by_arrival = sorted(trace.accepted, key=lambda e: e.manuscript.id)
    meetings = [e.meeting_index for e in by_arrival]
    assert meetings == sorted(meetings)


def test_fifo_bounded_delay_with_finite_cap():
    # cap 12, capacity 4 -> every accepted waiting time <= (ceil(12/4)+1)*T
    cfg = config(
        lambda_per_period=4.0,
        capacity_per_meeting=4,
        queue_cap=12,
        horizon_periods=2000,
        seed=31,
    )
    trace = simulate(cfg)
    bound = (12 // 4 + 1) * cfg.period_days
    assert max(e.waiting_time for e in trace.accepted) <= bound


def test_subcritical_majority_of_meetings_not_full():
    cfg = config(lambda_per_period=5.0, queue_cap=None, horizon_periods=500, seed=13)
    trace = simulate(cfg)
    per_meeting = {}
    for e in trace.accepted:
        per_meeting[e.meeting_index] = per_meeting.get(e.meeting_index, 0) + 1
    full = sum(1 for c in per_meeting.values() if c == cfg.capacity_per_meeting)
    assert full / cfg.horizon_periods < 0.5


def test_rejections_only_happen_at_the_cap():
    cfg = config(
        lambda_per_period=20.0,
        queue_cap=15,
        horizon_periods=400,
        rejection_policy=RejectionPolicy.RANDOM,
        seed=3,
    )
    trace = simulate(cfg)
    assert len(trace.rejected) > 0
    assert max(length for _, length in trace.queue_lengths) <= 15


def test_unsorted_injected_arrivals_rejected():
    with pytest.raises(ValueError):
        simulate(config(), arrivals=[5.0, 3.0])


@pytest.mark.parametrize(
    "overrides",
    [
        dict(lambda_per_period=-1.0),
        dict(capacity_per_meeting=0),
        dict(period_days=0.0),
        dict(queue_cap=0),
        dict(horizon_periods=0),
        dict(warmup_periods=10, horizon_periods=10),
    ],
)
def test_invalid_configs_rejected(overrides):
    with pytest.raises(ConfigError):
        config(**overrides)


@settings(max_examples=30, deadline=None)
@given(
    lam=st.floats(min_value=0.0, max_value=15.0),
    mu=st.integers(min_value=1, max_value=12),
    cap=st.one_of(st.none(), st.integers(min_value=1, max_value=40)),
    sel=st.sampled_from(list(SelectionPolicy)),
    rej=st.sampled_from(list(RejectionPolicy)),
    horizon=st.integers(min_value=2, max_value=40),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_conservation_property(lam, mu, cap, sel, rej, horizon, seed):
    cfg = SimulationConfig(
        lambda_per_period=lam,
        capacity_per_meeting=mu,
        period_days=7.0,
        queue_cap=cap,
        selection_policy=sel,
        rejection_policy=rej,
        horizon_periods=horizon,
        warmup_periods=0,
        seed=seed,
    )
    trace = simulate(cfg)
    assert_conserved(trace)
    assert all(e.waiting_time > 0 for e in trace.accepted)


# --- regime classification ----------------------------------------------------


@pytest.mark.parametrize(
    "lam,mu,rho", [(10.0, 10, 1.0), (5.0, 10, 0.5), (15.0, 10, 1.5), (0.0, 3, 0.0)]
)
def test_traffic_intensity(lam, mu, rho):
    assert traffic_intensity(lam, mu) == rho


@pytest.mark.parametrize(
    "rho,expected",
    [
        (0.5, Regime.SUBCRITICAL),
        (1.0, Regime.CRITICAL),
        (1.5, Regime.SUPERCRITICAL),
        (1.0 + 5e-10, Regime.CRITICAL),
        (1.0 - 5e-10, Regime.CRITICAL),
        (0.999999, Regime.SUBCRITICAL),
        (1.000001, Regime.SUPERCRITICAL),
    ],
)
def test_classify_regime(rho, expected):
    assert classify_regime(rho) is expected
