import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magin import queues
from magin.config import MB, ScenarioConfig

CFG = ScenarioConfig()


def test_degenerate_task_size(rng):
    cfg = dataclasses.replace(CFG, task_size=(0.3 * MB, 0.3 * MB))
    assert np.all(queues.generate_tasks(rng, cfg).size == 2.4e6)


def test_task_size_mean(rng):
    size = queues.generate_tasks(rng, CFG, n=100_000).size
    assert abs(size.mean() - 0.3 * MB) < 0.01 * 0.3 * MB


def test_default_tasks_inside_ranges(rng):
    t = queues.generate_tasks(rng, CFG, n=10_000)
    assert np.all((t.size >= 0.15 * MB) & (t.size <= 0.45 * MB))
    assert np.all((t.cycles_per_bit >= CFG.cycles_per_bit[0]) & (t.cycles_per_bit <= CFG.cycles_per_bit[1]))
    assert np.all((t.t_max >= CFG.t_max[0]) & (t.t_max <= CFG.t_max[1]))


def test_split_task():
    assert queues.split_task(1e6, 0.0) == (1e6, 0.0)
    assert queues.split_task(1e6, 1.0) == (0.0, 1e6)
    assert queues.split_task(1e6, 0.25) == (750_000.0, 250_000.0)
    with pytest.raises(ValueError):
        queues.split_task(1e6, 1.2)


@given(st.floats(0, 1e7), st.floats(0, 1))
def test_split_sums_exactly(j, a):
    lo, off = queues.split_task(j, a)
    assert lo + off == pytest.approx(j, rel=1e-15, abs=1e-9)
    assert lo >= 0 and off >= 0


def test_local_queue_examples():
    q, g = queues.step_local_queue(1e6, 5.0, 1e9, 1000.0, 0.1)
    assert g == pytest.approx(1e5) and q == pytest.approx(9e5 + 5.0)
    q, g = queues.step_local_queue(0.0, 7.0, 1e9, 1000.0, 0.1)
    assert (q, g) == (7.0, 0.0)
    q, g = queues.step_local_queue(10.0, 7.0, 1e9, 1000.0, 0.1)
    assert (q, g) == (7.0, 10.0)
    with pytest.raises(ValueError):
        queues.step_local_queue(1.0, 1.0, 1e9, 0.0, 0.1)


def test_offload_and_edge_queue_examples():
    q, g = queues.step_offload_queue(1e6, 3.0, 1e6, 0.5)
    assert (g, q) == (5e5, 5e5 + 3.0)
    assert queues.step_offload_queue(0.0, 3.0, 1e6, 0.5) == (3.0, 0.0)
    q, g = queues.step_edge_queue(1e6, 2.0, 1e9, 1000.0, 0.1)
    assert (g, q) == pytest.approx((1e5, 9e5 + 2.0))
    assert queues.step_edge_queue(50.0, 2.0, 1e9, 1000.0, 0.1) == (2.0, 50.0)


def test_relay_idle_is_zero():
    out = queues.step_relay_queues(0.0, 0.0, 123.0, 1e6, 1e9, 900.0, 2.0, False)
    assert out == (0.0, 0.0, 0.0, 0.0)


def test_relay_full_drain_into_haps_buffer():
    q_r, q_re, g_r, g_re = queues.step_relay_queues(1e5, 0.0, 0.0, 1e6, 1e9, 900.0, 2.0, True)
    assert g_r == 1e5 and q_r == 0.0
    assert q_re == 1e5 and g_re == 0.0


def test_relay_two_slot_tandem_oracle():
    # stage 1 capacity 400 bits/slot, stage 2 capacity 300 bits/slot
    tau, rate, s = 2.0, 200.0, 10.0
    f = 300.0 * s / tau
    q_r, q_re = 0.0, 0.0
    hand = [(1000.0, 0.0), (600.0 + 500.0, 400.0)]  # backlogs after each slot
    for (want_r, want_re), arrivals in zip(hand, (1000.0, 500.0)):
        q_r, q_re, g_r, g_re = queues.step_relay_queues(q_r, q_re, arrivals, rate, f, s, tau, True)
        assert (q_r, q_re) == pytest.approx((want_r, want_re))
    # third slot, no arrivals: 400 leave stage 1, 300 leave stage 2
    q_r, q_re, g_r, g_re = queues.step_relay_queues(q_r, q_re, 0.0, rate, f, s, tau, False)
    assert (g_r, g_re, q_r, q_re) == pytest.approx((400.0, 300.0, 700.0, 500.0))


def test_capped_delay_rules():
    assert queues.capped_delay(0.0, 0.0, 2.0) == 0.0
    assert queues.capped_delay(5.0, 0.0, 2.0) == 2.0
    assert queues.capped_delay(1.0, 10.0, 2.0) == pytest.approx(0.1)


def _delays(**kw):
    base = dict(q_local=0.0, q_offload=0.0, q_edge=0.0, q_relay=0.0, q_relay_edge=0.0)
    base.update({k: kw.pop(k) for k in list(kw) if k in base})
    args = dict(cycles_per_bit=1000.0, f_local=1e9, uplink_rate=1e6, f_edge=1e9, relay_rate=1e6,
                f_relay_edge=1e9, t_max=0.3, tau=2.0)
    args.update(kw)
    return queues.compute_delays(**base, **args)


def test_delay_examples():
    assert _delays().total == 0.0
    d = _delays(q_local=5e4)  # 5e4 bits * 1000 cycles / 1e9 Hz
    assert d.total == pytest.approx(0.05)
    assert not d.deadline_violated
    assert _delays(q_edge=10.0, f_edge=0.0).edge == 2.0


@given(st.lists(st.floats(0, 1e8), min_size=5, max_size=5), st.floats(0.1, 0.5))
def test_delay_components_capped_and_composed(q, t_max):
    d = _delays(q_local=q[0], q_offload=q[1], q_edge=q[2], q_relay=q[3], q_relay_edge=q[4], t_max=t_max)
    parts = (d.local, d.offload, d.edge, d.relay, d.relay_edge)
    assert all(0.0 <= p <= 2.0 for p in parts)
    assert d.total == max(d.local, d.offload + d.relay + d.edge + d.relay_edge)
    assert bool(d.deadline_violated) == (d.total > t_max)


def _longterm(backlogs, arrivals, tau=2.0):
    qs = queues.QueueSet(1)
    out = None
    for b, a in zip(backlogs, arrivals):
        out = queues.update_longterm_delays(qs, local_backlog=b, offload_backlog=b, edge_backlog=b,
                                            local_arrivals=a, offload_arrivals=a, edge_arrivals=a, tau=tau)
    return out


def test_longterm_stationary_ratio():
    ql, qo, qe = _longterm([3000.0] * 20, [1000.0] * 20)
    assert ql[0] == pytest.approx(3.0 * 2.0) and qo[0] == qe[0] == ql[0]


def test_longterm_zero_arrivals():
    assert _longterm([0.0] * 5, [0.0] * 5)[0][0] == 0.0


def test_longterm_single_slot_unit_case():
    assert _longterm([500.0], [500.0], tau=1.0)[0][0] == pytest.approx(1.0)


def test_longterm_before_any_slot():
    ql, qo, qe = queues.longterm_delays(queues.QueueSet(3), 2.0)
    assert np.all(ql == 0) and ql.shape == (3,)


@given(st.lists(st.tuples(st.floats(0, 1e6), st.floats(0, 1e7)), min_size=1, max_size=60))
def test_queue_conservation(steps):
    qs = queues.QueueSet(1)
    q = np.zeros(1)
    for arrivals, capacity in steps:
        q_new, g = queues._serve(q, capacity, arrivals)
        assert g <= q + 1e-9 and q_new >= 0
        qs.record("local", q_new, arrivals, g)
        q = q_new
    assert qs.conservation_error()["local"] < 1e-9
