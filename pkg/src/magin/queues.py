"""Task arrivals, the five per-IoTD queue families, per-slot delays, and long-term delay ratios.

Every queue follows ``Q' = max(Q - g, 0) + arrivals`` with ``g = min(Q, capacity)``,
so departures never exceed the backlog. All functions accept scalars or (N,) arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig

QUEUE_NAMES = ("local", "offload", "edge", "relay", "relay_edge")


@dataclass
class TaskSet:
    size: np.ndarray  # bits
    cycles_per_bit: np.ndarray
    t_max: np.ndarray  # s


def generate_tasks(rng: np.random.Generator, cfg: ScenarioConfig, n: int | None = None) -> TaskSet:
    n = cfg.n_iotds if n is None else n
    size = rng.uniform(*cfg.task_size, n)
    cycles = rng.uniform(*cfg.cycles_per_bit, n)
    t_max = rng.uniform(*cfg.t_max, n)
    return TaskSet(size, cycles, t_max)


def split_task(j, alpha):
    """(local bits, offloaded bits) for offloading ratio ``alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha < 0.0) or np.any(alpha > 1.0):
        raise ValueError("offloading ratio must lie in [0, 1]")
    j = np.asarray(j, dtype=float)
    offload = alpha * j
    return j - offload, offload


def _serve(q, capacity, arrivals):
    q = np.asarray(q, dtype=float)
    served = np.minimum(q, capacity)
    return np.maximum(q - served, 0.0) + arrivals, served


def step_local_queue(q, j_local, f_local, cycles_per_bit, tau):
    cycles_per_bit = np.asarray(cycles_per_bit, dtype=float)
    if np.any(cycles_per_bit == 0):
        raise ValueError("cycles per bit must be positive")
    return _serve(q, tau * np.asarray(f_local, dtype=float) / cycles_per_bit, j_local)


def step_offload_queue(q, j_offload, rate, tau):
    return _serve(q, tau * np.asarray(rate, dtype=float), j_offload)


def step_edge_queue(q, arrivals, f_alloc, cycles_per_bit, tau):
    return _serve(q, tau * np.asarray(f_alloc, dtype=float) / np.asarray(cycles_per_bit, dtype=float), arrivals)


def step_relay_queues(q_relay, q_relay_edge, arrivals, relay_rate, f_haps, cycles_per_bit, tau, relayed):
    """Two-stage tandem: UAV relay buffer, then the HAPS buffer for relayed tasks.

    ``arrivals`` (bits that reached the UAV this slot) enter the relay buffer
    only where ``relayed`` is set; bits already in the pipeline keep flowing
    either way. Returns ``(q_relay', q_relay_edge', g_relay, g_relay_edge)``.
    """
    admitted = np.where(np.asarray(relayed, dtype=bool), arrivals, 0.0)
    q_relay_new, g_relay = _serve(q_relay, tau * np.asarray(relay_rate, dtype=float), admitted)
    capacity = tau * np.asarray(f_haps, dtype=float) / np.asarray(cycles_per_bit, dtype=float)
    q_relay_edge_new, g_relay_edge = _serve(q_relay_edge, capacity, g_relay)
    return q_relay_new, q_relay_edge_new, g_relay, g_relay_edge


def capped_delay(numerator, denominator, tau):
    """``min(num / den, tau)`` with 0/0 -> 0 and x/0 -> tau."""
    num = np.asarray(numerator, dtype=float)
    den = np.asarray(denominator, dtype=float)
    safe = np.where(den > 0, den, 1.0)
    ratio = np.where(den > 0, num / safe, np.where(num > 0, np.inf, 0.0))
    return np.minimum(ratio, tau)


@dataclass
class DelayReport:
    local: np.ndarray
    offload: np.ndarray
    edge: np.ndarray
    relay: np.ndarray
    relay_edge: np.ndarray
    total: np.ndarray
    deadline_violated: np.ndarray


def compute_delays(q_local, q_offload, q_edge, q_relay, q_relay_edge, *, cycles_per_bit, f_local,
                   uplink_rate, f_edge, relay_rate, f_relay_edge, t_max, tau) -> DelayReport:
    t_l = capped_delay(np.asarray(q_local) * cycles_per_bit, f_local, tau)
    t_o = capped_delay(q_offload, uplink_rate, tau)
    t_e = capped_delay(np.asarray(q_edge) * cycles_per_bit, f_edge, tau)
    t_r = capped_delay(q_relay, relay_rate, tau)
    t_re = capped_delay(np.asarray(q_relay_edge) * cycles_per_bit, f_relay_edge, tau)
    total = np.maximum(t_l, t_o + t_r + t_e + t_re)
    return DelayReport(t_l, t_o, t_e, t_r, t_re, total, total > np.asarray(t_max))


@dataclass
class QueueSet:
    """Backlogs (bits) for all IoTDs plus the bookkeeping behind conservation and long-term delays."""

    n: int
    backlog: dict = field(default_factory=dict)
    arrived: dict = field(default_factory=dict)
    departed: dict = field(default_factory=dict)
    # long-term delay accumulators
    slots: int = 0
    cum_local_arrivals: np.ndarray = None
    cum_offload_arrivals: np.ndarray = None
    cum_edge_arrivals: np.ndarray = None
    ratio_sum_local: np.ndarray = None
    ratio_sum_offload: np.ndarray = None
    ratio_sum_edge: np.ndarray = None

    def __post_init__(self):
        z = lambda: np.zeros(self.n)  # noqa: E731
        for name in QUEUE_NAMES:
            self.backlog.setdefault(name, z())
            self.arrived.setdefault(name, z())
            self.departed.setdefault(name, z())
        for name in ("cum_local_arrivals", "cum_offload_arrivals", "cum_edge_arrivals",
                     "ratio_sum_local", "ratio_sum_offload", "ratio_sum_edge"):
            if getattr(self, name) is None:
                setattr(self, name, z())

    def record(self, name: str, new_backlog, arrivals, departures) -> None:
        self.backlog[name] = np.asarray(new_backlog, dtype=float)
        self.arrived[name] = self.arrived[name] + arrivals
        self.departed[name] = self.departed[name] + departures

    def conservation_error(self) -> dict:
        """Max relative gap |arrived - departed - backlog| per queue."""
        out = {}
        for name in QUEUE_NAMES:
            gap = np.abs(self.arrived[name] - self.departed[name] - self.backlog[name])
            scale = np.maximum(self.arrived[name], 1.0)
            out[name] = float((gap / scale).max(initial=0.0))
        return out


def little_ratio(backlog, mean_arrivals):
    """Backlog over time-averaged arrivals (slots); defined 0 when nothing has arrived."""
    b = np.asarray(backlog, dtype=float)
    a = np.asarray(mean_arrivals, dtype=float)
    return np.where(a > 0, b / np.where(a > 0, a, 1.0), 0.0)


def update_longterm_delays(qs: QueueSet, *, local_backlog, offload_backlog, edge_backlog,
                           local_arrivals, offload_arrivals, edge_arrivals, tau: float):
    """Fold one slot into the running long-term delay averages; returns (Q_l, Q_o, Q_e) in seconds.

    Each average is ``tau / t * sum_i backlog(i) / mean_arrivals(i)``, the
    mean arrivals taken over slots 1..i.
    """
    qs.slots += 1
    t = qs.slots
    qs.cum_local_arrivals = qs.cum_local_arrivals + local_arrivals
    qs.cum_offload_arrivals = qs.cum_offload_arrivals + offload_arrivals
    qs.cum_edge_arrivals = qs.cum_edge_arrivals + edge_arrivals
    qs.ratio_sum_local = qs.ratio_sum_local + little_ratio(local_backlog, qs.cum_local_arrivals / t)
    qs.ratio_sum_offload = qs.ratio_sum_offload + little_ratio(offload_backlog, qs.cum_offload_arrivals / t)
    qs.ratio_sum_edge = qs.ratio_sum_edge + little_ratio(edge_backlog, qs.cum_edge_arrivals / t)
    return longterm_delays(qs, tau)


def longterm_delays(qs: QueueSet, tau: float):
    if qs.slots == 0:
        z = np.zeros(qs.n)
        return z, z.copy(), z.copy()
    k = tau / qs.slots
    return qs.ratio_sum_local * k, qs.ratio_sum_offload * k, qs.ratio_sum_edge * k
