"""Deadline-prioritised IoTD association, UAV-to-HAPS relaying, and hotspot fairness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HAPS = -1


@dataclass
class AssociationMap:
    serving: np.ndarray  # (N,) UAV index, or HAPS (-1)
    relay: np.ndarray  # (N,) bool; True only for UAV-served IoTDs
    n_uavs: int = 0

    @property
    def beta(self) -> np.ndarray:
        """(N, M+1) binary matrix; column 0 is the HAPS."""
        return beta_matrix(self.serving, self.n_uavs)

    @property
    def lambda_relay(self) -> np.ndarray:
        """(N, M) relay indicators."""
        lam = np.zeros((self.serving.shape[0], self.n_uavs), dtype=int)
        rows = np.nonzero(self.relay)[0]
        lam[rows, self.serving[rows]] = 1
        return lam


def beta_matrix(serving: np.ndarray, n_uavs: int) -> np.ndarray:
    beta = np.zeros((serving.shape[0], n_uavs + 1), dtype=int)
    beta[np.arange(serving.shape[0]), serving + 1] = 1
    return beta


def associate(ground_dist: np.ndarray, t_max: np.ndarray, coverage_radius: float,
              capacity: int) -> np.ndarray:
    """Greedy association, tightest deadline first.

    Each IoTD takes the nearest UAV whose coverage disc contains it and that
    still has a free slot; everything else goes to the HAPS. Ties in deadline
    break on the lower IoTD index, ties in distance on the lower UAV index.

    Returns the (N,) serving-UAV vector with ``HAPS`` (-1) for the HAPS.
    """
    n, m = ground_dist.shape
    serving = np.full(n, HAPS, dtype=int)
    load = [0] * m
    order = np.lexsort((np.arange(n), t_max))
    in_range = ground_dist <= coverage_radius
    rank = np.argsort(ground_dist, axis=1, kind="stable")
    for i in order:
        for u in rank[i]:
            if not in_range[i, u]:
                break
            if load[u] < capacity:
                serving[i] = u
                load[u] += 1
                break
    return serving


def decide_relay(serving: np.ndarray, requested: np.ndarray, t_max: np.ndarray,
                 f_max: np.ndarray) -> np.ndarray:
    """Flag UAV-served IoTDs whose tasks are relayed to the HAPS.

    While a UAV's summed requested compute exceeds its capacity, the served
    IoTD with the loosest deadline is relayed and its request dropped.
    """
    relay = np.zeros(serving.shape[0], dtype=bool)
    for u in range(f_max.shape[0]):
        members = np.nonzero(serving == u)[0]
        if members.size == 0:
            continue
        total = float(requested[members].sum())
        # loosest deadline first; higher index first among equal deadlines
        order = members[np.lexsort((-members, -t_max[members]))]
        k = 0
        while total > f_max[u] * (1 + 1e-12) and k < order.size:
            relay[order[k]] = True
            total -= float(requested[order[k]])
            k += 1
    return relay


def hotspot_membership(positions: np.ndarray, centers: np.ndarray, radius: float) -> np.ndarray:
    """Nearest hotspot per IoTD, or -1 when farther than twice the hotspot radius from all."""
    d = np.sqrt(((positions[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1))
    nearest = d.argmin(axis=1)
    far = d[np.arange(d.shape[0]), nearest] > 2.0 * radius
    return np.where(far, -1, nearest)


def served_hotspot_counts(serving: np.ndarray, membership: np.ndarray, n_hotspots: int,
                          n_uavs: int) -> np.ndarray:
    """(H, M) number of IoTDs from hotspot h served by UAV m in one slot."""
    counts = np.zeros((n_hotspots, n_uavs))
    ok = (serving >= 0) & (membership >= 0)
    np.add.at(counts, (membership[ok], serving[ok]), 1.0)
    return counts


def jain_index(counts) -> float:
    """Jain index of one count vector; 1 for an all-zero vector."""
    x = np.asarray(counts, dtype=float)
    sq = float((x ** 2).sum())
    if sq == 0.0:
        return 1.0
    return float(x.sum() ** 2 / (x.size * sq))


def hotspot_fairness(served_counts) -> float:
    """Hotspot fairness of cumulative (H,) or (H, M) served counts, averaged over UAVs."""
    c = np.asarray(served_counts, dtype=float)
    if c.ndim == 1:
        return jain_index(c)
    return float(np.mean([jain_index(c[:, m]) for m in range(c.shape[1])]))


def fleet_fairness(served_counts) -> float:
    """Fairness reported in metrics: mean over UAVs that served any hotspot IoTD, 0 if none did.

    An idle fleet scores 0 rather than the all-zero convention of 1, so a UAV
    that never reaches a hotspot does not read as perfectly balanced.
    """
    c = np.asarray(served_counts, dtype=float)
    if c.ndim == 1:
        c = c[:, None]
    active = [m for m in range(c.shape[1]) if c[:, m].sum() > 0]
    if not active:
        return 0.0
    return float(np.mean([jain_index(c[:, m]) for m in active]))
