"""IoTD Gauss-Markov mobility, UAV polar-step kinematics, and link geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig


@dataclass
class IotdKinematics:
    """Positions (N, 2), speeds (N,), headings (N,), and per-device mean headings (N,).

    Headings are kept unwrapped; use ``np.mod(heading, 2 * np.pi)`` when observing.
    """

    position: np.ndarray
    speed: np.ndarray
    heading: np.ndarray
    mean_heading: np.ndarray

    def copy(self) -> "IotdKinematics":
        return IotdKinematics(self.position.copy(), self.speed.copy(), self.heading.copy(),
                              self.mean_heading.copy())


@dataclass
class UavKinematics:
    position: np.ndarray  # (M, 2)
    last_distance: np.ndarray  # (M,)
    last_heading: np.ndarray  # (M,)

    def copy(self) -> "UavKinematics":
        return UavKinematics(self.position.copy(), self.last_distance.copy(), self.last_heading.copy())


def step_iotd(k: IotdKinematics, cfg: ScenarioConfig, rng: np.random.Generator) -> IotdKinematics:
    """Advance every IoTD by one slot.

    Speed and heading are refreshed first; the position moves with the
    previous slot's speed and heading, then is clamped to the area.
    """
    w1, w2 = cfg.gm_speed_memory, cfg.gm_heading_memory
    n = k.speed.shape[0]
    phi = cfg.speed_noise_mean + cfg.speed_noise_std * rng.standard_normal(n)
    psi = cfg.heading_noise_mean + cfg.heading_noise_std * rng.standard_normal(n)
    speed = w1 * k.speed + (1.0 - w1) * cfg.mean_speed + math.sqrt(1.0 - w1 * w1) * phi
    heading = w2 * k.heading + (1.0 - w2) * k.mean_heading + math.sqrt(1.0 - w2 * w2) * psi
    step = (k.speed * cfg.slot_duration)[:, None] * np.stack([np.cos(k.heading), np.sin(k.heading)], axis=1)
    position = np.clip(k.position + step, 0.0, cfg.area_width)
    return IotdKinematics(position, np.maximum(speed, 0.0), heading, k.mean_heading)


def step_uav(k: UavKinematics, heading, distance, cfg: ScenarioConfig) -> tuple[UavKinematics, np.ndarray]:
    """Move each UAV by ``distance`` along ``heading``; stop at the area boundary.

    Returns the new kinematics and, per UAV, how far (summed over both axes)
    the commanded point lay outside the area.
    """
    heading = np.asarray(heading, dtype=float).reshape(-1)
    distance = np.asarray(distance, dtype=float).reshape(-1)
    eps = 1e-9
    if np.any(heading < -eps) or np.any(heading > 2 * np.pi + eps):
        raise ValueError("UAV heading must lie in [0, 2*pi]")
    if np.any(distance < -eps) or np.any(distance > cfg.d_max + eps):
        raise ValueError(f"UAV travel distance must lie in [0, {cfg.d_max}]")
    raw = k.position + distance[:, None] * np.stack([np.cos(heading), np.sin(heading)], axis=1)
    clipped = np.clip(raw, 0.0, cfg.area_width)
    violation = np.abs(raw - clipped).sum(axis=1)
    return UavKinematics(clipped, distance.copy(), heading.copy()), violation


def uav_pair_distances(positions: np.ndarray) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def horizontal_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(len(a), len(b)) ground-plane distances."""
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


@dataclass
class LinkDistances:
    iotd_uav: np.ndarray  # (N, M), 3-D
    iotd_haps: np.ndarray  # (N,)
    uav_haps: np.ndarray  # (M,)
    iotd_uav_ground: np.ndarray  # (N, M), horizontal only


def link_distances(iotd_pos: np.ndarray, uav_pos: np.ndarray, cfg: ScenarioConfig,
                   haps_pos: np.ndarray | None = None) -> LinkDistances:
    """3-D link lengths; the HAPS hovers above the area centre unless ``haps_pos`` is given."""
    if haps_pos is None:
        haps_pos = np.array([cfg.area_width / 2, cfg.area_width / 2])
    ground = horizontal_distances(iotd_pos, uav_pos)
    d_nm = np.sqrt(ground ** 2 + cfg.uav_altitude ** 2)
    d_n0 = np.sqrt(((iotd_pos - haps_pos) ** 2).sum(axis=1) + cfg.haps_altitude ** 2)
    d_m0 = np.sqrt(((uav_pos - haps_pos) ** 2).sum(axis=1) + (cfg.uav_altitude - cfg.haps_altitude) ** 2)
    return LinkDistances(d_nm, d_n0, d_m0, ground)
