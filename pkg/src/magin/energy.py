"""Energy terms: UAV propulsion, IoTD/edge computing, transmission, and network totals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig


def propulsion_power(v: float, cfg: ScenarioConfig) -> float:
    """Rotary-wing forward-flight power (W) at airspeed ``v``: parasite + blade profile + induced."""
    parasite = 0.5 * cfg.rotor_d0 * cfg.air_density * cfg.rotor_solidity * cfg.rotor_area * v ** 3
    blade = cfg.rotor_p0 * (1.0 + 3.0 * v ** 2 / cfg.rotor_u_tip ** 2)
    r = v ** 2 / (2.0 * cfg.rotor_v0 ** 2)
    induced = cfg.rotor_pi * np.sqrt(np.sqrt(1.0 + r * r) - r)
    return float(parasite + blade + induced)


def fly_energy(d, v: float, cfg: ScenarioConfig):
    d = np.asarray(d, dtype=float)
    if v <= 0:
        if np.any(d > 0):
            raise ValueError("flight speed must be positive when the UAV moves")
        return np.zeros_like(d)
    return propulsion_power(v, cfg) * d / v


def hover_energy(d, v: float, tau: float, p0: float, pi: float):
    d = np.asarray(d, dtype=float)
    airborne = d / v if v > 0 else np.zeros_like(d)
    return (p0 + pi) * np.maximum(tau - airborne, 0.0)


@dataclass
class EnergyReport:
    local: np.ndarray  # (N,)
    offload_tx: np.ndarray
    edge: np.ndarray
    relay_tx: np.ndarray
    relay_edge: np.ndarray
    fly: np.ndarray  # (M,)
    hover: np.ndarray
    omega: float = 0.0

    @property
    def com2(self) -> np.ndarray:
        return self.local + self.offload_tx + self.edge + self.relay_tx + self.relay_edge

    @property
    def traj(self) -> np.ndarray:
        return self.fly + self.hover

    @property
    def e_all(self) -> float:
        return total_energy(self.com2, self.traj, self.omega)


def compute_energies(delays, *, f_local, tx_power_w, f_edge, uav_tx_power_w, f_relay_edge,
                     uav_distance, cfg: ScenarioConfig) -> EnergyReport:
    """Per-IoTD computing/communication energy and per-UAV trajectory energy for one slot."""
    w_n, w_m = cfg.switching_cap_iotd, cfg.switching_cap_edge
    f_local = np.asarray(f_local, dtype=float)
    f_edge = np.asarray(f_edge, dtype=float)
    f_relay_edge = np.asarray(f_relay_edge, dtype=float)
    return EnergyReport(
        local=w_n * f_local ** 3 * delays.local,
        offload_tx=np.asarray(tx_power_w) * delays.offload,
        edge=w_m * delays.edge * f_edge ** 3,
        relay_tx=uav_tx_power_w * delays.relay,
        relay_edge=w_m * delays.relay_edge * f_relay_edge ** 3,
        fly=fly_energy(uav_distance, cfg.uav_speed, cfg),
        hover=hover_energy(uav_distance, cfg.uav_speed, cfg.slot_duration, cfg.rotor_p0, cfg.rotor_pi),
        omega=cfg.omega,
    )


def total_energy(com2, traj, omega: float) -> float:
    return float(np.sum(com2) + omega * np.sum(traj))


def update_batteries(iotd_drain, uav_drain, iotd_slot, uav_slot, iotd_cap: float, uav_cap: float):
    """Accumulate battery drain; a device violates its budget once drain exceeds its cap."""
    iotd_drain = np.asarray(iotd_drain, dtype=float) + iotd_slot
    uav_drain = np.asarray(uav_drain, dtype=float) + uav_slot
    return iotd_drain, uav_drain, iotd_drain > iotd_cap, uav_drain > uav_cap
