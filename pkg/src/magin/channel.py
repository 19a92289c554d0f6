"""Air-to-ground and air-to-air uplink models.

All SINR arithmetic is in linear units (watts); dB/dBm conversions happen at
the edges.
"""

from __future__ import annotations

import numpy as np

from .config import ScenarioConfig

SPEED_OF_LIGHT = 299_792_458.0


def los_probability(h, d, cfg: ScenarioConfig):
    """Sigmoid LoS probability with the elevation angle atan(h/d) in degrees.

    ``d = 0`` is treated as looking straight up (90 degrees).
    """
    h = np.asarray(h, dtype=float)
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore"):
        angle = np.degrees(np.arctan2(h, d))
    return 1.0 / (1.0 + cfg.mu1 * np.exp(-cfg.mu2 * (angle - cfg.mu1)))


def free_space_loss_db(d, carrier_frequency: float):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("link distance must be positive")
    return 20.0 * np.log10(4.0 * np.pi * carrier_frequency * d / SPEED_OF_LIGHT)


def path_loss_db(d, h, cfg: ScenarioConfig, p_los=None):
    """Free-space loss plus the LoS/NLoS-weighted excess loss."""
    if p_los is None:
        p_los = los_probability(h, d, cfg)
    return free_space_loss_db(d, cfg.carrier_frequency) + p_los * cfg.eta_los + (1.0 - p_los) * cfg.eta_nlos


def db_to_gain(loss_db):
    return 10.0 ** (-np.asarray(loss_db, dtype=float) / 10.0)


def reference_gain(d, cfg: ScenarioConfig):
    """Distance-power-law gain used on HAPS-bound links: g0 * d^-a."""
    return cfg.ref_gain * np.asarray(d, dtype=float) ** (-cfg.pathloss_exponent)


def shannon_rate(bandwidth, sinr):
    return np.asarray(bandwidth, dtype=float) * np.log2(1.0 + np.asarray(sinr, dtype=float))


def iotd_uav_rates(serving_uav: np.ndarray, gains: np.ndarray, tx_power_w: np.ndarray,
                   active: np.ndarray, bandwidth: np.ndarray, noise_w: float) -> np.ndarray:
    """Uplink rate of every UAV-served IoTD (zero for the others).

    Parameters
    ----------
    serving_uav : (N,) int
        UAV index serving each IoTD, or -1 when the IoTD is not on a UAV.
    gains : (N, M)
        Linear channel gains.
    active : (N,) bool
        Whether the IoTD is transmitting this slot; only active co-channel
        IoTDs on the same UAV interfere.
    """
    n = serving_uav.shape[0]
    rates = np.zeros(n)
    on_uav = serving_uav >= 0
    if not on_uav.any():
        return rates
    idx = np.nonzero(on_uav)[0]
    m = serving_uav[idx]
    rx = tx_power_w[:, None] * gains  # (N, M) received power at every UAV
    # total active power landing on each UAV from its own IoTDs
    contrib = np.zeros(gains.shape[1])
    act = idx[active[idx]]
    np.add.at(contrib, serving_uav[act], rx[act, serving_uav[act]])
    signal = rx[idx, m]
    interference = contrib[m] - np.where(active[idx], signal, 0.0)
    interference = np.maximum(interference, 0.0)
    rates[idx] = shannon_rate(bandwidth[m], signal / (interference + noise_w))
    return rates


def iotd_haps_rates(on_haps: np.ndarray, d_haps: np.ndarray, tx_power_w: np.ndarray,
                    active: np.ndarray, bandwidth: float, cfg: ScenarioConfig) -> np.ndarray:
    """Uplink rate of every HAPS-associated IoTD (zero for the others)."""
    rx = tx_power_w * reference_gain(d_haps, cfg)
    interferers = on_haps & active
    total = rx[interferers].sum()
    interference = np.maximum(total - np.where(interferers, rx, 0.0), 0.0)
    sinr = rx / (interference + cfg.noise_haps_w)
    return np.where(on_haps, shannon_rate(bandwidth, sinr), 0.0)


def uav_haps_rates(relaying: np.ndarray, d_haps: np.ndarray, tx_power_w: float,
                   bandwidth: float, cfg: ScenarioConfig) -> np.ndarray:
    """Relay-link rate of every relaying UAV (zero for the others)."""
    rx = tx_power_w * reference_gain(d_haps, cfg)
    total = rx[relaying].sum()
    interference = np.maximum(total - np.where(relaying, rx, 0.0), 0.0)
    sinr = rx / (interference + cfg.noise_haps_w)
    return np.where(relaying, shannon_rate(bandwidth, sinr), 0.0)


def haps_band_split(direct_active: bool, relay_active: bool, bandwidth: float) -> tuple[float, float]:
    """(direct, relay) bandwidth; the two link classes get half each when both are in use."""
    if direct_active and relay_active:
        return bandwidth / 2.0, bandwidth / 2.0
    return bandwidth, bandwidth
