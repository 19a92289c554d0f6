"""Scenario and training parameters, config-file loading, and RNG streams.

Defaults describe the reference scenario and trainer. Slot length, rotor
constants and penalty weights are model choices fixed here.
Units are SI unless the field name says otherwise (``*_dbm``, ``*_db``).
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np

try:  # Python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as _toml

MB = 8e6  # bits per megabyte
SEED_ENV_VAR = "MAGIN_SEED"
VARIANTS = ("mappo-bd", "mappo-nd", "po-mappo-bd")


class ConfigError(ValueError):
    """Raised for unparseable config files or parameter values that break an invariant."""


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


Range = tuple[float, float]
_UNIT_INTERVAL = ("gm_speed_memory", "gm_heading_memory", "hotspot_fraction")


@dataclass(frozen=True)
class ScenarioConfig:
    # geometry / topology
    area_width: float = 1000.0
    n_iotds: int = 70
    n_uavs: int = 3
    n_hotspots: int = 4
    hotspot_radius: float = 100.0
    hotspot_fraction: float = 0.8
    uav_starts: tuple[tuple[float, float], ...] = ((100.0, 800.0), (200.0, 100.0), (500.0, 800.0))

    # time
    slot_duration: float = 2.0
    episode_length: int = 50

    # aerial nodes
    haps_altitude: float = 20_000.0
    uav_altitude: float = 100.0
    uav_coverage_radius: float = 100.0
    uav_capacity: int = 10
    uav_speed: float = 25.0
    d_min: float = 20.0

    # channel
    bandwidth_haps: float = 100e6
    bandwidth_uav: Range = (20e6, 45e6)
    noise_haps_dbm: float = -130.0
    noise_uav_dbm: float = -144.0
    eta_los: float = 0.1
    eta_nlos: float = 21.0
    mu1: float = 4.88
    mu2: float = 0.43
    carrier_frequency: float = 0.1e9
    pathloss_exponent: float = 2.0
    ref_gain_db: float = -40.0
    tx_power_iotd_dbm: Range = (20.0, 23.0)
    tx_power_uav_dbm: float = 30.0

    # computing
    f_local: Range = (1e9, 2e9)
    f_uav_max: Range = (18e9, 20e9)
    f_haps_max: float = 100e9
    switching_cap_iotd: float = 1e-28
    switching_cap_edge: float = 1e-28

    # tasks
    task_size: Range = (0.15 * MB, 0.45 * MB)
    t_max: Range = (0.1, 0.5)
    cycles_per_bit: Range = (800.0, 1000.0)

    # rotary-wing propulsion
    rotor_p0: float = 79.86
    rotor_pi: float = 88.63
    rotor_u_tip: float = 120.0
    rotor_v0: float = 4.03
    rotor_d0: float = 0.6
    rotor_solidity: float = 0.05
    air_density: float = 1.225
    rotor_area: float = 0.503

    # long-term queue-delay bounds (s)
    q_max_local: float = 0.14
    q_max_offload: float = 0.05
    q_max_edge: float = 0.10

    # energy / batteries
    omega: float = 0.001
    battery_iotd: float = 1e3
    battery_uav: float = 1e5

    # reward shaping
    psi1: float = 10.0
    psi2: float = 10.0
    psi3: float = 10.0
    psi4: float = 10.0
    mu_flyout: float = 0.01
    mu_collision: float = 1.0
    mu_guide: float = 1.0

    # Gauss-Markov mobility; mean heading is drawn per IoTD at reset
    gm_speed_memory: float = 0.8
    gm_heading_memory: float = 0.8
    mean_speed: float = 0.5
    speed_noise_mean: float = 0.0
    speed_noise_std: float = 0.2
    heading_noise_mean: float = 0.0
    heading_noise_std: float = 0.3

    @property
    def d_max(self) -> float:
        return self.uav_speed * self.slot_duration

    @property
    def noise_haps_w(self) -> float:
        return float(dbm_to_watts(self.noise_haps_dbm))

    @property
    def noise_uav_w(self) -> float:
        return float(dbm_to_watts(self.noise_uav_dbm))

    @property
    def tx_power_uav_w(self) -> float:
        return float(dbm_to_watts(self.tx_power_uav_dbm))

    @property
    def ref_gain(self) -> float:
        return 10.0 ** (self.ref_gain_db / 10.0)

    def validate(self) -> None:
        positive_ints = ("n_iotds", "n_uavs", "n_hotspots", "episode_length", "uav_capacity")
        for name in positive_ints:
            if int(getattr(self, name)) <= 0:
                raise ConfigError(f"{name} must be positive")
        non_negative = ("task_size", "omega", "psi1", "psi2", "psi3", "psi4",
                        "mu_flyout", "mu_collision", "mu_guide", "mean_speed",
                        "speed_noise_std", "heading_noise_std")
        dbm = ("noise_haps_dbm", "noise_uav_dbm", "tx_power_iotd_dbm", "tx_power_uav_dbm",
               "ref_gain_db", "speed_noise_mean", "heading_noise_mean", "uav_starts")
        for f in fields(self):
            if f.name in positive_ints or f.name in dbm:
                continue
            value = getattr(self, f.name)
            values = value if isinstance(value, tuple) else (value,)
            if isinstance(value, tuple):
                if len(value) != 2:
                    raise ConfigError(f"{f.name} must be a [min, max] pair")
                if value[0] > value[1]:
                    raise ConfigError(f"{f.name} range must have min <= max")
            for v in values:
                if not math.isfinite(v):
                    raise ConfigError(f"{f.name} must be finite")
                if f.name in non_negative:
                    if v < 0:
                        raise ConfigError(f"{f.name} must be non-negative")
                elif v <= 0 and f.name not in _UNIT_INTERVAL:
                    raise ConfigError(f"{f.name} must be positive")
        for name in _UNIT_INTERVAL:
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        lo, hi = self.tx_power_iotd_dbm
        if lo > hi:
            raise ConfigError("tx_power_iotd_dbm range must have min <= max")
        for start in self.uav_starts:
            if len(start) != 2 or not all(0.0 <= c <= self.area_width for c in start):
                raise ConfigError("uav_starts entries must be [x, y] pairs inside the area")


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 500
    ppo_epochs: int = 10
    actor_lr_iotd: float = 1e-3
    critic_lr_iotd: float = 2e-3
    actor_lr_uav: float = 1e-4
    critic_lr_uav: float = 1e-3
    actor_lr_haps: float = 1e-3
    critic_lr_haps: float = 2e-3
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    entropy_coef: float = 0.1
    seed: int = 0
    variant: str = "mappo-bd"
    hidden: tuple[int, ...] = (64, 64)
    minibatches: int = 1
    rollout_episodes: int = 1
    max_grad_norm: float = 0.5
    checkpoint_every: int = 0

    def validate(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must lie in (0, 1)")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigError("gae_lambda must lie in [0, 1]")
        if self.clip <= 0:
            raise ConfigError("clip must be positive")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {', '.join(VARIANTS)}")
        if self.episodes < 0 or self.ppo_epochs < 0:
            raise ConfigError("episodes and ppo_epochs must be non-negative")
        if self.minibatches < 1 or self.rollout_episodes < 1:
            raise ConfigError("minibatches and rollout_episodes must be >= 1")
        if any(h <= 0 for h in self.hidden):
            raise ConfigError("hidden layer sizes must be positive")
        for name in ("actor_lr_iotd", "critic_lr_iotd", "actor_lr_uav", "critic_lr_uav",
                     "actor_lr_haps", "critic_lr_haps", "max_grad_norm"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.entropy_coef < 0:
            raise ConfigError("entropy_coef must be non-negative")


_SCENARIO_FIELDS = {f.name: f for f in fields(ScenarioConfig)}
_TRAIN_FIELDS = {f.name: f for f in fields(TrainConfig)}


def _coerce(key: str, default: Any, value: Any) -> Any:
    """Convert a parsed TOML value to the type of the field's default."""
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(default, str):
            if not isinstance(value, str):
                raise TypeError
            return value
        if isinstance(default, tuple):
            if not isinstance(value, (list, tuple)):
                raise TypeError
            if default and isinstance(default[0], tuple):
                return tuple(tuple(float(c) for c in item) for item in value)
            if key == "hidden":
                return tuple(int(v) for v in value)
            return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"bad value for key '{key}': {value!r}")


def configs_from_mapping(data: dict[str, Any]) -> tuple[ScenarioConfig, TrainConfig]:
    scen_kw: dict[str, Any] = {}
    train_kw: dict[str, Any] = {}
    defaults_s, defaults_t = ScenarioConfig(), TrainConfig()
    for key, value in data.items():
        if key in _SCENARIO_FIELDS:
            scen_kw[key] = _coerce(key, getattr(defaults_s, key), value)
        elif key in _TRAIN_FIELDS:
            train_kw[key] = _coerce(key, getattr(defaults_t, key), value)
        else:
            raise ConfigError(f"unknown config key '{key}'")
    scenario = ScenarioConfig(**scen_kw)
    train = TrainConfig(**train_kw)
    scenario.validate()
    train.validate()
    return scenario, train


def loads_config(text: str) -> tuple[ScenarioConfig, TrainConfig]:
    try:
        data = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat; offending key '{nested[0]}'")
    return configs_from_mapping(data)


def load_config(path: str | os.PathLike | None = None) -> tuple[ScenarioConfig, TrainConfig]:
    """Load a flat TOML config; absent keys keep their defaults.

    The ``MAGIN_SEED`` environment variable, when set, overrides ``seed``.
    """
    text = "" if path is None else Path(path).read_text()
    scenario, train = loads_config(text)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            train = dataclasses.replace(train, seed=int(env_seed))
        except ValueError as exc:
            raise ConfigError(f"bad value for {SEED_ENV_VAR}: {env_seed!r}") from exc
    return scenario, train


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return str(value)


def dumps_config(scenario: ScenarioConfig, train: TrainConfig) -> str:
    lines = ["# scenario"]
    lines += [f"{f.name} = {_fmt(getattr(scenario, f.name))}" for f in fields(scenario)]
    lines.append("# training")
    lines += [f"{f.name} = {_fmt(getattr(train, f.name))}" for f in fields(train)]
    return "\n".join(lines) + "\n"


def make_rng(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent, reproducible generator for ``(seed, stream_id)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))))


def toy_scenario(**overrides: Any) -> ScenarioConfig:
    """Desk-scale scenario (8 IoTDs, one UAV, two hotspots) used by the directional checks."""
    base = dict(n_iotds=8, n_uavs=1, n_hotspots=2)
    base.update(overrides)
    cfg = ScenarioConfig(**base)
    cfg.validate()
    return cfg
