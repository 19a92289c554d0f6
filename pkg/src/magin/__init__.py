"""Simulator and multi-agent PPO trainer for a UAV/HAPS mobile edge computing network."""

from .config import ScenarioConfig, TrainConfig, load_config, toy_scenario
from .env import MaginEnv, scale_action
from .mappo import evaluate, train

__version__ = "0.1.0"

__all__ = ["ScenarioConfig", "TrainConfig", "load_config", "toy_scenario", "MaginEnv", "scale_action",
           "train", "evaluate", "__version__"]
