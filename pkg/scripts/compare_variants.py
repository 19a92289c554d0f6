"""Compare variants on matched seeds: final-window means of energy, fairness and offloading.

    python scripts/compare_variants.py --episodes 200 --window 50
"""

import argparse
import csv
import dataclasses
import sys

import numpy as np

from magin import mappo
from magin.config import VARIANTS, load_config

KEYS = ("e_all", "fairness", "mean_alpha", "reward_iotd", "reward_uav", "reward_haps", "queue_violations")


def compare(config, seeds, variants, episodes, window):
    scenario, base = load_config(config)
    rows = []
    for variant in variants:
        for seed in seeds:
            tc = dataclasses.replace(base, episodes=episodes or base.episodes, seed=seed, variant=variant)
            hist = mappo.train(scenario, tc).history[-window:]
            rows.append({"variant": variant, "seed": seed,
                         **{k: float(np.mean([h[k] for h in hist])) for k in KEYS}})
    return rows


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default="configs/toy.toml")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--variants", nargs="+", choices=VARIANTS, default=list(VARIANTS))
    p.add_argument("--episodes", type=int)
    p.add_argument("--window", type=int, default=50)
    a = p.parse_args()
    out = compare(a.config, a.seeds, a.variants, a.episodes, a.window)
    w = csv.DictWriter(sys.stdout, fieldnames=list(out[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(out)
