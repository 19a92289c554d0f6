"""Train every variant on one scenario and write tidy learning curves.

    python scripts/train_curves.py --config configs/toy.toml --seeds 0 1 2 --out runs/curves
"""

import argparse
from pathlib import Path

from magin.cli import main
from magin.config import VARIANTS


def run(config: str, seeds, variants, out: Path, episodes: int | None) -> None:
    inputs = []
    for variant in variants:
        for seed in seeds:
            run_dir = out / f"{variant}_s{seed}"
            argv = ["train", "--config", config, "--variant", variant, "--seed", str(seed), "--out", str(run_dir)]
            if episodes is not None:
                argv += ["--episodes", str(episodes)]
            if main(argv) != 0:
                raise SystemExit(f"training failed for {variant} seed {seed}")
            inputs.append(f"{variant}_s{seed}={run_dir / 'metrics.csv'}")
    if main(["plotdata", *inputs, "--out", str(out / "curves.csv")]) != 0:
        raise SystemExit("plotdata failed")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default="configs/toy.toml")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--variants", nargs="+", choices=VARIANTS, default=list(VARIANTS))
    p.add_argument("--episodes", type=int)
    p.add_argument("--out", default="runs/curves")
    a = p.parse_args()
    run(a.config, a.seeds, a.variants, Path(a.out), a.episodes)
