"""Run the standard scenario sweeps (task size, local CPU, IoTD count, UAV count) for one checkpoint
or for the untrained policy.

    python scripts/sweeps.py --out runs/sweeps [--checkpoint runs/x/checkpoints/ep200.ckpt]
"""

import argparse
from pathlib import Path

from magin.cli import main

GRIDS = {
    "task-size": "0.15,0.20,0.25,0.30,0.35,0.40,0.45",
    "local-cpu": "1.0,1.5,2.0",
    "n-iotds": "40,50,60,70",
    "n-uavs": "1,2,3,4",
}


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config")
    p.add_argument("--checkpoint")
    p.add_argument("--axes", nargs="+", choices=list(GRIDS), default=list(GRIDS))
    p.add_argument("--eval-episodes", type=int, default=5)
    p.add_argument("--out", default="runs/sweeps")
    a = p.parse_args()
    for axis in a.axes:
        if a.checkpoint and axis in ("n-iotds", "n-uavs"):
            print(f"skipping {axis}: a checkpoint's network shapes fix the agent counts")
            continue
        argv = ["sweep", "--axis", axis, "--values", GRIDS[axis], "--eval-episodes", str(a.eval_episodes),
                "--out", str(Path(a.out) / axis)]
        if a.config:
            argv += ["--config", a.config]
        if a.checkpoint:
            argv += ["--checkpoint", a.checkpoint]
        if main(argv) != 0:
            raise SystemExit(f"sweep over {axis} failed")
