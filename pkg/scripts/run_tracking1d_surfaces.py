#!/usr/bin/env python3
"""Cost surfaces for the 1D tracking plant.

Evaluates the two-moment consistency cost on a log-spaced (v, w) grid three
ways: at dt = 0.1 alone, at dt = 0.5 alone, and taking the worse of the two
intervals per cell. The third surface pins its minimum near the ground truth
while the single-interval surfaces wander; the emitted CSVs are plot-ready
(columns v, w, dt, cost, log10_cost).
"""

import argparse
import os

from kfautotune.cli import run_sweep


def config(seed, dt_list, reducer, n_grid, out_dir):
    return {
        "system": "tracking1d",
        "cost": "cnis",
        "reducer": reducer,
        "dt_list": list(dt_list),
        "sim": {"n_runs": 200, "n_steps": 200, "seed": seed,
                "control": {"amplitude": 2.0, "frequency": 0.75}},
        "sweep": {"grid": {"v": {"min": 0.1, "max": 5.0, "n": n_grid, "spacing": "log"},
                           "w": {"min": 0.01, "max": 0.5, "n": n_grid, "spacing": "log"}},
                  "per_dt": False},
        "output_dir": out_dir,
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--grid", type=int, default=15)
    parser.add_argument("--out", default="out/tracking1d_surfaces")
    args = parser.parse_args()

    surfaces = [
        ("dt01", (0.1,), "max"),
        ("dt05", (0.5,), "max"),
        ("worst_of_both", (0.1, 0.5), "max"),
    ]
    for name, dt_list, reducer in surfaces:
        out_dir = os.path.join(args.out, name)
        run_sweep(config(args.seed, dt_list, reducer, args.grid, out_dir))
        print(f"surface {name}: {os.path.join(out_dir, 'sweep.csv')}")


if __name__ == "__main__":
    main()
