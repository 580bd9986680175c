#!/usr/bin/env python3
"""Repeated mass-spring-damper auto-tuning campaigns.

Runs a batch of independent TPBO campaigns against the fixed ground truth
(v, w) = (1, 0.1) and reports the median/mean/variance of the recovered noise
intensities, alongside optional baseline methods. Writes one summary CSV and
one history CSV per repeat.
"""

import argparse
import csv
import os

import numpy as np

import kfautotune as kf


def run_method(method, problem_cnis, problem_jnis, seed, n_seed, n_iter):
    if method == "tpbo_cnis":
        return kf.tune_tpbo(problem_cnis, n_seed=n_seed, n_iter=n_iter, seed=seed)
    if method == "tpbo_jnis":
        return kf.tune_tpbo(problem_jnis, n_seed=n_seed, n_iter=n_iter, seed=seed)
    if method == "gpbo_jnis":
        return kf.tune_gpbo_baseline(problem_jnis, n_seed=n_seed, n_iter=n_iter, seed=seed)
    raw = kf.benchmark_problem("msd", cost="cnis", reducer="sum", log_search=False)
    start = 0.5 * (raw.search.lower + raw.search.upper)
    return kf.tune_nelder_mead(raw, start, seed, max_evals=n_seed + n_iter)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=10)
    parser.add_argument("--n-seed", type=int, default=20)
    parser.add_argument("--n-iter", type=int, default=70)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--methods", nargs="+", default=["tpbo_cnis"],
                        choices=["tpbo_cnis", "tpbo_jnis", "gpbo_jnis", "nelder_mead"])
    parser.add_argument("--out", default="out/msd_campaign")
    args = parser.parse_args()

    os.makedirs(args.out, exist_ok=True)
    problem_cnis = kf.benchmark_problem("msd", cost="cnis", reducer="sum")
    problem_jnis = kf.benchmark_problem("msd", cost="jnis", reducer="sum")

    summary_rows = []
    for method in args.methods:
        estimates = []
        for r in range(args.repeats):
            seed = kf.derive_seed(args.seed, r)
            result = run_method(method, problem_cnis, problem_jnis, seed,
                                args.n_seed, args.n_iter)
            estimates.append(result.q_star)
            kf.write_history_csv(
                result, os.path.join(args.out, f"history_{method}_{r:02d}.csv"),
                param_names=("v", "w"))
            print(f"{method} repeat {r}: v={result.q_star[0]:.4f} "
                  f"w={result.q_star[1]:.4f} cost={result.y_star:.4g}")
        estimates = np.asarray(estimates)
        for stat, fn in (("median", np.median), ("mean", np.mean), ("variance", np.var)):
            summary_rows.append([method, stat, fn(estimates[:, 0]), fn(estimates[:, 1])])
        print(f"{method}: median v={np.median(estimates[:, 0]):.4f} "
              f"w={np.median(estimates[:, 1]):.4f} over {args.repeats} repeats")

    path = os.path.join(args.out, "summary.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "statistic", "v", "w"])
        writer.writerows(summary_rows)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
