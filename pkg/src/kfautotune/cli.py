"""Batch front-end: tuning campaigns, cost-surface sweeps, consistency checks.

Driven by a single JSON config file. Unknown keys are rejected so typos fail
loudly. Outputs are CSV/JSON artifacts designed for external plotting; CSV
floats are written with 17 significant digits so re-parsing reproduces the
in-memory values exactly.
"""

import argparse
import itertools
import json
import logging
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import benchmarks
from .consistency import consistency_report
from .montecarlo import ControlSignal, derive_seed, monte_carlo_runs
from .statespace import discretize
from .tuner import (TuneProblem, benchmark_problem, multi_dt_cost, per_interval_costs,
                    tune_gpbo_baseline, tune_nelder_mead, tune_tpbo, write_history_csv)

logger = logging.getLogger(__name__)

_FLOAT_FMT = "%.17g"


class ConfigError(ValueError):
    pass


def _check_keys(section: dict, allowed, context: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {context}: {', '.join(unknown)}")


_TOP_KEYS = ("system", "truth_params", "search", "dt_list", "reducer", "cost",
             "sim", "tuner", "sweep", "check", "output_dir")
_SIM_KEYS = ("n_runs", "n_steps", "seed", "x0", "p0_scale", "control")
_CONTROL_KEYS = ("amplitude", "frequency")
_TUNER_KEYS = ("kind", "n_seed", "n_iter", "tol", "patience", "dof", "kernel",
               "penalty_cost", "start", "max_evals", "step", "refit_every", "refit_budget",
               "log_search")
_KERNEL_KEYS = ("smoothness", "noise_jitter")
_SWEEP_KEYS = ("grid", "per_dt")
_CHECK_KEYS = ("params", "alpha")
_GRID_KEYS = ("min", "max", "n", "spacing")


def load_config(path: str) -> dict:
    with open(path) as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(config, _TOP_KEYS, "config")
    if "system" not in config:
        raise ConfigError("config requires a 'system' key")
    benchmarks.spec(config["system"])
    for section, keys in (("sim", _SIM_KEYS), ("tuner", _TUNER_KEYS),
                          ("sweep", _SWEEP_KEYS), ("check", _CHECK_KEYS)):
        if section in config:
            if not isinstance(config[section], dict):
                raise ConfigError(f"'{section}' must be a JSON object")
            _check_keys(config[section], keys, f"config.{section}")
    if "sim" in config and "control" in config["sim"]:
        _check_keys(config["sim"]["control"], _CONTROL_KEYS, "config.sim.control")
    if "tuner" in config and "kernel" in config["tuner"]:
        _check_keys(config["tuner"]["kernel"], _KERNEL_KEYS, "config.tuner.kernel")
    if "search" in config:
        _check_keys(config["search"], ("lower", "upper"), "config.search")
    return config


def _problem_from_config(config: dict, seed_override=None) -> TuneProblem:
    sim = config.get("sim", {})
    control = None
    if "control" in sim:
        control = ControlSignal(amplitude=float(sim["control"].get("amplitude", 0.0)),
                                frequency=float(sim["control"].get("frequency", 0.0)))
    search = config.get("search", {})
    tuner_cfg = config.get("tuner", {})
    seed = int(sim.get("seed", 0)) if seed_override is None else int(seed_override)
    # the simplex baseline searches raw coordinates unless asked otherwise
    default_log = tuner_cfg.get("kind", "tpbo") != "nelder_mead"
    return benchmark_problem(
        config["system"],
        cost=config.get("cost", "cnis"),
        reducer=config.get("reducer", "sum"),
        dt_list=config.get("dt_list"),
        truth_params=config.get("truth_params"),
        lower=search.get("lower"),
        upper=search.get("upper"),
        n_runs=sim.get("n_runs"),
        n_steps=sim.get("n_steps"),
        seed=seed,
        control=control,
        x0=sim.get("x0"),
        p0_scale=float(sim.get("p0_scale", 1e-4)),
        penalty_cost=float(tuner_cfg.get("penalty_cost", 50.0)),
        log_search=bool(tuner_cfg.get("log_search", default_log)),
    )


def _json_dump(obj, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_tune(config: dict, seed_override=None, threads: int = 1, quiet: bool = False) -> dict:
    problem = _problem_from_config(config, seed_override)
    tuner_cfg = config.get("tuner", {})
    kind = tuner_cfg.get("kind", "tpbo")
    seed = problem.sim.seed
    kernel_cfg = tuner_cfg.get("kernel", {})

    common = dict(threads=threads)
    if kind in ("tpbo", "gpbo"):
        kwargs = dict(
            n_seed=int(tuner_cfg.get("n_seed", 20)),
            n_iter=int(tuner_cfg.get("n_iter", 70)),
            seed=seed,
            dof=float(tuner_cfg.get("dof", 5.0)),
            smoothness=float(kernel_cfg.get("smoothness", 2.5)),
            noise_jitter=float(kernel_cfg.get("noise_jitter", 1e-6)),
            tol=float(tuner_cfg.get("tol", 1e-4)),
            patience=int(tuner_cfg.get("patience", 15)),
            refit_every=int(tuner_cfg.get("refit_every", 10)),
            refit_budget=int(tuner_cfg.get("refit_budget", 200)),
            **common,
        )
        if kind == "tpbo":
            result = tune_tpbo(problem, **kwargs)
        else:
            kwargs.pop("dof")
            result = tune_gpbo_baseline(problem, **kwargs)
    elif kind == "nelder_mead":
        if problem.log_search:
            default_start = np.sqrt(problem.search.lower * problem.search.upper)
        else:
            default_start = 0.5 * (problem.search.lower + problem.search.upper)
        start = np.asarray(tuner_cfg.get("start", default_start), dtype=float)
        result = tune_nelder_mead(problem, start, seed,
                                  max_evals=int(tuner_cfg.get("max_evals", 200)),
                                  step=float(tuner_cfg.get("step", 0.1)), **common)
    else:
        raise ConfigError(f"unknown tuner kind {kind!r}")

    out_dir = config.get("output_dir", "out")
    os.makedirs(out_dir, exist_ok=True)
    param_names = benchmarks.spec(config["system"]).param_names
    write_history_csv(result, os.path.join(out_dir, "history.csv"), param_names=param_names)
    summary = {
        "method": kind,
        "system": config["system"],
        "cost": problem.cost,
        "reducer": problem.reducer,
        "dt_list": list(problem.dt_list),
        "seed": seed,
        "q_star": [float(v) for v in result.q_star],
        "y_star": result.y_star,
        "n_evaluations": result.n_evaluations,
        "wall_report": result.wall_report,
    }
    _json_dump(summary, os.path.join(out_dir, "result.json"))
    if not quiet:
        print(f"tune[{kind}] {config['system']}: q* = {result.q_star}, y* = {result.y_star:.6g}")
    return summary


def _grid_values(grid_spec, name: str) -> np.ndarray:
    if isinstance(grid_spec, (int, float)):
        return np.array([float(grid_spec)])
    if isinstance(grid_spec, list):
        return np.asarray(grid_spec, dtype=float)
    if isinstance(grid_spec, dict):
        _check_keys(grid_spec, _GRID_KEYS, f"config.sweep.grid.{name}")
        lo, hi = float(grid_spec["min"]), float(grid_spec["max"])
        n = int(grid_spec["n"])
        spacing = grid_spec.get("spacing", "log")
        if spacing == "log":
            if lo <= 0:
                raise ConfigError(f"log spacing requires positive min for {name}")
            return np.geomspace(lo, hi, n)
        if spacing == "linear":
            return np.linspace(lo, hi, n)
        raise ConfigError(f"unknown spacing {spacing!r} for {name}")
    raise ConfigError(f"grid entry for {name} must be a number, list or object")


def run_sweep(config: dict, seed_override=None, threads: int = 1, quiet: bool = False) -> list:
    if "sweep" not in config:
        raise ConfigError("sweep command requires a 'sweep' section")
    problem = _problem_from_config(config, seed_override)
    sweep_cfg = config["sweep"]
    per_dt = bool(sweep_cfg.get("per_dt", False))
    param_names = benchmarks.spec(config["system"]).param_names
    grid_cfg = sweep_cfg.get("grid", {})
    unknown = sorted(set(grid_cfg) - set(param_names))
    if unknown:
        raise ConfigError(f"grid names {unknown} are not parameters of {config['system']}")
    axes = []
    for i, pname in enumerate(param_names):
        if pname in grid_cfg:
            axes.append(_grid_values(grid_cfg[pname], pname))
        else:
            axes.append(np.array([float(problem.truth_params[i])]))

    seed = problem.sim.seed
    reducer_label = f"{problem.reducer}[" + ";".join(_FLOAT_FMT % dt for dt in problem.dt_list) + "]"
    rows = []
    for cell_index, combo in enumerate(itertools.product(*axes)):
        q = np.asarray(combo, dtype=float)
        cell_seed = derive_seed(seed, cell_index)
        costs = per_interval_costs(problem, q, cell_seed, threads=threads)
        if per_dt:
            for dt, cost in zip(problem.dt_list, costs):
                rows.append(list(q) + [_FLOAT_FMT % dt, cost])
        else:
            rows.append(list(q) + [reducer_label, multi_dt_cost(costs, problem.reducer)])

    out_dir = config.get("output_dir", "out")
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "sweep.csv")
    with open(path, "w") as fh:
        fh.write(",".join(list(param_names) + ["dt", "cost", "log10_cost"]) + "\n")
        for row in rows:
            cost = row[-1]
            log_cost = math.log10(cost) if cost > 0 else -math.inf
            cells = [_FLOAT_FMT % v for v in row[:-2]] + [row[-2], _FLOAT_FMT % cost,
                                                          _FLOAT_FMT % log_cost]
            fh.write(",".join(cells) + "\n")
    if not quiet:
        print(f"sweep {config['system']}: wrote {len(rows)} rows to {path}")
    return rows


def run_check(config: dict, seed_override=None, threads: int = 1, quiet: bool = False) -> dict:
    if "check" not in config:
        raise ConfigError("check command requires a 'check' section")
    problem = _problem_from_config(config, seed_override)
    check_cfg = config["check"]
    params = np.asarray(check_cfg.get("params", problem.truth_params), dtype=float)
    alpha = float(check_cfg.get("alpha", 0.05))
    seed = problem.sim.seed

    reports = []
    step_rows = []
    for i, dt in enumerate(problem.dt_list):
        cfg = replace(problem.sim, dt=dt, seed=derive_seed(seed, i))
        truth_model = discretize(problem.model_factory(problem.truth_params), dt)
        filter_model = discretize(problem.model_factory(params), dt)
        logs = monte_carlo_runs(truth_model, filter_model, cfg, threads=threads)
        report = consistency_report(logs, alpha=alpha, dt=dt)
        reports.append(report)

        errors = np.stack([log.truth - log.means for log in logs])  # (N, T, n_x)
        sigmas = np.sqrt(np.diagonal(logs[0].covs, axis1=1, axis2=2))  # (T, n_x)
        within_k = (np.abs(errors) <= 2.0 * sigmas[None, :, :]).mean(axis=0)  # (T, n_x)
        for k in range(cfg.n_steps):
            step_rows.append(
                [dt, k + 1, report.stats.avg_nees_k[k], report.stats.avg_nis_k[k],
                 report.nees_bounds.lower, report.nees_bounds.upper,
                 report.nis_bounds.lower, report.nis_bounds.upper]
                + [2.0 * sigmas[k, j] for j in range(sigmas.shape[1])]
                + [within_k[k, j] for j in range(sigmas.shape[1])]
            )

    out_dir = config.get("output_dir", "out")
    os.makedirs(out_dir, exist_ok=True)
    doc = {
        "system": config["system"],
        "alpha": alpha,
        "params": [float(v) for v in params],
        "truth_params": [float(v) for v in problem.truth_params],
        "intervals": [r.to_dict() for r in reports],
    }
    _json_dump(doc, os.path.join(out_dir, "consistency.json"))

    n_x = reports[0].stats.n_x
    header = ["dt", "k", "avg_nees", "avg_nis", "nees_lower", "nees_upper",
              "nis_lower", "nis_upper"]
    header += [f"two_sigma_{j}" for j in range(n_x)]
    header += [f"within_frac_{j}" for j in range(n_x)]
    with open(os.path.join(out_dir, "steps.csv"), "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in step_rows:
            fh.write(",".join([_FLOAT_FMT % row[0], str(int(row[1]))]
                              + [_FLOAT_FMT % v for v in row[2:]]) + "\n")
    if not quiet:
        for r in reports:
            print(f"check {config['system']} dt={r.dt}: NIS {r.nis_verdict} "
                  f"(mean {r.stats.eps_z_tilde:.4g}, var {r.stats.S_z_tilde:.4g}), "
                  f"NEES {r.nees_verdict}")
    return doc


def run_list_systems(quiet: bool = False) -> int:
    for name in benchmarks.names():
        bench = benchmarks.spec(name)
        truth = ", ".join(f"{p}={v:g}" for p, v in zip(bench.param_names, bench.truth_params))
        print(f"{name}: {bench.n_states} states, {bench.n_outputs} outputs; "
              f"defaults {truth}; dt_list {list(bench.dt_list)}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kfautotune",
        description="Kalman filter noise-covariance auto-tuning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("tune", "sweep", "check"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="Monte Carlo thread count")
        p.add_argument("--quiet", action="store_true")
    sub.add_parser("list-systems")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list-systems":
        return run_list_systems()
    try:
        config = load_config(args.config)
        if args.command == "tune":
            run_tune(config, args.seed, args.threads, args.quiet)
        elif args.command == "sweep":
            run_sweep(config, args.seed, args.threads, args.quiet)
        else:
            run_check(config, args.seed, args.threads, args.quiet)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
