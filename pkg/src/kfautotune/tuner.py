"""Noise-covariance auto-tuning campaigns.

``evaluate_cost`` scores a candidate noise-parameter vector q by discretizing
the truth and candidate plants at every interval in ``dt_list``, simulating a
fresh Monte Carlo batch, filtering it, and reducing the per-interval
consistency costs (sum or max). Evaluations are stochastic by design: each one
consumes a deterministically derived seed, so whole campaigns replay exactly.

Three optimizers share that objective:

* ``tune_tpbo``          - Student-t-process Bayesian optimization with
                           expected improvement maximized by DIRECT.
* ``tune_gpbo_baseline`` - the Gaussian-process limit, mean-only cost,
                           single interval dt = 0.1.
* ``tune_nelder_mead``   - bounded downhill simplex with move coefficients
                           (1, 1, 0.5, 0.5).

Internally the search runs on the unit cube; with ``log_search`` (default) the
cube coordinates are log-spaced between the bounds, which suits noise
intensities spanning decades.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import benchmarks
from .acquisition import DirectConfig, SearchSpace, direct_maximize, expected_improvement
from .consistency import aggregate, c_metric, j_metric, multi_dt_cost, v_metric
from .errors import NumericalError
from .montecarlo import ControlSignal, SimConfig, derive_seed, monte_carlo_runs
from .sampling import halton
from .simplex import minimize_simplex
from .statespace import ContinuousModel, discretize
from .tprocess import KernelParams, SurrogateState, build_state, fit_hyperparams, posterior

logger = logging.getLogger(__name__)

_COSTS = ("cnis", "jnis", "vnis", "cnees")
_REDUCERS = ("sum", "max")

# offsets mixed into the campaign seed for independent derived streams
_SEED_TAG_INIT = 1
_SEED_TAG_EVAL = 2


@dataclass(frozen=True, eq=False)
class TuneProblem:
    """One tuning task: plant family, truth parameters, search box and cost."""

    name: str
    model_factory: Callable[[np.ndarray], ContinuousModel]
    truth_params: np.ndarray
    search: SearchSpace
    dt_list: tuple
    cost: str
    reducer: str
    sim: SimConfig
    penalty_cost: float = 50.0
    log_search: bool = True

    def __post_init__(self):
        object.__setattr__(self, "truth_params",
                           np.atleast_1d(np.asarray(self.truth_params, dtype=float)))
        object.__setattr__(self, "dt_list", tuple(float(dt) for dt in self.dt_list))
        if not self.dt_list:
            raise ValueError("dt_list must be non-empty")
        if any(dt <= 0.0 for dt in self.dt_list):
            raise ValueError("all sample intervals must be positive")
        if self.cost not in _COSTS:
            raise ValueError(f"cost must be one of {_COSTS}, got {self.cost!r}")
        if self.reducer not in _REDUCERS:
            raise ValueError(f"reducer must be one of {_REDUCERS}, got {self.reducer!r}")
        if self.truth_params.shape[0] != self.search.dim:
            raise ValueError("truth_params dimension must match the search space")
        if self.penalty_cost <= 0.0:
            raise ValueError("penalty_cost must be positive")
        if self.log_search and np.any(self.search.lower <= 0.0):
            raise ValueError("log-space search requires strictly positive lower bounds")

    @property
    def dim(self) -> int:
        return self.search.dim

    def to_cube(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.log_search:
            lo, hi = np.log(self.search.lower), np.log(self.search.upper)
            return (np.log(q) - lo) / (hi - lo)
        return self.search.to_unit(q)

    def from_cube(self, u) -> np.ndarray:
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if self.log_search:
            lo, hi = np.log(self.search.lower), np.log(self.search.upper)
            return np.exp(lo + u * (hi - lo))
        return self.search.from_unit(u)


@dataclass(frozen=True, eq=False)
class HistoryEntry:
    iteration: int
    q: np.ndarray
    y: float
    best_so_far: float
    lengthscales: Optional[np.ndarray] = None
    signal_variance: Optional[float] = None


@dataclass(frozen=True, eq=False)
class TuneResult:
    q_star: np.ndarray
    y_star: float
    history: list
    surrogate_final: Optional[SurrogateState]
    wall_report: dict

    @property
    def n_evaluations(self) -> int:
        return len(self.history)


def per_interval_costs(problem: TuneProblem, q, seed: int, threads: int = 1) -> list[float]:
    """Per-interval cost values for one candidate, before reduction.

    The dataset for interval i is generated from seed ``derive_seed(seed, i)``,
    independently of q, so candidates scored with the same seed see the same
    data. Filter failures and degenerate statistics map to the penalty cost.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q.shape[0] != problem.dim:
        raise ValueError(f"q must have {problem.dim} entries, got {q.shape[0]}")
    if not problem.search.contains(q):
        raise ValueError(f"q {q} lies outside the search bounds")
    costs = []
    for i, dt in enumerate(problem.dt_list):
        cfg = replace(problem.sim, dt=dt, seed=derive_seed(seed, i))
        try:
            truth_model = discretize(problem.model_factory(problem.truth_params), dt)
            candidate_model = discretize(problem.model_factory(q), dt)
            logs = monte_carlo_runs(truth_model, candidate_model, cfg, threads=threads)
            stats = aggregate(logs)
        except NumericalError as exc:
            logger.warning("filter failure at q=%s dt=%s (%s); penalty applied", q, dt, exc)
            costs.append(problem.penalty_cost)
            continue
        try:
            costs.append(_metric_value(stats, problem.cost))
        except ValueError as exc:
            logger.warning("degenerate statistics at q=%s dt=%s (%s); penalty applied", q, dt, exc)
            costs.append(problem.penalty_cost)
    return costs


def _metric_value(stats, cost: str) -> float:
    if cost == "cnis":
        return c_metric(stats.eps_z_tilde, stats.S_z_tilde, stats.n_z)
    if cost == "jnis":
        return j_metric(stats.eps_z_tilde, stats.n_z)
    if cost == "vnis":
        return v_metric(stats.S_z_tilde, stats.n_z)
    return c_metric(stats.eps_x_tilde, stats.S_x_tilde, stats.n_x)


def evaluate_cost(problem: TuneProblem, q, seed: int, threads: int = 1) -> float:
    """Reduced tuning cost of one candidate under one derived data seed."""
    return multi_dt_cost(per_interval_costs(problem, q, seed, threads=threads), problem.reducer)


def _campaign_stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(tag)])))


def _argmin_entry(history: list[HistoryEntry]) -> HistoryEntry:
    best = history[0]
    for entry in history[1:]:
        if entry.y < best.y:
            best = entry
    return best


@dataclass
class _Stopwatch:
    totals: dict = field(default_factory=dict)

    def add(self, phase: str, seconds: float) -> None:
        self.totals[phase] = self.totals.get(phase, 0.0) + seconds


def tune_tpbo(problem: TuneProblem, n_seed: int, n_iter: int, seed: int, *,
              mode: str = "student_t", dof: float = 5.0, smoothness: float = 2.5,
              noise_jitter: float = 1e-6, tol: float = 1e-4, patience: int = 15,
              refit_every: int = 10, refit_budget: int = 200,
              acq: DirectConfig = DirectConfig(), threads: int = 1) -> TuneResult:
    """Bayesian-optimization campaign over the noise parameters.

    Seeds the surrogate with ``n_seed`` low-discrepancy points, then runs up to
    ``n_iter`` acquisitions (expected improvement maximized by DIRECT),
    re-estimating kernel hyperparameters every ``refit_every`` acquisitions.
    Stops early when the best observed cost has not improved by ``tol`` for
    ``patience`` consecutive iterations. Entirely deterministic given ``seed``.
    """
    if n_seed < 2:
        raise ValueError(f"n_seed must be >= 2, got {n_seed}")
    if n_iter < 0:
        raise ValueError(f"n_iter must be >= 0, got {n_iter}")
    dim = problem.dim
    watch = _Stopwatch()
    t_start = time.perf_counter()

    shift = _campaign_stream(seed, _SEED_TAG_INIT).random(dim)
    cube_points = [u for u in halton(n_seed, dim, shift=shift)]
    history: list[HistoryEntry] = []
    values: list[float] = []

    kernel = KernelParams(lengthscales=np.full(dim, 0.3), signal_variance=1.0,
                          smoothness=smoothness, noise_jitter=noise_jitter)

    def run_eval(u: np.ndarray, index: int) -> float:
        t0 = time.perf_counter()
        q = problem.from_cube(u)
        y = evaluate_cost(problem, q, derive_seed(seed, _SEED_TAG_EVAL, index), threads=threads)
        watch.add("cost_evaluation", time.perf_counter() - t0)
        return y

    for i, u in enumerate(cube_points):
        y = run_eval(u, i)
        values.append(y)
        best = min(values)
        history.append(HistoryEntry(iteration=i, q=problem.from_cube(u), y=y, best_so_far=best,
                                    lengthscales=kernel.lengthscales.copy(),
                                    signal_variance=kernel.signal_variance))

    unit_box = SearchSpace(lower=np.zeros(dim), upper=np.ones(dim))
    state = None
    best_so_far = min(values)
    stall = 0

    def build(points_arr, std_values, kern):
        return build_state(points_arr, std_values, kern, dof=dof, mode=mode)

    for j in range(n_iter):
        points_arr = np.asarray(cube_points)
        y_arr = np.asarray(values)
        y_mean, y_std = float(y_arr.mean()), float(y_arr.std())
        y_std = max(y_std, 1e-12)
        std_values = (y_arr - y_mean) / y_std

        t0 = time.perf_counter()
        try:
            state = build(points_arr, std_values, kernel)
            if j % refit_every == 0:
                state = fit_hyperparams(state, refit_budget)
                kernel = state.kernel
        except NumericalError:
            kernel = replace(kernel, noise_jitter=kernel.noise_jitter * 100.0)
            logger.warning("surrogate factorization failed; retrying with jitter %.3g",
                           kernel.noise_jitter)
            state = build(points_arr, std_values, kernel)
        watch.add("surrogate_fit", time.perf_counter() - t0)

        best_std = float(std_values.min())

        def ei_objective(u, _state=state, _best=best_std):
            pred = posterior(_state, u)
            return expected_improvement(_best, pred.mean, math.sqrt(pred.sigma), pred.dof)

        t0 = time.perf_counter()
        u_next, _ = direct_maximize(ei_objective, unit_box, acq)
        watch.add("acquisition", time.perf_counter() - t0)

        eval_index = n_seed + j
        y = run_eval(u_next, eval_index)
        cube_points.append(np.asarray(u_next, dtype=float))
        values.append(y)

        improved = best_so_far - y
        if improved >= tol:
            best_so_far = y
            stall = 0
        else:
            best_so_far = min(best_so_far, y)
            stall += 1
        history.append(HistoryEntry(iteration=eval_index, q=problem.from_cube(u_next), y=y,
                                    best_so_far=min(v for v in values),
                                    lengthscales=kernel.lengthscales.copy(),
                                    signal_variance=kernel.signal_variance))
        if stall >= patience:
            logger.info("stopping early after %d stalled iterations", stall)
            break

    watch.add("total", time.perf_counter() - t_start)
    best_entry = _argmin_entry(history)
    return TuneResult(q_star=best_entry.q.copy(), y_star=best_entry.y, history=history,
                      surrogate_final=state, wall_report=dict(watch.totals))


def tune_gpbo_baseline(problem: TuneProblem, n_seed: int, n_iter: int, seed: int,
                       **kwargs) -> TuneResult:
    """Gaussian-process baseline: mean-only cost at the single interval dt = 0.1."""
    baseline = replace(problem, cost="jnis", dt_list=(0.1,))
    kwargs.setdefault("mode", "gaussian")
    return tune_tpbo(baseline, n_seed, n_iter, seed, **kwargs)


def tune_nelder_mead(problem: TuneProblem, start, seed: int, *,
                     max_evals: int = 200, diameter_tol: float = 1e-4,
                     step: float = 0.1, threads: int = 1) -> TuneResult:
    """Downhill-simplex campaign with coefficients (1, 1, 0.5, 0.5).

    Candidate vertices are clamped to the box. Every objective call consumes a
    fresh derived seed, so the optimizer faces the same stochastic cost surface
    as the Bayesian methods.
    """
    start = np.atleast_1d(np.asarray(start, dtype=float))
    if not problem.search.contains(start):
        raise ValueError(f"start point {start} lies outside the search bounds")
    watch = _Stopwatch()
    t_start = time.perf_counter()
    history: list[HistoryEntry] = []

    def objective(u: np.ndarray) -> float:
        index = len(history)
        q = problem.from_cube(u)
        t0 = time.perf_counter()
        y = evaluate_cost(problem, q, derive_seed(seed, _SEED_TAG_EVAL, index), threads=threads)
        watch.add("cost_evaluation", time.perf_counter() - t0)
        best = min(y, history[-1].best_so_far) if history else y
        history.append(HistoryEntry(iteration=index, q=q, y=y, best_so_far=best))
        return y

    minimize_simplex(objective, problem.to_cube(start), np.zeros(problem.dim),
                     np.ones(problem.dim), max_evals=max_evals,
                     reflect=1.0, expand=1.0, contract=0.5, shrink=0.5,
                     diameter_tol=diameter_tol, step=step)

    watch.add("total", time.perf_counter() - t_start)
    best_entry = _argmin_entry(history)
    return TuneResult(q_star=best_entry.q.copy(), y_star=best_entry.y, history=history,
                      surrogate_final=None, wall_report=dict(watch.totals))


def benchmark_problem(name: str, *, cost: str = "cnis", reducer: str = "sum",
                      dt_list=None, truth_params=None, lower=None, upper=None,
                      n_runs: int = None, n_steps: int = None, seed: int = 0,
                      control: ControlSignal = None, x0=None, p0_scale: float = 1e-4,
                      penalty_cost: float = 50.0, log_search: bool = True) -> TuneProblem:
    """Assemble a TuneProblem from a benchmark's defaults, with overrides."""
    bench = benchmarks.spec(name)
    dt_list = tuple(bench.dt_list) if dt_list is None else tuple(dt_list)
    if not dt_list:
        raise ValueError("dt_list must be non-empty")
    truth = np.asarray(bench.truth_params if truth_params is None else truth_params, dtype=float)
    search = SearchSpace(
        lower=np.asarray(bench.lower if lower is None else lower, dtype=float),
        upper=np.asarray(bench.upper if upper is None else upper, dtype=float),
    )
    sim = SimConfig(
        n_runs=bench.n_runs if n_runs is None else int(n_runs),
        n_steps=bench.n_steps if n_steps is None else int(n_steps),
        dt=dt_list[0],
        seed=int(seed),
        control=bench.control if control is None else control,
        x0=np.zeros(bench.n_states) if x0 is None else np.asarray(x0, dtype=float),
        p0_scale=p0_scale,
    )
    return TuneProblem(
        name=name,
        model_factory=lambda params: benchmarks.build(name, params),
        truth_params=truth,
        search=search,
        dt_list=dt_list,
        cost=cost,
        reducer=reducer,
        sim=sim,
        penalty_cost=penalty_cost,
        log_search=log_search,
    )


_FLOAT_FMT = "%.17g"


def write_history_csv(result: TuneResult, path_or_buf, param_names=None) -> None:
    """Persist a campaign history (iter, q..., y, best_so_far, hyperparameters)."""
    if not result.history:
        raise ValueError("empty history")
    dim = result.history[0].q.shape[0]
    if param_names is None:
        param_names = [f"q{i}" for i in range(dim)]
    if len(param_names) != dim:
        raise ValueError(f"expected {dim} parameter names, got {len(param_names)}")
    with_kernel = any(e.lengthscales is not None for e in result.history)
    header = ["iter"] + list(param_names) + ["y", "best_so_far"]
    if with_kernel:
        header += [f"lengthscale_{i}" for i in range(dim)] + ["signal_variance"]

    close = False
    if hasattr(path_or_buf, "write"):
        buf = path_or_buf
    else:
        buf = open(path_or_buf, "w")
        close = True
    try:
        buf.write(",".join(header) + "\n")
        for entry in result.history:
            row = [str(entry.iteration)]
            row += [_FLOAT_FMT % v for v in entry.q]
            row += [_FLOAT_FMT % entry.y, _FLOAT_FMT % entry.best_so_far]
            if with_kernel:
                if entry.lengthscales is None:
                    row += [""] * (dim + 1)
                else:
                    row += [_FLOAT_FMT % v for v in entry.lengthscales]
                    row += [_FLOAT_FMT % entry.signal_variance]
            buf.write(",".join(row) + "\n")
    finally:
        if close:
            buf.close()
