"""Monte Carlo truth simulation and candidate-filter rollout.

Noise streams are counter-based (Philox) and keyed by (seed, run_index,
stream tag), so every run is an independent, reproducible stream regardless
of execution order. The batch rollout exploits the fact that a linear filter's
covariance/gain sequence does not depend on the measurements: it is computed
once per model and shared across all runs, while the mean recursion is
vectorized over runs.
"""

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NumericalError
from .kalman import InnovationRecord, StateEstimate
from .statespace import DiscreteModel, symmetrize

_TAG_PROCESS = 0
_TAG_MEASUREMENT = 1

_FLOAT_FMT = "%.17g"


def derive_seed(*parts) -> int:
    """Deterministically mix integer parts into a fresh 64-bit seed."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, np.uint64)[0])


def noise_stream(seed: int, run_index: int, tag: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, run_index, tag)."""
    key = np.random.SeedSequence([int(seed), int(run_index), int(tag)])
    return np.random.Generator(np.random.Philox(key))


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Sinusoidal input u(t) = amplitude * cos(frequency * t), zero-order hold."""

    amplitude: float = 0.0
    frequency: float = 0.0

    def values(self, n_steps: int, dt: float) -> np.ndarray:
        # u_k is the value held over (t_{k-1}, t_k]
        t = (np.arange(n_steps, dtype=float)) * dt
        return self.amplitude * np.cos(self.frequency * t)


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Monte Carlo batch description: size, horizon, seeding and initial state."""

    n_runs: int
    n_steps: int
    dt: float
    seed: int
    control: ControlSignal = field(default_factory=ControlSignal)
    x0: np.ndarray = None
    p0_scale: float = 1e-4

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError(f"n_runs must be >= 1, got {self.n_runs}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.p0_scale <= 0.0:
            raise ValueError(f"p0_scale must be positive, got {self.p0_scale}")
        x0 = None if self.x0 is None else np.atleast_1d(np.asarray(self.x0, dtype=float))
        object.__setattr__(self, "x0", x0)

    def initial_state(self, n_x: int) -> np.ndarray:
        if self.x0 is None:
            return np.zeros(n_x)
        if self.x0.shape != (n_x,):
            raise ValueError(f"x0 must have length {n_x}, got shape {self.x0.shape}")
        return self.x0


@dataclass(eq=False)
class RunLog:
    """Per-step record of one filter run over one simulated dataset.

    Covariance-like arrays (``covs``, ``innov_covs``, ``gains``) may be shared
    between the RunLogs of one batch: a linear filter's covariances do not
    depend on the realized measurements.
    """

    truth: np.ndarray          # (T, n_x)
    measurements: np.ndarray   # (T, n_z)
    means: np.ndarray          # (T, n_x) posterior means
    covs: np.ndarray           # (T, n_x, n_x) posterior covariances
    innovations: np.ndarray    # (T, n_z)
    innov_covs: np.ndarray     # (T, n_z, n_z)
    gains: np.ndarray          # (T, n_x, n_z)

    @property
    def n_steps(self) -> int:
        return self.truth.shape[0]

    def estimate(self, k: int) -> StateEstimate:
        return StateEstimate(mean=self.means[k], cov=self.covs[k])

    def innovation_record(self, k: int) -> InnovationRecord:
        return InnovationRecord(
            innovation=self.innovations[k],
            innov_cov=self.innov_covs[k],
            gain=self.gains[k],
        )


def _psd_sampling_factor(mat: np.ndarray, name: str) -> np.ndarray:
    """Factor L with L L^T = mat for a PSD matrix, via eigen-clipping."""
    sym = symmetrize(mat)
    evals, vecs = np.linalg.eigh(sym)
    scale = max(1.0, float(np.abs(evals).max(initial=0.0)))
    if evals.min(initial=0.0) < -1e-10 * scale:
        raise NumericalError(f"{name} is not positive semidefinite", matrix=sym)
    return vecs * np.sqrt(np.clip(evals, 0.0, None))


def _draw_noise(model: DiscreteModel, cfg: SimConfig, run_indices) -> tuple[np.ndarray, np.ndarray]:
    """Per-run keyed draws: returns process (N,T,n_x) and measurement (N,T,n_z) noise."""
    t = cfg.n_steps
    lq = _psd_sampling_factor(model.Q, "Q")
    lr = _psd_sampling_factor(model.R, "R")
    process = np.empty((len(run_indices), t, model.n_x))
    measure = np.empty((len(run_indices), t, model.n_z))
    for i, run in enumerate(run_indices):
        process[i] = noise_stream(cfg.seed, run, _TAG_PROCESS).standard_normal((t, model.n_x)) @ lq.T
        measure[i] = noise_stream(cfg.seed, run, _TAG_MEASUREMENT).standard_normal((t, model.n_z)) @ lr.T
    return process, measure


def _scan_truth(model: DiscreteModel, cfg: SimConfig, process: np.ndarray,
                measure: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n_runs, t, _ = process.shape
    u = cfg.control.values(t, cfg.dt)
    b_dir = model.B @ np.ones(model.n_u)
    states = np.empty((n_runs, t, model.n_x))
    x = np.broadcast_to(cfg.initial_state(model.n_x), (n_runs, model.n_x)).copy()
    for k in range(t):
        x = x @ model.F.T + u[k] * b_dir + process[:, k, :]
        states[:, k, :] = x
    measurements = states @ model.H.T + measure
    return states, measurements


def simulate_batch(truth_model: DiscreteModel, cfg: SimConfig, threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Simulate all runs of the batch: states (N, T, n_x), measurements (N, T, n_z)."""
    if abs(truth_model.dt - cfg.dt) > 1e-12:
        raise ValueError(f"model dt {truth_model.dt} does not match config dt {cfg.dt}")
    runs = list(range(cfg.n_runs))
    if threads <= 1 or cfg.n_runs < 2 * threads:
        process, measure = _draw_noise(truth_model, cfg, runs)
    else:
        chunks = np.array_split(np.asarray(runs), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _draw_noise(truth_model, cfg, list(c)), chunks))
        process = np.concatenate([p[0] for p in parts], axis=0)
        measure = np.concatenate([p[1] for p in parts], axis=0)
    return _scan_truth(truth_model, cfg, process, measure)


def simulate_truth(truth_model: DiscreteModel, cfg: SimConfig, run_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Simulate one run's truth trajectory and measurements.

    Randomness is derived from (cfg.seed, run_index) only, so the result is
    independent of any other run and reproducible bit-for-bit.
    """
    if abs(truth_model.dt - cfg.dt) > 1e-12:
        raise ValueError(f"model dt {truth_model.dt} does not match config dt {cfg.dt}")
    process, measure = _draw_noise(truth_model, cfg, [run_index])
    states, measurements = _scan_truth(truth_model, cfg, process, measure)
    return states[0], measurements[0]


def _covariance_schedule(filter_model: DiscreteModel, cfg: SimConfig):
    """Run-independent covariance recursion: P_k, S_k, K_k for k = 1..T."""
    n_x = filter_model.n_x
    t = cfg.n_steps
    covs = np.empty((t, n_x, n_x))
    innov_covs = np.empty((t, filter_model.n_z, filter_model.n_z))
    gains = np.empty((t, n_x, filter_model.n_z))
    p = cfg.p0_scale * np.eye(n_x)
    for k in range(t):
        p_pred = symmetrize(filter_model.F @ p @ filter_model.F.T + filter_model.Q)
        s = symmetrize(filter_model.H @ p_pred @ filter_model.H.T + filter_model.R)
        try:
            chol = scipy.linalg.cho_factor(s, lower=True)
            gain = scipy.linalg.cho_solve(chol, filter_model.H @ p_pred).T
        except scipy.linalg.LinAlgError:
            # exact-measurement boundary (R = 0): once a direction is fully
            # resolved S turns singular; the pseudoinverse gain ignores it
            evals = np.linalg.eigvalsh(s)
            scale = max(1.0, float(np.abs(evals).max(initial=0.0)))
            if not np.all(np.isfinite(evals)) or evals.min() < -1e-10 * scale:
                raise NumericalError("innovation covariance is not positive semidefinite",
                                     matrix=s) from None
            gain = p_pred @ filter_model.H.T @ np.linalg.pinv(s, hermitian=True)
        p = symmetrize(p_pred - gain @ s @ gain.T)
        try:
            np.linalg.cholesky(p)
        except np.linalg.LinAlgError:
            # singular-but-PSD is legitimate at the noise-free boundary (R = 0)
            evals = np.linalg.eigvalsh(p)
            scale = max(1.0, float(np.abs(evals).max(initial=0.0)))
            if not np.all(np.isfinite(evals)) or evals.min() < -1e-10 * scale:
                raise NumericalError("posterior covariance is not positive semidefinite",
                                     matrix=p) from None
        covs[k] = p
        innov_covs[k] = s
        gains[k] = gain
    return covs, innov_covs, gains


def _scan_means(filter_model: DiscreteModel, cfg: SimConfig, measurements: np.ndarray,
                gains: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n_runs, t, _ = measurements.shape
    u = cfg.control.values(t, cfg.dt)
    b_dir = filter_model.B @ np.ones(filter_model.n_u)
    means = np.empty((n_runs, t, filter_model.n_x))
    innovations = np.empty((n_runs, t, filter_model.n_z))
    x = np.broadcast_to(cfg.initial_state(filter_model.n_x), (n_runs, filter_model.n_x)).copy()
    for k in range(t):
        x_pred = x @ filter_model.F.T + u[k] * b_dir
        innov = measurements[:, k, :] - x_pred @ filter_model.H.T
        x = x_pred + innov @ gains[k].T
        means[:, k, :] = x
        innovations[:, k, :] = innov
    return means, innovations


def filter_batch(states: np.ndarray, measurements: np.ndarray, filter_model: DiscreteModel,
                 cfg: SimConfig, threads: int = 1) -> list[RunLog]:
    """Run the candidate filter over every simulated run of the batch."""
    if states.shape[:2] != measurements.shape[:2]:
        raise ValueError("states and measurements must cover the same runs and steps")
    if states.shape[1] != cfg.n_steps:
        raise ValueError(f"data has {states.shape[1]} steps, config expects {cfg.n_steps}")
    if abs(filter_model.dt - cfg.dt) > 1e-12:
        raise ValueError(f"model dt {filter_model.dt} does not match config dt {cfg.dt}")
    covs, innov_covs, gains = _covariance_schedule(filter_model, cfg)
    n_runs = states.shape[0]
    if threads <= 1 or n_runs < 2 * threads:
        means, innovations = _scan_means(filter_model, cfg, measurements, gains)
    else:
        split = np.array_split(np.arange(n_runs), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(
                lambda idx: _scan_means(filter_model, cfg, measurements[idx], gains), split))
        means = np.concatenate([p[0] for p in parts], axis=0)
        innovations = np.concatenate([p[1] for p in parts], axis=0)
    return [
        RunLog(
            truth=states[i],
            measurements=measurements[i],
            means=means[i],
            covs=covs,
            innovations=innovations[i],
            innov_covs=innov_covs,
            gains=gains,
        )
        for i in range(n_runs)
    ]


def run_filter(data: tuple[np.ndarray, np.ndarray], filter_model: DiscreteModel,
               cfg: SimConfig) -> RunLog:
    """Filter one run's data; single-run counterpart of :func:`filter_batch`."""
    states, measurements = data
    states = np.asarray(states, dtype=float)
    measurements = np.asarray(measurements, dtype=float)
    if states.ndim != 2 or measurements.ndim != 2:
        raise ValueError("data must be (states, measurements) arrays of shape (T, n)")
    return filter_batch(states[None, ...], measurements[None, ...], filter_model, cfg)[0]


def monte_carlo_runs(truth_model: DiscreteModel, filter_model: DiscreteModel,
                     cfg: SimConfig, threads: int = 1) -> list[RunLog]:
    """Simulate the truth batch once and roll the candidate filter over it."""
    states, measurements = simulate_batch(truth_model, cfg, threads=threads)
    return filter_batch(states, measurements, filter_model, cfg, threads=threads)


def runlog_to_csv(log: RunLog, path_or_buf) -> None:
    """Dump a RunLog (one row per step: k, truth, estimate, innovation, diag(S))."""
    n_x = log.truth.shape[1]
    n_z = log.innovations.shape[1]
    header = ["k"]
    header += [f"truth_{i}" for i in range(n_x)]
    header += [f"estimate_{i}" for i in range(n_x)]
    header += [f"innovation_{i}" for i in range(n_z)]
    header += [f"innov_var_{i}" for i in range(n_z)]
    buf = path_or_buf if isinstance(path_or_buf, io.IOBase) else open(path_or_buf, "w")
    try:
        buf.write(",".join(header) + "\n")
        for k in range(log.n_steps):
            row = [str(k + 1)]
            row += [_FLOAT_FMT % v for v in log.truth[k]]
            row += [_FLOAT_FMT % v for v in log.means[k]]
            row += [_FLOAT_FMT % v for v in log.innovations[k]]
            row += [_FLOAT_FMT % v for v in np.diag(log.innov_covs[k])]
            buf.write(",".join(row) + "\n")
    finally:
        if buf is not path_or_buf:
            buf.close()
