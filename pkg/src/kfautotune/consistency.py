"""Normalized-error consistency statistics and tuning cost functions.

For state error e with filter covariance P, the normalized estimation error
squared is e^T P^-1 e; for innovation eps with covariance S it is
eps^T S^-1 eps. A correctly tuned filter makes these chi-square with n_x
(resp. n_z) degrees of freedom, hence mean = dof and variance = 2 dof. The
costs exposed here penalize departures of both sample moments:

    j = |log(mean / dof)|
    c = |log(mean / dof)| + |log(variance / (2 dof))|
    v = |log(variance / (2 dof))|

where ``mean`` is the time average of the per-step run averages and
``variance`` is the pooled sample variance about the per-step run averages
with divisor T (N - 1). Multi-interval costs reduce per-interval values by
sum or max.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .montecarlo import RunLog
from .special import chi2_quantile


def nees(error, cov) -> float:
    """Normalized estimation error squared: e^T P^-1 e via Cholesky solve."""
    return _quad_form(np.asarray(error, dtype=float), np.asarray(cov, dtype=float), "state covariance")


def nis(innovation, innov_cov) -> float:
    """Normalized innovation error squared: eps^T S^-1 eps via Cholesky solve."""
    return _quad_form(np.asarray(innovation, dtype=float), np.asarray(innov_cov, dtype=float),
                      "innovation covariance")


def _quad_form(vec: np.ndarray, mat: np.ndarray, name: str) -> float:
    try:
        chol = np.linalg.cholesky(0.5 * (mat + mat.T))
    except np.linalg.LinAlgError:
        raise NumericalError(f"{name} is singular or not positive definite", matrix=mat) from None
    half = np.linalg.solve(chol, vec)
    return float(half @ half)


@dataclass(frozen=True, eq=False)
class ConsistencyStats:
    """Time/run-resolved normalized-error moments for one Monte Carlo batch."""

    avg_nees_k: np.ndarray  # (T,) per-step run averages of the state statistic
    avg_nis_k: np.ndarray   # (T,) per-step run averages of the innovation statistic
    eps_x_tilde: float      # time average of avg_nees_k
    eps_z_tilde: float      # time average of avg_nis_k
    S_x_tilde: float        # pooled sample variance of the state statistic
    S_z_tilde: float        # pooled sample variance of the innovation statistic
    n_x: int
    n_z: int
    n_runs: int
    n_steps: int


def _batch_quad_forms(vectors: np.ndarray, covs_shared, covs_per_run) -> np.ndarray:
    """Quadratic forms v^T C^-1 v for a (N, T, m) stack of vectors.

    ``covs_shared`` is a (T, m, m) stack used for every run when the batch
    shares its covariance schedule; otherwise ``covs_per_run`` is (N, T, m, m).
    """
    if covs_shared is not None:
        try:
            chol = np.linalg.cholesky(covs_shared)  # (T, m, m)
        except np.linalg.LinAlgError:
            raise NumericalError("covariance schedule is not positive definite",
                                 matrix=covs_shared) from None
        rhs = np.moveaxis(vectors, 0, 2)  # (T, m, N)
        half = np.linalg.solve(chol, rhs)
        return np.moveaxis((half ** 2).sum(axis=1), 1, 0)  # (N, T)
    try:
        chol = np.linalg.cholesky(covs_per_run)  # (N, T, m, m)
    except np.linalg.LinAlgError:
        raise NumericalError("covariance schedule is not positive definite") from None
    half = np.linalg.solve(chol, vectors[..., None])  # (N, T, m, 1)
    return (half[..., 0] ** 2).sum(axis=-1)


def aggregate(logs: list[RunLog]) -> ConsistencyStats:
    """Pool normalized-error statistics across runs and steps.

    Per-step averages are taken across runs; the pooled variance uses
    deviations from those per-step averages with divisor T (N - 1).
    """
    n_runs = len(logs)
    if n_runs < 2:
        raise ValueError("at least two runs are required to estimate the variance")
    t = logs[0].n_steps
    if any(log.n_steps != t for log in logs):
        raise ValueError("all runs must have the same number of steps")

    errors = np.stack([log.truth - log.means for log in logs])        # (N, T, n_x)
    innovations = np.stack([log.innovations for log in logs])         # (N, T, n_z)

    state_shared = logs[0].covs if all(log.covs is logs[0].covs for log in logs) else None
    innov_shared = logs[0].innov_covs if all(log.innov_covs is logs[0].innov_covs for log in logs) else None
    state_per_run = None if state_shared is not None else np.stack([log.covs for log in logs])
    innov_per_run = None if innov_shared is not None else np.stack([log.innov_covs for log in logs])

    nees_vals = _batch_quad_forms(errors, state_shared, state_per_run)        # (N, T)
    nis_vals = _batch_quad_forms(innovations, innov_shared, innov_per_run)    # (N, T)

    avg_nees_k = nees_vals.mean(axis=0)
    avg_nis_k = nis_vals.mean(axis=0)
    denom = t * (n_runs - 1)
    return ConsistencyStats(
        avg_nees_k=avg_nees_k,
        avg_nis_k=avg_nis_k,
        eps_x_tilde=float(avg_nees_k.mean()),
        eps_z_tilde=float(avg_nis_k.mean()),
        S_x_tilde=float(((nees_vals - avg_nees_k[None, :]) ** 2).sum() / denom),
        S_z_tilde=float(((nis_vals - avg_nis_k[None, :]) ** 2).sum() / denom),
        n_x=errors.shape[2],
        n_z=innovations.shape[2],
        n_runs=n_runs,
        n_steps=t,
    )


@dataclass(frozen=True)
class ChiSquareBounds:
    """Two-sided acceptance interval for a run-averaged chi-square statistic."""

    lower: float
    upper: float
    alpha: float
    dof_per_sample: int
    n_runs: int

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def chi2_bounds(dof: int, n_runs: int, alpha: float) -> ChiSquareBounds:
    """Bounds on the across-run average of a chi-square(dof) statistic.

    N times the run average of N iid chi-square(dof) draws is chi-square with
    N dof degrees of freedom, so the interval is
    [chi2_q(alpha/2, N dof) / N, chi2_q(1 - alpha/2, N dof) / N].
    """
    if dof < 1:
        raise ValueError(f"dof must be >= 1, got {dof}")
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    pooled_dof = n_runs * dof
    return ChiSquareBounds(
        lower=chi2_quantile(alpha / 2.0, pooled_dof) / n_runs,
        upper=chi2_quantile(1.0 - alpha / 2.0, pooled_dof) / n_runs,
        alpha=alpha,
        dof_per_sample=dof,
        n_runs=n_runs,
    )


def j_metric(eps_tilde: float, dof: int) -> float:
    """Mean-only cost: |log(eps_tilde / dof)|."""
    if eps_tilde <= 0.0:
        raise ValueError(f"averaged statistic must be positive, got {eps_tilde}")
    return abs(math.log(eps_tilde / dof))


def c_metric(eps_tilde: float, s_tilde: float, dof: int) -> float:
    """Two-moment cost: |log(eps_tilde / dof)| + |log(s_tilde / (2 dof))|."""
    if eps_tilde <= 0.0 or s_tilde <= 0.0:
        raise ValueError(f"moment statistics must be positive, got ({eps_tilde}, {s_tilde})")
    return abs(math.log(eps_tilde / dof)) + abs(math.log(s_tilde / (2.0 * dof)))


def v_metric(s_tilde: float, dof: int) -> float:
    """Variance-only cost: |log(s_tilde / (2 dof))|."""
    if s_tilde <= 0.0:
        raise ValueError(f"variance statistic must be positive, got {s_tilde}")
    return abs(math.log(s_tilde / (2.0 * dof)))


def multi_dt_cost(per_dt_costs, reducer: str) -> float:
    """Reduce per-interval costs by 'sum' or 'max'."""
    costs = [float(c) for c in per_dt_costs]
    if not costs:
        raise ValueError("per_dt_costs must be non-empty")
    if reducer == "sum":
        return float(sum(costs))
    if reducer == "max":
        return float(max(costs))
    raise ValueError(f"unknown reducer {reducer!r}, expected 'sum' or 'max'")


def quad_form_moments(lam, sigma, mu) -> tuple[float, float]:
    """Mean and variance of eps^T Lam eps for Gaussian eps ~ N(mu, Sigma).

    mean = tr(Lam Sigma) + mu^T Lam mu
    var  = 2 tr(Lam Sigma Lam Sigma) + 4 mu^T Lam Sigma Lam mu
    """
    lam = np.asarray(lam, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    n = mu.shape[0]
    if lam.shape != (n, n) or sigma.shape != (n, n):
        raise ValueError("Lambda, Sigma and mu must have consistent dimensions")
    ls = lam @ sigma
    mean = float(np.trace(ls) + mu @ lam @ mu)
    var = float(2.0 * np.trace(ls @ ls) + 4.0 * mu @ lam @ sigma @ lam @ mu)
    return mean, var


@dataclass(frozen=True, eq=False)
class ConsistencyReport:
    """Pass/fail consistency summary of one Monte Carlo batch at one interval."""

    dt: float
    alpha: float
    stats: ConsistencyStats
    nees_bounds: ChiSquareBounds
    nis_bounds: ChiSquareBounds
    j_nees: float
    j_nis: float
    c_nees: float
    c_nis: float
    v_nees: float
    v_nis: float
    nees_verdict: str            # pessimistic | consistent | optimistic
    nis_verdict: str
    nees_inbounds_frac: float    # fraction of steps with avg_nees_k inside the bounds
    nis_inbounds_frac: float
    state_within_2sigma: np.ndarray  # per-state fraction of |error| <= 2 sqrt(P_jj)
    consistent: bool

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "alpha": self.alpha,
            "n_runs": self.stats.n_runs,
            "n_steps": self.stats.n_steps,
            "n_x": self.stats.n_x,
            "n_z": self.stats.n_z,
            "eps_x_tilde": self.stats.eps_x_tilde,
            "eps_z_tilde": self.stats.eps_z_tilde,
            "S_x_tilde": self.stats.S_x_tilde,
            "S_z_tilde": self.stats.S_z_tilde,
            "j_nees": self.j_nees,
            "j_nis": self.j_nis,
            "c_nees": self.c_nees,
            "c_nis": self.c_nis,
            "v_nees": self.v_nees,
            "v_nis": self.v_nis,
            "nees_bounds": [self.nees_bounds.lower, self.nees_bounds.upper],
            "nis_bounds": [self.nis_bounds.lower, self.nis_bounds.upper],
            "nees_verdict": self.nees_verdict,
            "nis_verdict": self.nis_verdict,
            "nees_inbounds_frac": self.nees_inbounds_frac,
            "nis_inbounds_frac": self.nis_inbounds_frac,
            "state_within_2sigma": [float(v) for v in self.state_within_2sigma],
            "consistent": self.consistent,
        }


def _verdict(value: float, bounds: ChiSquareBounds) -> str:
    if value < bounds.lower:
        return "pessimistic"
    if value > bounds.upper:
        return "optimistic"
    return "consistent"


def consistency_report(logs: list[RunLog], alpha: float = 0.05,
                       dt: float = float("nan")) -> ConsistencyReport:
    """Aggregate a batch and judge it against the two-sided chi-square bounds."""
    stats = aggregate(logs)
    nees_b = chi2_bounds(stats.n_x, stats.n_runs, alpha)
    nis_b = chi2_bounds(stats.n_z, stats.n_runs, alpha)

    errors = np.stack([log.truth - log.means for log in logs])  # (N, T, n_x)
    if all(log.covs is logs[0].covs for log in logs):
        sigmas = np.sqrt(np.diagonal(logs[0].covs, axis1=1, axis2=2))[None, :, :]
    else:
        sigmas = np.sqrt(np.stack([np.diagonal(log.covs, axis1=1, axis2=2) for log in logs]))
    within = (np.abs(errors) <= 2.0 * sigmas).mean(axis=(0, 1))

    nees_verdict = _verdict(stats.eps_x_tilde, nees_b)
    nis_verdict = _verdict(stats.eps_z_tilde, nis_b)
    return ConsistencyReport(
        dt=float(dt),
        alpha=alpha,
        stats=stats,
        nees_bounds=nees_b,
        nis_bounds=nis_b,
        j_nees=j_metric(stats.eps_x_tilde, stats.n_x),
        j_nis=j_metric(stats.eps_z_tilde, stats.n_z),
        c_nees=c_metric(stats.eps_x_tilde, stats.S_x_tilde, stats.n_x),
        c_nis=c_metric(stats.eps_z_tilde, stats.S_z_tilde, stats.n_z),
        v_nees=v_metric(stats.S_x_tilde, stats.n_x),
        v_nis=v_metric(stats.S_z_tilde, stats.n_z),
        nees_verdict=nees_verdict,
        nis_verdict=nis_verdict,
        nees_inbounds_frac=float(
            ((stats.avg_nees_k >= nees_b.lower) & (stats.avg_nees_k <= nees_b.upper)).mean()),
        nis_inbounds_frac=float(
            ((stats.avg_nis_k >= nis_b.lower) & (stats.avg_nis_k <= nis_b.upper)).mean()),
        state_within_2sigma=within,
        consistent=(nees_verdict == "consistent" and nis_verdict == "consistent"),
    )
