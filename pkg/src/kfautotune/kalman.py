"""Discrete-time Kalman filter recursion.

Prediction:     m' = F m + B u,          P' = F P F^T + Q
Update:         S  = H P H^T + R,        K  = P H^T S^{-1}
                m' = m + K (z - H m),    P' = P - K S K^T

Covariances are re-symmetrized after every step. S is factorized by Cholesky
and never inverted explicitly; a factorization failure raises
:class:`~kfautotune.errors.NumericalError` with the offending matrix attached.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError
from .statespace import DiscreteModel, symmetrize

_SYM_TOL = 1e-9


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class StateEstimate:
    """Gaussian state belief: mean and symmetric PD covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _as_vector(self.mean, "mean")
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise ValueError(f"cov must have shape ({n}, {n}), got {cov.shape}")
        scale = max(1.0, float(np.abs(cov).max(initial=0.0)))
        if np.abs(cov - cov.T).max(initial=0.0) > _SYM_TOL * scale:
            raise NumericalError("state covariance is not symmetric", matrix=cov)
        try:
            np.linalg.cholesky(symmetrize(cov))
        except np.linalg.LinAlgError:
            raise NumericalError("state covariance is not positive definite", matrix=cov) from None


@dataclass(frozen=True, eq=False)
class InnovationRecord:
    """Measurement-update byproducts: innovation, its covariance and the gain."""

    innovation: np.ndarray
    innov_cov: np.ndarray
    gain: np.ndarray

    def __post_init__(self):
        innovation = _as_vector(self.innovation, "innovation")
        innov_cov = np.asarray(self.innov_cov, dtype=float)
        gain = np.asarray(self.gain, dtype=float)
        object.__setattr__(self, "innovation", innovation)
        object.__setattr__(self, "innov_cov", innov_cov)
        object.__setattr__(self, "gain", gain)
        n_z = innovation.shape[0]
        if innov_cov.shape != (n_z, n_z):
            raise ValueError(f"innov_cov must have shape ({n_z}, {n_z}), got {innov_cov.shape}")
        if gain.ndim != 2 or gain.shape[1] != n_z:
            raise ValueError(f"gain must have {n_z} columns, got shape {gain.shape}")
        try:
            np.linalg.cholesky(symmetrize(innov_cov))
        except np.linalg.LinAlgError:
            raise NumericalError("innovation covariance is not positive definite", matrix=innov_cov) from None


def predict(prior: StateEstimate, model: DiscreteModel, u) -> StateEstimate:
    """Propagate the belief one step through the process model."""
    u_vec = _as_vector(u, "u")
    if u_vec.shape[0] != model.n_u:
        raise ValueError(f"u must have length {model.n_u}, got {u_vec.shape[0]}")
    if prior.mean.shape[0] != model.n_x:
        raise ValueError(f"prior mean must have length {model.n_x}, got {prior.mean.shape[0]}")
    mean = model.F @ prior.mean + model.B @ u_vec
    cov = symmetrize(model.F @ prior.cov @ model.F.T + model.Q)
    return StateEstimate(mean=mean, cov=cov)


def update(pred: StateEstimate, model: DiscreteModel, z) -> tuple[StateEstimate, InnovationRecord]:
    """Fold one measurement into a predicted belief."""
    z_vec = _as_vector(z, "z")
    if z_vec.shape[0] != model.n_z:
        raise ValueError(f"z must have length {model.n_z}, got {z_vec.shape[0]}")
    innov_cov = symmetrize(model.H @ pred.cov @ model.H.T + model.R)
    try:
        chol = scipy.linalg.cho_factor(innov_cov, lower=True)
    except scipy.linalg.LinAlgError:
        raise NumericalError("innovation covariance is not positive definite", matrix=innov_cov) from None
    # K = P H^T S^-1, computed as (S^-1 H P)^T through the Cholesky factor
    gain = scipy.linalg.cho_solve(chol, model.H @ pred.cov).T
    innovation = z_vec - model.H @ pred.mean
    mean = pred.mean + gain @ innovation
    cov = symmetrize(pred.cov - gain @ innov_cov @ gain.T)
    posterior = StateEstimate(mean=mean, cov=cov)
    record = InnovationRecord(innovation=innovation, innov_cov=innov_cov, gain=gain)
    return posterior, record
