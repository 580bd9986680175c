"""Student-t process surrogate regression with a Matern ARD kernel.

Observed costs y at inputs q_{1:n} are modeled jointly as multivariate
Student-t with dof v > 2, zero prior mean and kernel matrix K. Conditioning on
the n observations gives a univariate Student-t prediction at a new input:

    u     = K21 K11^-1 y
    sigma = (v + d) / (v + n) * (K22 - K21 K11^-1 K12),   d = y^T K11^-1 y
    dof   = v + n

``sigma`` is the squared-scale parameter of the location-scale Student-t (it
reduces to the predictive variance in the Gaussian limit). In ``gaussian``
mode the (v + d)/(v + n) factor is dropped and the conditional dof is
infinite, which recovers standard Gaussian-process regression.
"""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import NumericalError
from .sampling import halton
from .simplex import minimize_simplex

logger = logging.getLogger(__name__)

_MODES = ("student_t", "gaussian")
_SMOOTHNESS = (1.5, 2.5)
_MIN_JITTER = 1e-10


@dataclass(frozen=True, eq=False)
class KernelParams:
    """Matern ARD kernel: one positive lengthscale per input dimension.

    ``smoothness`` selects the closed-form order (1.5 or 2.5);
    ``noise_jitter`` is added to the diagonal of the training kernel matrix.
    """

    lengthscales: np.ndarray
    signal_variance: float = 1.0
    smoothness: float = 2.5
    noise_jitter: float = 1e-6

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "smoothness", float(self.smoothness))
        object.__setattr__(self, "noise_jitter", float(self.noise_jitter))
        if np.any(ls <= 0.0):
            raise ValueError("lengthscales must be positive")
        if self.signal_variance <= 0.0:
            raise ValueError("signal_variance must be positive")
        if self.smoothness not in _SMOOTHNESS:
            raise ValueError(f"smoothness must be one of {_SMOOTHNESS}, got {self.smoothness}")
        if self.noise_jitter < _MIN_JITTER:
            raise ValueError(f"noise_jitter must be >= {_MIN_JITTER}")

    @property
    def dim(self) -> int:
        return self.lengthscales.shape[0]


def _scaled_distance(params: KernelParams, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = (x[:, None, :] - y[None, :, :]) / params.lengthscales[None, None, :]
    return np.sqrt(np.maximum((diff ** 2).sum(axis=2), 0.0))


def _matern(params: KernelParams, r: np.ndarray) -> np.ndarray:
    if params.smoothness == 2.5:
        c = math.sqrt(5.0) * r
        return (1.0 + c + c * c / 3.0) * np.exp(-c)
    c = math.sqrt(3.0) * r
    return (1.0 + c) * np.exp(-c)


def kernel_eval(params: KernelParams, a, b) -> float:
    """Kernel value between two points."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    r = _scaled_distance(params, a, b)
    return float(params.signal_variance * _matern(params, r)[0, 0])


def kernel_matrix(params: KernelParams, x: np.ndarray, y: np.ndarray = None) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = x if y is None else np.atleast_2d(np.asarray(y, dtype=float))
    return params.signal_variance * _matern(params, _scaled_distance(params, x, y))


@dataclass(frozen=True, eq=False)
class SurrogateState:
    """Immutable regression state over observed (points, values).

    Holds the Cholesky factor of K + jitter I, the weight vector
    alpha = K^-1 y and the data quadratic form d = y^T K^-1 y.
    """

    points: np.ndarray   # (n, d)
    values: np.ndarray   # (n,)
    kernel: KernelParams
    dof: float
    mode: str
    chol_lower: np.ndarray
    alpha: np.ndarray
    data_quad: float

    @property
    def n_obs(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def build_state(points, values, kernel: KernelParams, dof: float = 5.0,
                mode: str = "student_t") -> SurrogateState:
    """Factorize the training kernel matrix and cache the solve products."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if points.shape[0] != values.shape[0]:
        raise ValueError("points and values must have matching lengths")
    if points.shape[0] < 1:
        raise ValueError("at least one observation is required")
    if points.shape[1] != kernel.dim:
        raise ValueError(f"points have dimension {points.shape[1]}, kernel expects {kernel.dim}")
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    if mode == "student_t" and dof <= 2.0:
        raise ValueError(f"dof must exceed 2 in student_t mode, got {dof}")
    k_mat = kernel_matrix(kernel, points)
    k_mat[np.diag_indices_from(k_mat)] += kernel.noise_jitter
    try:
        chol = scipy.linalg.cholesky(k_mat, lower=True)
    except scipy.linalg.LinAlgError:
        raise NumericalError("training kernel matrix is not positive definite", matrix=k_mat) from None
    alpha = scipy.linalg.cho_solve((chol, True), values)
    return SurrogateState(
        points=points,
        values=values,
        kernel=kernel,
        dof=float(dof),
        mode=mode,
        chol_lower=chol,
        alpha=alpha,
        data_quad=float(values @ alpha),
    )


@dataclass(frozen=True)
class PosteriorPrediction:
    mean: float
    sigma: float   # squared-scale parameter; predictive variance in the Gaussian limit
    dof: float


def posterior(state: SurrogateState, q_new) -> PosteriorPrediction:
    """Conditional prediction at one new input."""
    q_new = np.atleast_1d(np.asarray(q_new, dtype=float))
    if q_new.shape != (state.dim,):
        raise ValueError(f"q_new must have shape ({state.dim},), got {q_new.shape}")
    k_vec = kernel_matrix(state.kernel, state.points, q_new[None, :])[:, 0]
    mean = float(k_vec @ state.alpha)
    half = scipy.linalg.solve_triangular(state.chol_lower, k_vec, lower=True)
    schur = state.kernel.signal_variance - float(half @ half)
    schur = max(schur, state.kernel.noise_jitter)
    if state.mode == "gaussian":
        return PosteriorPrediction(mean=mean, sigma=schur, dof=math.inf)
    n = state.n_obs
    factor = (state.dof + state.data_quad) / (state.dof + n)
    return PosteriorPrediction(mean=mean, sigma=factor * schur, dof=state.dof + n)


def log_marginal(state: SurrogateState) -> float:
    """Log density of the observed values under the joint surrogate model."""
    n = state.n_obs
    logdet = 2.0 * float(np.log(np.diag(state.chol_lower)).sum())
    if state.mode == "gaussian":
        return -0.5 * (n * math.log(2.0 * math.pi) + logdet + state.data_quad)
    v = state.dof
    return (
        math.lgamma(0.5 * (v + n)) - math.lgamma(0.5 * v)
        - 0.5 * n * math.log(v * math.pi) - 0.5 * logdet
        - 0.5 * (v + n) * math.log1p(state.data_quad / v)
    )


def fit_hyperparams(state: SurrogateState, budget: int, *,
                    lengthscale_bounds=(0.05, 20.0),
                    signal_bounds=(1e-4, 1e2),
                    n_starts: int = 4) -> SurrogateState:
    """Re-estimate lengthscales and signal variance by maximizing the log marginal.

    Multi-start bounded simplex search over log-parameters; the dof is held
    fixed. Returns a state whose log marginal is never worse than the input's
    (the incumbent hyperparameters are always among the candidates). If every
    start fails to factorize, the previous hyperparameters are kept.
    """
    if budget <= 0:
        return state
    if state.n_obs < 2:
        raise ValueError("at least two observations are required to fit hyperparameters")
    dim = state.dim
    lo = np.concatenate([np.full(dim, math.log(lengthscale_bounds[0])),
                         [math.log(signal_bounds[0])]])
    hi = np.concatenate([np.full(dim, math.log(lengthscale_bounds[1])),
                         [math.log(signal_bounds[1])]])

    def rebuild(theta) -> SurrogateState:
        kernel = replace(state.kernel,
                         lengthscales=np.exp(theta[:dim]),
                         signal_variance=math.exp(theta[dim]))
        return build_state(state.points, state.values, kernel, dof=state.dof, mode=state.mode)

    def objective(theta) -> float:
        try:
            return -log_marginal(rebuild(theta))
        except NumericalError:
            return math.inf

    incumbent = np.concatenate([np.log(state.kernel.lengthscales),
                                [math.log(state.kernel.signal_variance)]])
    incumbent = np.clip(incumbent, lo, hi)
    starts = [incumbent]
    extra = halton(max(n_starts - 1, 0), dim + 1)
    for row in extra:
        starts.append(lo + row * (hi - lo))

    per_start = max(budget // len(starts), 1)
    best_theta, best_val = None, math.inf
    for start in starts:
        res = minimize_simplex(objective, start, lo, hi, max_evals=per_start,
                               expand=2.0, diameter_tol=1e-6)
        if res.fun < best_val:  # strict: ties keep the earlier start
            best_theta, best_val = res.x, res.fun

    current_val = -log_marginal(state)
    if best_theta is None or not math.isfinite(best_val):
        logger.warning("hyperparameter fit failed on every start; keeping previous kernel")
        return state
    if best_val >= current_val:
        return state
    return rebuild(best_theta)
