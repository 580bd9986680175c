"""Continuous-time LTI plant descriptions and zero-order-hold discretization.

A continuous plant

    dx/dt = A x + G u + Gamma v,    z = H x + w,

with white-noise intensities V (process) and W (measurement), maps for a
sample interval dt to the discrete model

    x_k = F x_{k-1} + B u_k + v_k,      z_k = H x_k + w_k,

    F = exp(A dt)
    B = (int_0^dt exp(A s) ds) G
    Q = int_0^dt exp(A s) Gamma V Gamma^T exp(A^T s) ds
    R = W / dt.

Both integrals are evaluated in closed form through augmented matrix
exponentials (van Loan construction), so Q is exact to the accuracy of the
matrix exponential itself.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError

_SYM_TOL = 1e-9
_Q_ASYM_TOL = 1e-8
_EIG_CLIP_TOL = 1e-10


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _check_symmetric(mat: np.ndarray, name: str, tol: float = _SYM_TOL) -> None:
    scale = max(1.0, float(np.abs(mat).max(initial=0.0)))
    if np.abs(mat - mat.T).max(initial=0.0) > tol * scale:
        raise ValueError(f"{name} is not symmetric within tolerance {tol}")


def symmetrize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


@dataclass(frozen=True, eq=False)
class ContinuousModel:
    """Continuous-time linear plant with process/measurement noise intensities.

    ``A`` (n_x, n_x) drift, ``G`` (n_x, n_u) control gain, ``Gamma``
    (n_x, n_v) noise injection, ``H`` (n_z, n_x) observation, ``V`` (n_v, n_v)
    process-noise intensity (symmetric PSD), ``W`` (n_z, n_z) measurement-noise
    intensity (symmetric PD).
    """

    A: np.ndarray
    G: np.ndarray
    Gamma: np.ndarray
    H: np.ndarray
    V: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A, "A"))
        object.__setattr__(self, "G", _as_matrix(self.G, "G"))
        object.__setattr__(self, "Gamma", _as_matrix(self.Gamma, "Gamma"))
        object.__setattr__(self, "H", _as_matrix(self.H, "H"))
        object.__setattr__(self, "V", _as_matrix(self.V, "V"))
        object.__setattr__(self, "W", _as_matrix(self.W, "W"))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got shape {self.A.shape}")
        if self.G.shape[0] != n:
            raise ValueError(f"G must have {n} rows, got shape {self.G.shape}")
        if self.Gamma.shape[0] != n:
            raise ValueError(f"Gamma must have {n} rows, got shape {self.Gamma.shape}")
        if self.H.shape[1] != n:
            raise ValueError(f"H must have {n} columns, got shape {self.H.shape}")
        n_v = self.Gamma.shape[1]
        n_z = self.H.shape[0]
        if self.V.shape != (n_v, n_v):
            raise ValueError(f"V must have shape ({n_v}, {n_v}), got {self.V.shape}")
        if self.W.shape != (n_z, n_z):
            raise ValueError(f"W must have shape ({n_z}, {n_z}), got {self.W.shape}")
        _check_symmetric(self.V, "V")
        _check_symmetric(self.W, "W")
        v_scale = max(1.0, float(np.abs(self.V).max(initial=0.0)))
        if np.linalg.eigvalsh(symmetrize(self.V)).min(initial=0.0) < -_EIG_CLIP_TOL * v_scale:
            raise ValueError("V must be positive semidefinite")
        try:
            np.linalg.cholesky(symmetrize(self.W))
        except np.linalg.LinAlgError:
            raise ValueError("W must be positive definite") from None

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.G.shape[1]

    @property
    def n_v(self) -> int:
        return self.Gamma.shape[1]

    @property
    def n_z(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True, eq=False)
class DiscreteModel:
    """Sample-interval discretization of a :class:`ContinuousModel`.

    ``Q`` is symmetric PSD (eigenvalues clipped at zero when above -1e-10);
    ``R`` is symmetric PSD, and positive definite whenever it comes from
    :func:`discretize` (R = W/dt with W PD). A singular R is accepted here so
    noise-free simulation models remain expressible; the filter update itself
    requires the innovation covariance to be PD.
    """

    F: np.ndarray
    B: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "F", _as_matrix(self.F, "F"))
        object.__setattr__(self, "B", _as_matrix(self.B, "B"))
        object.__setattr__(self, "H", _as_matrix(self.H, "H"))
        object.__setattr__(self, "Q", _as_matrix(self.Q, "Q"))
        object.__setattr__(self, "R", _as_matrix(self.R, "R"))
        object.__setattr__(self, "dt", float(self.dt))
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        n = self.F.shape[0]
        if self.F.shape != (n, n):
            raise ValueError(f"F must be square, got shape {self.F.shape}")
        if self.B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got shape {self.B.shape}")
        if self.H.shape[1] != n:
            raise ValueError(f"H must have {n} columns, got shape {self.H.shape}")
        if self.Q.shape != (n, n):
            raise ValueError(f"Q must have shape ({n}, {n}), got {self.Q.shape}")
        n_z = self.H.shape[0]
        if self.R.shape != (n_z, n_z):
            raise ValueError(f"R must have shape ({n_z}, {n_z}), got {self.R.shape}")
        _check_symmetric(self.Q, "Q")
        _check_symmetric(self.R, "R")
        if np.linalg.eigvalsh(symmetrize(self.Q)).min(initial=0.0) < -_EIG_CLIP_TOL:
            raise ValueError("Q must be positive semidefinite")
        r_scale = max(1.0, float(np.abs(self.R).max(initial=0.0)))
        if np.linalg.eigvalsh(symmetrize(self.R)).min(initial=0.0) < -_EIG_CLIP_TOL * r_scale:
            raise ValueError("R must be positive semidefinite")

    @property
    def n_x(self) -> int:
        return self.F.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_z(self) -> int:
        return self.H.shape[0]


def matrix_exponential(mat: np.ndarray) -> np.ndarray:
    """Matrix exponential via scaling-and-squaring with a Pade approximant."""
    arr = _as_matrix(mat, "matrix")
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"matrix must be square, got shape {arr.shape}")
    return scipy.linalg.expm(arr)


def _clip_psd(mat: np.ndarray, name: str) -> np.ndarray:
    """Symmetrize and clip tiny negative eigenvalues; larger violations raise."""
    sym = symmetrize(mat)
    evals, vecs = np.linalg.eigh(sym)
    if evals.min(initial=0.0) < -_EIG_CLIP_TOL:
        raise NumericalError(
            f"{name} has eigenvalue {evals.min():.3e} below the PSD clip tolerance",
            matrix=sym,
        )
    if evals.min(initial=0.0) < 0.0:
        sym = symmetrize(vecs @ np.diag(np.clip(evals, 0.0, None)) @ vecs.T)
    return sym


def discretize(model: ContinuousModel, dt: float) -> DiscreteModel:
    """Discretize a continuous plant at sample interval ``dt`` (van Loan)."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    n = model.n_x
    n_u = model.n_u

    transition = matrix_exponential(model.A * dt)

    # noise integral: exponentiate [[-A, Gamma V Gamma^T], [0, A^T]] * dt and
    # combine the upper-right block with exp(A^T dt)
    noise_density = model.Gamma @ model.V @ model.Gamma.T
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = -model.A
    aug[:n, n:] = noise_density
    aug[n:, n:] = model.A.T
    phi = matrix_exponential(aug * dt)
    q_raw = phi[n:, n:].T @ phi[:n, n:]
    scale = max(1.0, float(np.abs(q_raw).max(initial=0.0)))
    if np.abs(q_raw - q_raw.T).max(initial=0.0) > _Q_ASYM_TOL * scale:
        raise NumericalError(
            "van Loan Q asymmetry exceeds tolerance before symmetrization",
            matrix=q_raw,
        )
    q_mat = _clip_psd(q_raw, "Q")

    # control integral: exp([[A, G], [0, 0]] * dt) upper-right block equals
    # (int_0^dt exp(A s) ds) G
    aug_b = np.zeros((n + n_u, n + n_u))
    aug_b[:n, :n] = model.A
    aug_b[:n, n:] = model.G
    b_mat = matrix_exponential(aug_b * dt)[:n, n:]

    return DiscreteModel(
        F=transition,
        B=b_mat,
        H=model.H.copy(),
        Q=q_mat,
        R=model.W / dt,
        dt=dt,
    )
