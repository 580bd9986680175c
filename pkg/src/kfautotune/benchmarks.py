"""Benchmark linear systems with ground-truth noise intensities.

Four classical plants of increasing dimension:

* ``tracking1d``  - double integrator on a line, position measured.
* ``msd``         - mass-spring-damper (m=1, k=1, b=0.2), position measured.
* ``tracking2d``  - planar constant-velocity target, both positions measured.
* ``cascade_msd`` - three coupled mass-spring-dampers (6 states, 3 sensors).

All use the sinusoidal input u(t) = 2 cos(0.75 t). The free parameters are
the diagonal process/measurement noise intensities, in the order listed by
``param_names``.
"""

from dataclasses import dataclass

import numpy as np

from .montecarlo import ControlSignal
from .statespace import ContinuousModel


@dataclass(frozen=True)
class BenchmarkSpec:
    """Identifier, free noise parameters and default experiment settings."""

    name: str
    param_names: tuple
    truth_params: tuple
    lower: tuple
    upper: tuple
    dt_list: tuple
    n_states: int
    n_outputs: int
    n_runs: int = 120
    n_steps: int = 200
    control: ControlSignal = ControlSignal(amplitude=2.0, frequency=0.75)


_SPECS = {
    "tracking1d": BenchmarkSpec(
        name="tracking1d",
        param_names=("v", "w"),
        truth_params=(1.0, 0.1),
        lower=(0.1, 0.01),
        upper=(5.0, 0.5),
        dt_list=(0.1, 0.5),
        n_states=2,
        n_outputs=1,
    ),
    "msd": BenchmarkSpec(
        name="msd",
        param_names=("v", "w"),
        truth_params=(1.0, 0.1),
        lower=(0.1, 0.01),
        upper=(5.0, 0.5),
        dt_list=(0.1, 0.5),
        n_states=2,
        n_outputs=1,
    ),
    "tracking2d": BenchmarkSpec(
        name="tracking2d",
        param_names=("v0", "v1", "w0", "w1"),
        truth_params=(1.0, 2.0, 0.2, 0.1),
        lower=(0.1, 0.1, 0.01, 0.01),
        upper=(5.0, 5.0, 0.5, 0.5),
        dt_list=(0.1, 0.5),
        n_states=4,
        n_outputs=2,
    ),
    "cascade_msd": BenchmarkSpec(
        name="cascade_msd",
        param_names=("v0", "v1", "v2", "w0", "w1", "w2"),
        truth_params=(1.0, 2.0, 3.0, 0.2, 0.1, 0.15),
        lower=(0.1, 0.1, 0.1, 0.01, 0.01, 0.01),
        upper=(5.0, 5.0, 5.0, 1.0, 1.0, 1.0),
        dt_list=(0.1, 0.25, 0.5, 1.0),
        n_states=6,
        n_outputs=3,
    ),
}

_MSD_MASS = 1.0
_MSD_SPRING = 1.0
_MSD_DAMPING = 0.2


def names() -> list[str]:
    return sorted(_SPECS)


def spec(name: str) -> BenchmarkSpec:
    try:
        return _SPECS[name]
    except KeyError:
        raise ValueError(f"unknown benchmark {name!r}; known: {', '.join(names())}") from None


def _split_params(bench: BenchmarkSpec, params) -> tuple[np.ndarray, np.ndarray]:
    params = np.atleast_1d(np.asarray(params, dtype=float))
    if params.shape != (len(bench.param_names),):
        raise ValueError(
            f"{bench.name} expects {len(bench.param_names)} noise parameters "
            f"({', '.join(bench.param_names)}), got shape {params.shape}")
    if np.any(params <= 0.0):
        raise ValueError("noise intensities must be positive")
    n_proc = sum(1 for p in bench.param_names if p.startswith("v"))
    return params[:n_proc], params[n_proc:]


def build(name: str, params) -> ContinuousModel:
    """Instantiate the named benchmark with the given noise intensities."""
    bench = spec(name)
    v, w = _split_params(bench, params)

    if name == "tracking1d":
        return ContinuousModel(
            A=[[0.0, 1.0], [0.0, 0.0]],
            G=[[0.0], [1.0]],
            Gamma=[[0.0], [1.0]],
            H=[[1.0, 0.0]],
            V=np.diag(v),
            W=np.diag(w),
        )

    if name == "msd":
        m, k, b = _MSD_MASS, _MSD_SPRING, _MSD_DAMPING
        return ContinuousModel(
            A=[[0.0, 1.0], [-k / m, -b / m]],
            G=[[0.0], [1.0 / m]],
            Gamma=[[0.0], [1.0]],
            H=[[1.0, 0.0]],
            V=np.diag(v),
            W=np.diag(w),
        )

    if name == "tracking2d":
        a_mat = np.zeros((4, 4))
        a_mat[0, 2] = 1.0
        a_mat[1, 3] = 1.0
        gamma = np.zeros((4, 2))
        gamma[2, 0] = 1.0
        gamma[3, 1] = 1.0
        h_mat = np.zeros((2, 4))
        h_mat[0, 0] = 1.0
        h_mat[1, 1] = 1.0
        return ContinuousModel(
            A=a_mat,
            G=[[0.0], [0.0], [1.0], [1.0]],
            Gamma=gamma,
            H=h_mat,
            V=np.diag(v),
            W=np.diag(w),
        )

    # cascade_msd: three carts in a chain, force applied to the last one
    m, k, b = _MSD_MASS, _MSD_SPRING, _MSD_DAMPING
    a_mat = np.array([
        [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [-2 * k / m, -2 * b / m, k / m, b / m, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        [k / m, b / m, -2 * k / m, -2 * b / m, k / m, b / m],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, k / m, b / m, -k / m, -b / m],
    ])
    gamma = np.zeros((6, 3))
    gamma[1, 0] = 1.0
    gamma[3, 1] = 1.0
    gamma[5, 2] = 1.0
    h_mat = np.zeros((3, 6))
    h_mat[0, 0] = 1.0
    h_mat[1, 2] = 1.0
    h_mat[2, 4] = 1.0
    return ContinuousModel(
        A=a_mat,
        G=[[0.0], [0.0], [0.0], [0.0], [0.0], [1.0]],
        Gamma=gamma,
        H=h_mat,
        V=np.diag(v),
        W=np.diag(w),
    )
