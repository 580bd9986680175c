"""Expected-improvement acquisition and a DIRECT global maximizer.

The improvement at a candidate is max(0, best - Y) under the surrogate
posterior Y. For a location-scale Student-t posterior with dof v, mean u and
scale sigma the expectation has the closed form

    EI = (best - u) Psi(z) + v / (v - 1) * (1 + z^2 / v) * sigma * psi(z),
    z  = (best - u) / sigma,

with Psi/psi the standard Student-t CDF/PDF; the Gaussian analogue
(best - u) Phi(z) + sigma phi(z) is used when dof is infinite. ``sigma`` here
is the distribution's scale (standard-deviation-like), i.e. the square root
of the squared-scale parameter reported by the surrogate posterior.

The maximizer is DIRECT (dividing rectangles): deterministic, derivative-free
trisection of potentially-optimal boxes on the normalized unit cube.
"""

import math
from dataclasses import dataclass

import numpy as np

from .special import betainc_reg

_SQRT2 = math.sqrt(2.0)
_HULL_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class SearchSpace:
    """Axis-aligned box of admissible parameter vectors."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.shape != upper.shape:
            raise ValueError("lower and upper must have matching shapes")
        if np.any(lower >= upper):
            raise ValueError("lower bounds must be strictly below upper bounds")

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, q, tol: float = 1e-12) -> bool:
        q = np.asarray(q, dtype=float)
        span = self.upper - self.lower
        return bool(np.all(q >= self.lower - tol * span) and np.all(q <= self.upper + tol * span))

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * (self.upper - self.lower)

    def to_unit(self, q) -> np.ndarray:
        return (np.asarray(q, dtype=float) - self.lower) / (self.upper - self.lower)


@dataclass(frozen=True)
class DirectConfig:
    max_evals: int = 2000
    max_iters: int = 200
    epsilon: float = 1e-4

    def __post_init__(self):
        if self.max_evals < 1 or self.max_iters < 1:
            raise ValueError("budgets must be positive")
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be non-negative")


def student_t_pdf(z: float, dof: float) -> float:
    """Density of the standard Student-t distribution."""
    if dof <= 0.0:
        raise ValueError(f"dof must be positive, got {dof}")
    log_norm = math.lgamma(0.5 * (dof + 1.0)) - math.lgamma(0.5 * dof) \
        - 0.5 * math.log(dof * math.pi)
    return math.exp(log_norm - 0.5 * (dof + 1.0) * math.log1p(z * z / dof))


def student_t_cdf(z: float, dof: float) -> float:
    """CDF of the standard Student-t distribution via the incomplete beta."""
    if dof <= 0.0:
        raise ValueError(f"dof must be positive, got {dof}")
    if z == 0.0:
        return 0.5
    tail = 0.5 * betainc_reg(0.5 * dof, 0.5, dof / (dof + z * z))
    return 1.0 - tail if z > 0.0 else tail


def _norm_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _norm_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / _SQRT2))


def expected_improvement(best: float, u: float, sigma: float, dof: float) -> float:
    """Closed-form expected improvement E[max(0, best - Y)].

    ``dof = inf`` selects the Gaussian posterior; finite dof must exceed 2.
    """
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    z = (best - u) / sigma
    if math.isinf(dof):
        value = (best - u) * _norm_cdf(z) + sigma * _norm_pdf(z)
    else:
        if dof <= 2.0:
            raise ValueError(f"dof must exceed 2 (or be infinite), got {dof}")
        value = (best - u) * student_t_cdf(z, dof) \
            + dof / (dof - 1.0) * (1.0 + z * z / dof) * sigma * student_t_pdf(z, dof)
    return max(value, 0.0)


def _half_diagonal(levels: np.ndarray) -> float:
    sides = 3.0 ** (-levels.astype(float))
    return 0.5 * float(math.sqrt(float((sides * sides).sum())))


class _Partition:
    """Growing rectangle store: centers/levels as lists, sizes/values as arrays."""

    def __init__(self, center: np.ndarray, value: float):
        self.centers = [center]
        self.levels = [np.zeros(center.shape[0], dtype=int)]
        self.values = [value]
        self.sizes = [_half_diagonal(self.levels[0])]

    def add(self, center: np.ndarray, levels: np.ndarray, value: float) -> None:
        self.centers.append(center)
        self.levels.append(levels)
        self.values.append(value)
        self.sizes.append(_half_diagonal(levels))

    def relevel(self, idx: int, levels: np.ndarray) -> None:
        self.levels[idx] = levels
        self.sizes[idx] = _half_diagonal(levels)


def _potentially_optimal(part: _Partition, f_min: float, epsilon: float) -> list[int]:
    """Indices of rectangles on the lower (size, value) convex hull."""
    sizes = np.asarray(part.sizes)
    vals = np.asarray(part.values)
    keys = np.round(sizes, 12)
    uniq, inverse = np.unique(keys, return_inverse=True)
    # representative of each size group: smallest value, ties to oldest rect
    order = np.lexsort((np.arange(vals.shape[0]), vals, inverse))
    group_sorted = inverse[order]
    first = np.empty(group_sorted.shape[0], dtype=bool)
    first[0] = True
    first[1:] = group_sorted[1:] != group_sorted[:-1]
    reps = order[first]

    d_arr = uniq
    f_arr = vals[reps]
    m = len(reps)
    if m == 1:
        return [int(reps[0])]
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = (f_arr[None, :] - f_arr[:, None]) / (d_arr[None, :] - d_arr[:, None])
    idx = np.arange(m)
    below = idx[:, None] < idx[None, :]
    above = idx[:, None] > idx[None, :]
    k_lo = np.where(below, slopes, -math.inf).max(axis=0)
    k_hi = np.where(above, slopes, math.inf).min(axis=0)
    ok = k_lo <= k_hi + _HULL_SLACK
    # require non-trivial potential improvement over the incumbent
    threshold = f_min - epsilon * abs(f_min)
    with np.errstate(invalid="ignore"):
        passes_eps = f_arr - k_hi * d_arr <= threshold + _HULL_SLACK
    passes_eps[-1] = True  # largest group has no upper neighbor
    return [int(r) for r in reps[ok & passes_eps]]


def direct_maximize(f, space: SearchSpace, cfg: DirectConfig) -> tuple[np.ndarray, float]:
    """Maximize ``f`` over the box by the DIRECT algorithm.

    Deterministic for deterministic ``f``; never samples outside the box;
    returns the best sampled point and its value once the evaluation or
    iteration budget is exhausted.
    """
    dim = space.dim

    evals = 0

    def g(u: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        value = float(f(space.from_unit(u)))
        if math.isnan(value):
            raise ValueError(f"objective returned NaN at {space.from_unit(u)}")
        return -value

    center = np.full(dim, 0.5)
    part = _Partition(center, g(center))
    best_u, best_g = center, part.values[0]

    for _ in range(cfg.max_iters):
        if evals >= cfg.max_evals:
            break
        optimal = _potentially_optimal(part, best_g, cfg.epsilon)
        if not optimal:
            break
        for rect_idx in optimal:
            if evals >= cfg.max_evals:
                break
            levels = part.levels[rect_idx]
            center = part.centers[rect_idx]
            min_level = levels.min()
            long_dims = np.flatnonzero(levels == min_level)
            delta = 3.0 ** (-(min_level + 1.0))
            sampled = []
            for dim_idx in long_dims:
                if evals + 2 > cfg.max_evals:
                    break
                plus = center.copy()
                plus[dim_idx] += delta
                minus = center.copy()
                minus[dim_idx] -= delta
                g_plus, g_minus = g(plus), g(minus)
                for u_pt, g_val in ((plus, g_plus), (minus, g_minus)):
                    if g_val < best_g:
                        best_u, best_g = u_pt, g_val
                sampled.append((min(g_plus, g_minus), dim_idx, plus, g_plus, minus, g_minus))
            if not sampled:
                continue
            sampled.sort(key=lambda item: (item[0], item[1]))
            current = levels.copy()
            for _, dim_idx, plus, g_plus, minus, g_minus in sampled:
                current[dim_idx] += 1
                part.add(plus, current.copy(), g_plus)
                part.add(minus, current.copy(), g_minus)
            part.relevel(rect_idx, current)

    return space.from_unit(best_u), -best_g
