"""Box-constrained Nelder-Mead downhill simplex minimizer.

Candidate vertices are clamped to the box before evaluation. The move
coefficients (reflection, expansion, contraction, shrink) are exposed because
some campaigns run with expansion = 1, in which case the expansion point
coincides with the reflection point.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SimplexResult:
    x: np.ndarray
    fun: float
    n_evals: int
    converged: bool


def expansion_point(centroid: np.ndarray, reflected: np.ndarray, expand: float) -> np.ndarray:
    if expand == 1.0:
        # algebraically the reflection point; keep it exact
        return reflected.copy()
    return centroid + expand * (reflected - centroid)


def minimize_simplex(f, x0, lower, upper, *, max_evals: int = 200,
                     reflect: float = 1.0, expand: float = 1.0,
                     contract: float = 0.5, shrink: float = 0.5,
                     diameter_tol: float = 1e-4, step: float = 0.1) -> SimplexResult:
    x0 = np.asarray(x0, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(x0 < lower) or np.any(x0 > upper):
        raise ValueError("start point must lie within the box")
    dim = x0.shape[0]

    def clamp(x):
        return np.clip(x, lower, upper)

    evals = 0

    def call(x):
        nonlocal evals
        evals += 1
        return float(f(x))

    # initial simplex: perturb each coordinate, flipping direction at the box edge
    verts = [x0.copy()]
    for i in range(dim):
        v = x0.copy()
        delta = step * (upper[i] - lower[i])
        v[i] = v[i] + delta if v[i] + delta <= upper[i] else v[i] - delta
        verts.append(clamp(v))
    verts = np.asarray(verts)
    fvals = np.array([call(v) for v in verts])

    converged = False
    while evals < max_evals:
        order = np.argsort(fvals, kind="stable")
        verts = verts[order]
        fvals = fvals[order]
        if np.max(np.linalg.norm(verts[1:] - verts[0], axis=1), initial=0.0) < diameter_tol:
            converged = True
            break

        centroid = verts[:-1].mean(axis=0)
        reflected = clamp(centroid + reflect * (centroid - verts[-1]))
        f_r = call(reflected)

        if f_r < fvals[0]:
            expanded = clamp(expansion_point(centroid, reflected, expand))
            f_e = call(expanded) if evals < max_evals else f_r
            if f_e < f_r:
                verts[-1], fvals[-1] = expanded, f_e
            else:
                verts[-1], fvals[-1] = reflected, f_r
        elif f_r < fvals[-2]:
            verts[-1], fvals[-1] = reflected, f_r
        else:
            if f_r < fvals[-1]:
                contracted = clamp(centroid + contract * (reflected - centroid))
            else:
                contracted = clamp(centroid + contract * (verts[-1] - centroid))
            f_c = call(contracted) if evals < max_evals else np.inf
            if f_c < min(f_r, fvals[-1]):
                verts[-1], fvals[-1] = contracted, f_c
            else:
                # shrink the whole simplex toward the best vertex
                for i in range(1, dim + 1):
                    if evals >= max_evals:
                        break
                    verts[i] = clamp(verts[0] + shrink * (verts[i] - verts[0]))
                    fvals[i] = call(verts[i])

    best = int(np.argmin(fvals))
    return SimplexResult(x=verts[best].copy(), fun=float(fvals[best]),
                         n_evals=evals, converged=converged)
