"""Deterministic low-discrepancy sampling (Halton sequence)."""

import numpy as np

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53)


def _radical_inverse(base: int, index: int) -> float:
    value = 0.0
    inv = 1.0 / base
    factor = inv
    while index > 0:
        value += (index % base) * factor
        index //= base
        factor *= inv
    return value


def halton(n_points: int, dim: int, shift=None) -> np.ndarray:
    """First ``n_points`` of the ``dim``-dimensional Halton sequence in [0, 1).

    ``shift`` applies a per-dimension rotation (mod 1), which randomizes the
    sequence while preserving its low discrepancy.
    """
    if dim > len(_PRIMES):
        raise ValueError(f"at most {len(_PRIMES)} dimensions supported, got {dim}")
    pts = np.empty((n_points, dim))
    for j in range(dim):
        base = _PRIMES[j]
        for i in range(n_points):
            pts[i, j] = _radical_inverse(base, i + 1)
    if shift is not None:
        pts = np.mod(pts + np.asarray(shift, dtype=float)[None, :], 1.0)
    return pts
