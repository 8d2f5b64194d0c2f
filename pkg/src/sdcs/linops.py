"""Difference operators and the small dense helpers built on them.

The first-order difference matrix ``D`` is the m x m lower-bidiagonal matrix
with ones on the diagonal and minus ones on the first subdiagonal.  Powers
``D**r`` and their inverses are applied matrix-free: ``D`` is a first
difference and ``D**-1`` is a prefix sum, so both cost O(r*m).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi

import numpy as np

#: Largest size for which :meth:`DiffOperator.dense` will build an explicit matrix.
DENSE_THRESHOLD = 256

#: Largest ``min(m, n)`` accepted by :func:`singular_values`.
SVD_CAP = 512


@dataclass(frozen=True)
class DiffOperator:
    """The operator ``D**r`` acting on vectors of length ``m``."""

    m: int
    r: int = 1

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"size must be positive, got m={self.m}")
        if self.r < 0:
            raise ValueError(f"order must be non-negative, got r={self.r}")

    def apply(self, v):
        return apply_Dr(self, v)

    def solve(self, v):
        return apply_Dr_inv(self, v)

    def solve_T(self, v):
        """Apply ``(D**r)**-T``: reverse prefix sums."""
        v = _check_len(self, v)
        w = np.asarray(v, dtype=np.longdouble)
        for _ in range(self.r):
            w = np.cumsum(w[::-1], axis=0)[::-1]
        return w.astype(float)

    def apply_T(self, v):
        """Apply ``(D**r)**T``: w_i = v_i - v_{i+1}."""
        w = _check_len(self, v).copy()
        for _ in range(self.r):
            w[:-1] -= w[1:].copy()
        return w

    def dense(self, power=None, threshold=DENSE_THRESHOLD):
        """Explicit matrix of ``D**power`` (default ``power = r``, may be negative)."""
        if self.m > threshold:
            raise ValueError(
                f"refusing to materialize a {self.m}x{self.m} difference matrix "
                f"(threshold {threshold})")
        power = self.r if power is None else power
        D = np.eye(self.m) - np.eye(self.m, k=-1)
        if power >= 0:
            return np.linalg.matrix_power(D, power)
        # D**-1 is the lower-triangular all-ones matrix; keep it exact.
        L = np.tril(np.ones((self.m, self.m)))
        return np.linalg.matrix_power(L, -power)


def _check_len(op, v):
    v = np.asarray(v)
    if v.dtype != np.longdouble:
        v = v.astype(float, copy=False)
    if v.shape[0] != op.m:
        raise ValueError(f"length mismatch: operator has m={op.m}, vector has {v.shape[0]}")
    return v


def apply_Dr(op: DiffOperator, v):
    """Return ``D**r v`` by ``r`` first-difference passes.

    ``v`` may be a vector or a 2-D array, in which case columns are differenced.
    Extended-precision input stays extended.
    """
    w = _check_len(op, v).copy()
    for _ in range(op.r):
        w[1:] -= w[:-1].copy()
    return w


def apply_Dr_inv(op: DiffOperator, v):
    """Return ``D**-r v`` by ``r`` prefix-sum passes.

    Accumulation is done in extended precision; repeated cumulative sums of
    length m otherwise lose digits quickly once r >= 2.  The result is
    rounded to float64 unless ``v`` is already ``np.longdouble``; at m = 1024,
    r = 3 the entries reach ~1e8 and that final rounding alone costs ~1e-9
    relative accuracy on a round trip.
    """
    v = _check_len(op, v)
    w = v.astype(np.longdouble)
    for _ in range(op.r):
        w = np.cumsum(w, axis=0)
    return w if v.dtype == np.longdouble else w.astype(float)


def singular_values(M, cap=SVD_CAP):
    """Non-increasing singular values of a dense matrix (verification scale only)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if min(M.shape) > cap:
        raise ValueError(f"singular_values is capped at min(m, n) <= {cap}, got {M.shape}")
    return np.linalg.svd(M, compute_uv=False)


def sigma_lower_bound(m: int, r: int, j):
    """Lower bound ``(m / j)**r / (3 pi r)**r`` on the j-th singular value of ``D**-r``."""
    j = np.asarray(j, dtype=float)
    return (m / j) ** r / (3.0 * pi * r) ** r


def check_sigma_bound(m: int, r: int) -> bool:
    """Check the singular-value lower bound for ``D**-r`` against a dense SVD.

    Returns ``False`` on any violation rather than raising.
    """
    op = DiffOperator(m, r)
    sv = singular_values(op.dense(power=-r))
    j = np.arange(1, m + 1)
    return bool(np.all(sv >= sigma_lower_bound(m, r, j)))
