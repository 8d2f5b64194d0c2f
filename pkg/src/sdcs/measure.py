"""Seeded generation of sensing matrices, test signals and bounded noise.

Random streams
--------------
Every draw comes from a Philox4x64-10 counter-based generator keyed by
``numpy.random.SeedSequence(entropy=seed, spawn_key=(tag, *key))``.  Raw 64-bit
words are turned into doubles as ``(w >> 11) * 2**-53``, and Gaussians use the
Box-Muller pair ``sqrt(-2 log(1-u1)) * (cos(2 pi u2), sin(2 pi u2))``, so the
output only depends on the Philox bit stream (which numpy keeps stable), not on
``Generator`` method internals.

Tags: 0 matrix rows (key = (dist, row)), 1 sparse signals, 2 compressible
signals, 3 noise.  The harness appends the trial index to the key.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

TAG_MATRIX, TAG_SPARSE, TAG_COMPRESSIBLE, TAG_NOISE = 0, 1, 2, 3


class Distribution(str, enum.Enum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown distribution {value!r}; expected gaussian or bernoulli") from None


_DIST_CODE = {Distribution.GAUSSIAN: 0, Distribution.BERNOULLI: 1}


class Stream:
    """Pinned uniform/Gaussian source on top of a Philox bit generator."""

    def __init__(self, seed: int, *key: int):
        ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
        self._bg = np.random.Philox(ss)

    def raw(self, n):
        return self._bg.random_raw(int(n))

    def uniform(self, n):
        """n doubles in [0, 1)."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def normal(self, n):
        n = int(n)
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        rad = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        ang = 2.0 * np.pi * u[:, 1]
        out = np.empty((pairs, 2))
        out[:, 0] = rad * np.cos(ang)
        out[:, 1] = rad * np.sin(ang)
        return out.ravel()[:n]

    def signs(self, n):
        return np.where(self.raw(n) >> np.uint64(63), 1.0, -1.0)

    def permutation(self, n, k=None):
        """First ``k`` entries of a uniform random permutation of range(n) (Fisher-Yates)."""
        n = int(n)
        k = n if k is None else int(k)
        idx = np.arange(n)
        u = self.uniform(k)
        for i in range(k):
            j = i + int(u[i] * (n - i))
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k]


@dataclass(frozen=True)
class MeasurementEnsemble:
    matrix: np.ndarray
    distribution: Distribution
    seed: int

    @property
    def shape(self):
        return self.matrix.shape

    def rows(self, m):
        """The ensemble made of the first ``m`` rows (same seed)."""
        if not 1 <= m <= self.matrix.shape[0]:
            raise ValueError(f"cannot take {m} rows of a {self.matrix.shape[0]}-row ensemble")
        return MeasurementEnsemble(self.matrix[:m], self.distribution, self.seed)


@dataclass(frozen=True)
class SparseSignal:
    vector: np.ndarray
    support: np.ndarray
    radius: float


@dataclass(frozen=True)
class CompressibleSignal:
    vector: np.ndarray
    p: float


@dataclass(frozen=True)
class NoiseVec:
    vector: np.ndarray
    eps: float


def gen_matrix(dist, m: int, N: int, seed: int) -> MeasurementEnsemble:
    """m x N matrix with i.i.d. mean-zero unit-variance entries.

    Row ``i`` has its own stream, so the first m rows for a seed are the same
    whatever the total number of rows requested.
    """
    if m < 1 or N < 1:
        raise ValueError(f"matrix dimensions must be positive, got {m}x{N}")
    dist = Distribution.parse(dist)
    code = _DIST_CODE[dist]
    A = np.empty((m, N))
    for i in range(m):
        s = Stream(seed, TAG_MATRIX, code, i)
        A[i] = s.normal(N) if dist is Distribution.GAUSSIAN else s.signs(N)
    return MeasurementEnsemble(A, dist, int(seed))


def gen_sparse(N: int, k: int, radius: float, seed: int, key=()) -> SparseSignal:
    """k-sparse vector, uniform support, restriction uniform in the radius-``radius`` ball."""
    if not 1 <= k <= N:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={N}")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    s = Stream(seed, TAG_SPARSE, *key)
    support = np.sort(s.permutation(N, k))
    g = s.normal(k)
    norm = np.linalg.norm(g)
    while norm == 0.0:  # pragma: no cover - probability zero
        g = s.normal(k)
        norm = np.linalg.norm(g)
    rho = radius * s.uniform(1)[0] ** (1.0 / k)
    x = np.zeros(N)
    x[support] = g * (rho / norm)
    return SparseSignal(x, support, float(radius))


def gen_compressible(N: int, p: float, seed: int, key=()) -> CompressibleSignal:
    """Randomly permuted vector whose i-th entry is Uniform[-i**(-1/p), i**(-1/p)]."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    s = Stream(seed, TAG_COMPRESSIBLE, *key)
    bounds = np.arange(1, N + 1, dtype=float) ** (-1.0 / p)
    vals = (2.0 * s.uniform(N) - 1.0) * bounds
    perm = s.permutation(N)
    x = np.empty(N)
    x[perm] = vals
    return CompressibleSignal(x, float(p))


def gen_noise(m: int, eps: float, seed: int, key=()) -> NoiseVec:
    """i.i.d. Uniform[-eps, eps] entries."""
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    if eps == 0:
        return NoiseVec(np.zeros(m), 0.0)
    s = Stream(seed, TAG_NOISE, *key)
    return NoiseVec((2.0 * s.uniform(m) - 1.0) * eps, float(eps))


def best_k_term_error_l1(x, k: int) -> float:
    """sigma_k(x)_1: l1 norm of everything but the k largest-magnitude entries."""
    mags = np.sort(np.abs(np.asarray(x, dtype=float)))[::-1]
    return float(mags[k:].sum())
