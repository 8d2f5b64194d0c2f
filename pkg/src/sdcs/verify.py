"""Randomized invariant suites shared by the ``verify`` command and the tests.

Each suite returns the raw measurements; callers decide pass/fail against
the thresholds below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decode import ConstraintNorm, DecodeProblem, SolverConfig, decode_onestage
from .linops import check_sigma_bound
from .measure import Stream, gen_noise
from .quantize import DEFAULT_FILTERS, ONE_BIT, QuantizerSpec, recursion_residual, sigma_delta

RECURSION_TOL = 1e-10
ORACLE_X_TOL = 1e-5
ORACLE_OBJ_TOL = 1e-6

SIGMA_SIZES = (8, 16, 32, 64, 128)
SIGMA_ORDERS = (1, 2, 3)

_TAG_VERIFY = 7


def recursion_suite(runs=1000, seed=0):
    """Largest |D**r u - (y - q)| for each random run (orders 1-3, greedy and filtered)."""
    out = []
    for i in range(runs):
        s = Stream(seed, _TAG_VERIFY, 0, i)
        r = 1 + int(s.uniform(1)[0] * 3)
        length = 1 + int(s.uniform(1)[0] * 400)
        filtered = s.uniform(1)[0] < 0.5 and r in DEFAULT_FILTERS
        if filtered:
            mu = 0.6 * s.uniform(1)[0]
            spec = QuantizerSpec(ONE_BIT, r=r, rule="filtered", mu=mu, gamma=np.inf)
        else:
            delta = 0.005 + 0.5 * s.uniform(1)[0]
            mu = 2.0 * s.uniform(1)[0]
            spec = QuantizerSpec.greedy(r, delta, mu)
        y = (2.0 * s.uniform(length) - 1.0) * mu
        out.append((r, spec.rule.value, recursion_residual(y, sigma_delta(spec, y), r)))
    return out


def sigma_suite(sizes=SIGMA_SIZES, orders=SIGMA_ORDERS):
    return [(m, r, check_sigma_bound(m, r)) for m in sizes for r in orders]


@dataclass
class OracleCase:
    m: int
    N: int
    r: int
    norm: str
    eps: float
    x_dist: float
    obj_diff: float
    converged: bool


def tiny_instances(count=50, seed=0):
    """Random (DecodeProblem, x) pairs with N <= 12 and m <= 10."""
    from .measure import gen_matrix, gen_sparse

    for i in range(count):
        s = Stream(seed, _TAG_VERIFY, 1, i)
        u = s.uniform(6)
        N = 4 + int(u[0] * 9)
        m = 3 + int(u[1] * 8)
        r = 1 + int(u[2] * 3)
        k = 1 + int(u[3] * min(2, N))
        delta = (0.01, 0.05, 0.1)[int(u[4] * 3)]
        norm = ConstraintNorm.L2BALL if i % 2 == 0 else ConstraintNorm.LINFBOX
        eps = 0.0 if i % 4 < 2 else 0.002 + 0.01 * u[5]
        phi = gen_matrix("gaussian", m, N, seed + 1000 + i).matrix
        x = gen_sparse(N, k, 1.0, seed, key=(1000 + i,)).vector
        y = phi @ x + gen_noise(m, eps, seed, key=(1000 + i,)).vector
        spec = QuantizerSpec.greedy(r, delta, float(np.max(np.abs(y))) + delta)
        q = sigma_delta(spec, y).q
        yield DecodeProblem(phi, q, r, spec.gamma, eps, norm), x


def oracle_suite(count=50, seed=0, cfg=None):
    """Distance and objective gap to the reference solver on tiny instances.

    The default config asks for a 1e-9 relative gap: on these degenerate
    little programs the minimizer moves by roughly sqrt(gap).
    """
    from .reference import reference_onestage

    cfg = cfg or SolverConfig(tol_gap=1e-9)
    cases = []
    for p, _ in tiny_instances(count, seed):
        res = decode_onestage(p, cfg)
        xr, objr = reference_onestage(p.phi, p.q, p.r, p.gamma, p.eps, p.constraint_norm)
        cases.append(OracleCase(p.m, p.N, p.r, p.constraint_norm.value, p.eps,
                                float(np.linalg.norm(res.x_hat - xr)),
                                float(abs(res.objective - objr)), res.converged))
    return cases
