"""Small-scale reference solvers built on cvxpy.

These pose the decoding programs literally, with an explicit dense
``D**-r``, and hand them to a generic conic solver.  They share no code with
:mod:`sdcs.solver` and are only meant for cross-checking on tiny instances.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np

from .linops import DiffOperator

log = logging.getLogger(__name__)

_SIZE_CAP = 64
_TOL = dict(tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12, tol_ktratio=1e-10,
            max_iter=500)


def _cvxpy():
    import cvxpy as cp  # deferred: only the verification paths need it

    return cp


def _solve(prob):
    cp = _cvxpy()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        try:
            prob.solve(solver=cp.CLARABEL, **_TOL)
        except cp.SolverError:
            prob.solve(solver=cp.CLARABEL)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise RuntimeError(f"reference solver finished with status {prob.status}")
    if prob.status == "optimal_inaccurate":
        log.info("reference solve stopped short of its 1e-12 tolerances")


def reference_onestage(phi, q, r, gamma, eps=0.0, constraint_norm="l2"):
    """(x_hat, objective) of the one-stage program for m, N <= 64."""
    cp = _cvxpy()
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    q = np.asarray(q, dtype=float)
    m, N = phi.shape
    if max(m, N) > _SIZE_CAP:
        raise ValueError(f"reference solver is for tiny problems (m, N <= {_SIZE_CAP})")
    Dinv = DiffOperator(m, r).dense(power=-r)
    z = cp.Variable(N)
    resid = phi @ z - q
    cons = []
    if eps > 0:
        nu = cp.Variable(m)
        resid = resid + nu
        cons.append(cp.norm(nu, 2) <= eps * np.sqrt(m))
    if str(getattr(constraint_norm, "value", constraint_norm)) == "l2":
        cons.append(cp.norm(Dinv @ resid, 2) <= gamma * np.sqrt(m))
    else:
        cons.append(cp.norm(Dinv @ resid, "inf") <= gamma)
    prob = cp.Problem(cp.Minimize(cp.norm(z, 1)), cons)
    _solve(prob)
    return np.asarray(z.value), float(prob.value)


def reference_bpdn(phi, y, eps2):
    cp = _cvxpy()
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    z = cp.Variable(phi.shape[1])
    cons = [phi @ z == y] if eps2 == 0 else [cp.norm(phi @ z - y, 2) <= eps2]
    prob = cp.Problem(cp.Minimize(cp.norm(z, 1)), cons)
    _solve(prob)
    return np.asarray(z.value), float(prob.value)
