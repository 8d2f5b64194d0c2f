"""Convex decoders for Sigma-Delta quantized measurements.

``decode_onestage`` recovers x from q by solving::

    minimize ||z||_1  subject to  ||D**-r (Phi z + nu - q)|| <= radius,  ||nu||_2 <= eps sqrt(m)

with radius ``gamma sqrt(m)`` in the l2 norm (``ConstraintNorm.L2BALL``) or
``gamma`` in the l_inf norm (``ConstraintNorm.LINFBOX``).  ``decode_bpdn`` and
``decode_twostage`` are the classical baselines.

All programs go through :func:`sdcs.solver.ipm`; the state constraint is posed
on ``u`` with ``Phi z + nu - q = D**r u`` so the problem data stays O(2**r).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .linops import DiffOperator
from .solver import InfeasibleDetected, L1Program, NotConverged, OperatorCache, SolverError, ipm

log = logging.getLogger(__name__)

__all__ = [
    "ConstraintNorm", "DecodeProblem", "SolverConfig", "DecodeResult", "DecodeContext",
    "NotConverged", "InfeasibleDetected", "SolverError",
    "decode_onestage", "decode_bpdn", "decode_twostage", "sobolev_dual",
    "project_l2_ball", "project_linf_box", "constraint_residuals",
]


class ConstraintNorm(str, enum.Enum):
    L2BALL = "l2"
    LINFBOX = "linf"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        v = str(value).lower()
        aliases = {"l2ball": "l2", "linfbox": "linf", "inf": "linf"}
        try:
            return cls(aliases.get(v, v))
        except ValueError:
            raise ValueError(f"unknown constraint norm {value!r}; expected l2 or linf") from None


@dataclass
class DecodeProblem:
    phi: np.ndarray
    q: np.ndarray
    r: int
    gamma: float
    eps: float = 0.0
    constraint_norm: ConstraintNorm = ConstraintNorm.L2BALL

    def __post_init__(self):
        self.phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        self.q = np.asarray(self.q, dtype=float).ravel()
        self.constraint_norm = ConstraintNorm.parse(self.constraint_norm)
        m = self.phi.shape[0]
        if self.q.shape[0] != m:
            raise ValueError(f"q has length {self.q.shape[0]} but Phi has {m} rows")
        if self.r < 1:
            raise ValueError(f"order must be >= 1, got {self.r}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.eps < 0:
            raise ValueError(f"eps must be non-negative, got {self.eps}")

    @property
    def m(self):
        return self.phi.shape[0]

    @property
    def N(self):
        return self.phi.shape[1]

    @property
    def radius(self):
        """Right-hand side of the state constraint."""
        if self.constraint_norm is ConstraintNorm.L2BALL:
            return self.gamma * np.sqrt(self.m)
        return self.gamma


@dataclass(frozen=True)
class SolverConfig:
    """Interior-point settings.

    ``tol_feas`` is relative to the constraint radius, ``tol_gap`` to
    ``max(1, ||x_hat||_1)``.  ``step_params = (step_fraction, refinement_steps)``.
    ``strict`` turns a non-converged solve into a raised :class:`NotConverged`.
    """

    max_iters: int = 200
    tol_feas: float = 1e-6
    tol_gap: float = 1e-8
    step_params: tuple = (0.99, 3)
    tol_dual: float = 1e-9
    strategy: str = "auto"
    strict: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        for name in ("tol_feas", "tol_gap", "tol_dual"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        frac = self.step_params[0]
        if not 0 < frac < 1:
            raise ValueError(f"step fraction must lie in (0, 1), got {frac}")
        if self.strategy not in ("auto", "dual", "primal"):
            raise ValueError(f"unknown KKT strategy {self.strategy!r}")

    def _ipm_kwargs(self):
        frac = self.step_params[0]
        refine = int(self.step_params[1]) if len(self.step_params) > 1 else 1
        return dict(max_iters=self.max_iters, tol_feas=self.tol_feas, tol_gap=self.tol_gap,
                    tol_dual=self.tol_dual, step=frac, refine=refine, strategy=self.strategy)


@dataclass
class DecodeResult:
    x_hat: np.ndarray
    nu_hat: np.ndarray
    objective: float
    feas_q: float
    feas_nu: float
    iters: int
    converged: bool
    gap: float = np.nan
    status: str = ""

    def record(self, x=None, **meta):
        """JSON-lines record; ``meta`` supplies k, r, rule, delta, eps."""
        rec = {
            "m": int(self.nu_hat.shape[0]), "N": int(self.x_hat.shape[0]),
            "k": meta.get("k"), "r": meta.get("r"), "rule": meta.get("rule"),
            "delta": meta.get("delta"), "eps": meta.get("eps"),
            "objective": float(self.objective), "feas_q": float(self.feas_q),
            "feas_nu": float(self.feas_nu), "iters": int(self.iters),
            "converged": bool(self.converged),
            "err_l2": None if x is None else float(np.linalg.norm(self.x_hat - x)),
        }
        return rec


class DecodeContext:
    """Caches operator products for one (Phi, r) pair; share it across decodes."""

    def __init__(self, phi, r):
        self.cache = OperatorCache(phi, r)
        self.phi = self.cache.phi
        self.r = r

    def rows(self, m):
        """Context for the first m rows (fresh cache, same data)."""
        return DecodeContext(self.phi[:m], self.r)


def constraint_residuals(p: DecodeProblem, x, nu=None):
    """(feas_q, feas_nu) of a candidate pair; feas_q is relative to the radius."""
    op = DiffOperator(p.m, p.r)
    res = p.phi.astype(np.longdouble) @ np.asarray(x, dtype=np.longdouble) - p.q
    if nu is not None:
        res = res + np.asarray(nu, dtype=np.longdouble)
    w = res
    for _ in range(op.r):
        w = np.cumsum(w)
    if p.constraint_norm is ConstraintNorm.L2BALL:
        nrm = float(np.sqrt(np.sum(w * w)))
    else:
        nrm = float(np.max(np.abs(w)))
    feas_q = max(0.0, nrm - p.radius) / p.radius
    feas_nu = 0.0
    if nu is not None:
        feas_nu = max(0.0, float(np.linalg.norm(nu)) - p.eps * np.sqrt(p.m))
    return feas_q, feas_nu


def _finish(prog, res, what):
    if res.status == "infeasible":
        raise InfeasibleDetected(f"{what}: the feasible set is empty (certificate found)")
    x = res.x[prog.iz].copy()
    nu = res.x[prog.inu].copy() if prog.rho is not None else np.zeros(prog.m)
    return x, nu


def decode_onestage(p: DecodeProblem, cfg: SolverConfig = None, context: DecodeContext = None) -> DecodeResult:
    """Solve the one-stage program for ``p``.

    When ``p.eps == 0`` the noise variable is dropped.  Returns a flagged
    result (``converged=False``) if the tolerances were not met, or raises
    :class:`NotConverged` when ``cfg.strict``.
    """
    cfg = cfg or SolverConfig()
    if context is not None and context.phi.shape == p.phi.shape and context.r == p.r:
        cache = context.cache
    else:
        cache = OperatorCache(p.phi, p.r)
    rho = p.eps * np.sqrt(p.m) if p.eps > 0 else None
    prog = L1Program(p.phi, p.q, p.r, p.constraint_norm.value, p.radius, rho, cache=cache)
    res = ipm(prog, **cfg._ipm_kwargs())
    x, nu = _finish(prog, res, "decode_onestage")
    feas_q, feas_nu = constraint_residuals(p, x, nu if rho is not None else None)
    objective = float(np.abs(x).sum())
    converged = (res.status == "optimal" and feas_q <= cfg.tol_feas and feas_nu <= cfg.tol_feas
                 and res.gap <= cfg.tol_gap * max(1.0, objective))
    out = DecodeResult(x, nu, objective, feas_q, feas_nu, res.iters, converged, res.gap, res.status)
    if not converged:
        msg = (f"decode_onestage stopped ({res.status}) after {res.iters} iterations: "
               f"feas_q={feas_q:.2e}, feas_nu={feas_nu:.2e}, gap={res.gap:.2e}, "
               f"rounding floor={res.viol_floor:.2e}")
        if cfg.strict:
            raise NotConverged(msg, out)
        log.warning(msg)
    return out


def decode_bpdn(phi, y, eps2: float, cfg: SolverConfig = None) -> np.ndarray:
    """minimize ||z||_1 s.t. ||Phi z - y||_2 <= eps2 (equality when eps2 == 0)."""
    cfg = cfg or SolverConfig()
    if eps2 < 0:
        raise ValueError(f"eps2 must be non-negative, got {eps2}")
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if eps2 >= np.linalg.norm(y):
        return np.zeros(phi.shape[1])
    kind = "l2" if eps2 > 0 else None
    prog = L1Program(phi, y, 0, kind, eps2 if eps2 > 0 else 1.0, None)
    res = ipm(prog, **cfg._ipm_kwargs())
    x, _ = _finish(prog, res, "decode_bpdn")
    if res.status != "optimal":
        msg = f"decode_bpdn stopped ({res.status}) after {res.iters} iterations"
        if cfg.strict:
            raise NotConverged(msg, x)
        log.warning(msg)
    return x


def sobolev_dual(E, r: int) -> np.ndarray:
    """The left inverse F = (D**-r E)^+ D**-r of a full-column-rank m x k frame E."""
    E = np.atleast_2d(np.asarray(E, dtype=float))
    m, k = E.shape
    if m < k:
        raise ValueError(f"frame must have m >= k, got {m}x{k}")
    op = DiffOperator(m, r)
    B = op.solve(E)
    Q, R = np.linalg.qr(B)
    d = np.abs(np.diag(R))
    if d.min() <= max(m, k) * np.finfo(float).eps * d.max():
        raise np.linalg.LinAlgError("frame is rank deficient")
    # F = R^-1 Q^T D**-r = R^-1 (D**-T Q)^T
    return np.linalg.solve(R, op.solve_T(Q).T)


def decode_twostage(phi, q, k: int, r: int, cfg: SolverConfig = None, *, gamma: float) -> np.ndarray:
    """Support estimate from BPDN (radius sqrt(m) gamma), then the Sobolev dual on it."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    q = np.asarray(q, dtype=float).ravel()
    m, N = phi.shape
    k = min(k, N)
    coarse = decode_bpdn(phi, q, np.sqrt(m) * gamma, cfg)
    T = np.sort(np.argsort(-np.abs(coarse), kind="stable")[:k])
    x = np.zeros(N)
    x[T] = sobolev_dual(phi[:, T], r) @ q
    return x


def project_l2_ball(v, c, rho: float) -> np.ndarray:
    if rho < 0:
        raise ValueError("rho must be non-negative")
    v, c = np.asarray(v, dtype=float), np.asarray(c, dtype=float)
    d = v - c
    n = np.linalg.norm(d)
    return v.copy() if n <= rho else c + d * (rho / n)


def project_linf_box(v, c, rho: float) -> np.ndarray:
    if rho < 0:
        raise ValueError("rho must be non-negative")
    v, c = np.asarray(v, dtype=float), np.asarray(c, dtype=float)
    return np.clip(v, c - rho, c + rho)
