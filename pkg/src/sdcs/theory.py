"""Error-bound shapes as functions of m, each scaled by one fitted constant.

The bounds' constants depend on unquantified RIP constants, so every curve
here is ``C * shape(m)`` with ``C`` chosen by least squares in log space
against a measured error curve.

Formula ids
-----------
``general``
    ``(m/l)**(1/2 - r) delta + sigma_k/sqrt(k) + sqrt(m/l) eps`` with
    ``l = c k log(N/k)``.
``low_noise``
    ``(m/(2 l))**(1/2 - r) delta + sigma_k/sqrt(k) + sqrt(m/l) eps``.
``intermediate_noise``
    ``delta**(1/(2r)) eps**(1 - 1/(2r)) + sigma_k/sqrt(k)``.
``high_noise``
    ``delta + sigma_k/sqrt(k) + eps`` (flat in m).
``compressible``
    Compressible signals in the weak-l_p ball,
    ``delta**a (m / log N)**(-b)`` with ``t = 1/p``, ``a = (t - 1/2)/(r + t - 1)``,
    ``b = (t - 1/2)(r - 1/2)/(r + t - 1)``.
``root_exp``
    ``exp(-c sqrt(m))``; the fitted constant is ``c`` itself.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Formula(str, enum.Enum):
    GENERAL = "general"
    LOW_NOISE = "low_noise"
    INTERMEDIATE_NOISE = "intermediate_noise"
    HIGH_NOISE = "high_noise"
    COMPRESSIBLE = "compressible"
    ROOTEXP = "root_exp"


class Regime(str, enum.Enum):
    LOW = "low"
    INTERMEDIATE = "intermediate"
    HIGH = "high"


_REQUIRED = {
    Formula.GENERAL: ("r", "delta", "k", "N"),
    Formula.LOW_NOISE: ("r", "delta", "k", "N"),
    Formula.INTERMEDIATE_NOISE: ("r", "delta", "eps"),
    Formula.HIGH_NOISE: ("delta",),
    Formula.COMPRESSIBLE: ("r", "delta", "p", "N"),
    Formula.ROOTEXP: (),
}


def _ell(params):
    k, N = params["k"], params["N"]
    return params.get("c", 1.0) * k * np.log(N / k)


def _tail(params):
    k = params.get("k", 1)
    return params.get("sigma_k", 0.0) / np.sqrt(k)


def shape(formula, params, m):
    """The bound's m-dependence with all unknown constants set to one."""
    formula = Formula(formula)
    missing = [key for key in _REQUIRED[formula] if key not in params]
    if missing:
        raise ValueError(f"{formula.value} needs parameters {missing}")
    m = np.asarray(m, dtype=float)
    eps = params.get("eps", 0.0)
    if formula is Formula.GENERAL:
        ell = _ell(params)
        r, delta = params["r"], params["delta"]
        return (m / ell) ** (0.5 - r) * delta + _tail(params) + np.sqrt(m / ell) * eps
    if formula is Formula.LOW_NOISE:
        ell = _ell(params)
        r, delta = params["r"], params["delta"]
        return (m / (2 * ell)) ** (0.5 - r) * delta + _tail(params) + np.sqrt(m / ell) * eps
    if formula is Formula.INTERMEDIATE_NOISE:
        r, delta = params["r"], params["delta"]
        val = delta ** (1 / (2 * r)) * eps ** (1 - 1 / (2 * r)) + _tail(params)
        return np.full_like(m, val)
    if formula is Formula.HIGH_NOISE:
        return np.full_like(m, params["delta"] + _tail(params) + eps)
    if formula is Formula.COMPRESSIBLE:
        r, delta, N = params["r"], params["delta"], params["N"]
        t = 1.0 / params["p"]
        a = (t - 0.5) / (r + t - 1)
        b = (t - 0.5) * (r - 0.5) / (r + t - 1)
        return delta ** a * (m / np.log(N)) ** (-b)
    # ROOTEXP: shape with c = 1; the fit rescales the exponent instead
    return np.exp(-np.sqrt(m))


def decay_exponent(formula, params):
    """Power of m the shape decays with (ignoring additive floors)."""
    formula = Formula(formula)
    if formula in (Formula.GENERAL, Formula.LOW_NOISE):
        return 0.5 - params["r"]
    if formula is Formula.COMPRESSIBLE:
        t = 1.0 / params["p"]
        return -(t - 0.5) * (params["r"] - 0.5) / (params["r"] + t - 1)
    if formula in (Formula.INTERMEDIATE_NOISE, Formula.HIGH_NOISE):
        return 0.0
    raise ValueError("root-exponential decay has no power-law exponent")


@dataclass
class TheoryCurve:
    formula: Formula
    params: dict = field(default_factory=dict)
    constant: float = 1.0

    def __call__(self, m):
        m = np.asarray(m, dtype=float)
        if self.formula is Formula.ROOTEXP:
            return np.exp(-self.constant * np.sqrt(m))
        return self.constant * shape(self.formula, self.params, m)


def fit_constant(formula, params, m, measured):
    """Least-squares constant in log space (the exponent ``c`` for RootExp)."""
    formula = Formula(formula)
    m = np.asarray(m, dtype=float)
    measured = np.asarray(measured, dtype=float)
    if m.shape != measured.shape or m.size == 0:
        raise ValueError("need matching, non-empty m and measured arrays")
    if np.any(measured <= 0):
        raise ValueError("measured errors must be positive to fit in log space")
    if formula is Formula.ROOTEXP:
        # log err = -c sqrt(m): one-parameter regression through the origin
        s = np.sqrt(m)
        return float(-(s @ np.log(measured)) / (s @ s))
    return float(np.exp(np.mean(np.log(measured) - np.log(shape(formula, params, m)))))


def theory_bound(formula, params, fitted_c=None, m=None, measured=None) -> TheoryCurve:
    """Build a curve; fit its constant when ``fitted_c`` is None and data are given."""
    formula = Formula(formula)
    if fitted_c is None:
        if m is None or measured is None:
            raise ValueError("either fitted_c or (m, measured) is required")
        fitted_c = fit_constant(formula, params, m, measured)
    return TheoryCurve(formula, dict(params), float(fitted_c))


def ell_c(m, r, delta, eps, c4=1.0, c6=1.0):
    """Critical l = m (c6 eps / (c4 (2r - 1) delta))**(1/r) balancing the two error terms."""
    return m * (c6 * eps / (c4 * (2 * r - 1) * delta)) ** (1.0 / r)


def classify_regime(m, r, delta, eps, k, N, c=1.0, c4=1.0, c6=1.0) -> Regime:
    lc = ell_c(m, r, delta, eps, c4, c6)
    if lc <= c * k * np.log(N):
        return Regime.LOW
    if lc < m:
        return Regime.INTERMEDIATE
    return Regime.HIGH


def rootexp_residual(m, err):
    """log(-log err) - log(m)/2, which stays bounded below under root-exponential decay."""
    m = np.asarray(m, dtype=float)
    err = np.asarray(err, dtype=float)
    if np.any((err <= 0) | (err >= 1)):
        raise ValueError("root-exponential residual needs 0 < err < 1")
    return np.log(-np.log(err)) - 0.5 * np.log(m)
