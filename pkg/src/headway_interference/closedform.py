"""Integral-free approximations of the interference variance.

``S_{>2c}`` collects pairs further apart than ``2c`` (pair correlation
``lam**2``) and ``S_{<2c}`` pairs on the first exact branch.  Expanding the
result in ``b = c/r0`` and ``lam c`` gives the short polynomial and exponential
laws at the end of the module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .moments import mean_interference, ppp_cumulants, shifted_exp_inner
from .scenario import ParameterError, ScenarioParams
from .specfun import DEFAULT_QUAD, QuadratureSpec, gauss_2f1, integrate_semi_infinite


@dataclass(frozen=True)
class SmallnessRatios:
    b: float
    lc: float

    def __post_init__(self):
        if self.b < 0:
            raise ParameterError(f"b must be >= 0 (b={self.b})")
        if not 0 <= self.lc < 1:
            raise ParameterError(f"lam*c must lie in [0, 1) (lc={self.lc})")

    @classmethod
    def of(cls, p: ScenarioParams) -> SmallnessRatios:
        return cls(b=p.b, lc=p.lc)


def validity_flags(p: ScenarioParams) -> tuple[str, ...]:
    """Regime warnings for the expansions; informational only."""
    flags = []
    if p.lam * p.r0 < 10:
        flags.append("lam*r0<10")
    if p.lc > 0.4:
        flags.append("lam*c>0.4")
    if p.b > 0.25:
        flags.append("c/r0>0.25")
    return tuple(flags)


def _kappa2(p: ScenarioParams) -> float:
    return ppp_cumulants(p, 2)


def s_gt_2c(p: ScenarioParams) -> float:
    """Pair contribution from separations beyond ``2c``, in closed form."""
    lam, r0, eta, b = p.lam, p.r0, p.eta, p.b
    e = mean_interference(p)
    bracket = (2.0 * b + 1.0) ** (1.0 - eta) / (eta - 1.0)
    if b > 0:
        bracket += 2.0 * b * gauss_2f1(eta, 2.0 * eta - 1.0, 2.0 * eta, -2.0 * b) / (2.0 * eta - 1.0)
    return 0.5 * e * e + 2.0 * lam * lam * r0 ** (2.0 - 2.0 * eta) / (eta - 1.0) * bracket


def s_lt_2c_exact(p: ScenarioParams, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Pair contribution from separations in ``[c, 2c)``; 1D quadrature over an incomplete-gamma inner."""
    if not p.c > 0:
        raise ParameterError("s_lt_2c_exact needs c > 0")
    eta = p.eta
    val = integrate_semi_infinite(
        lambda x: x ** -eta * shifted_exp_inner(x, p), p.r0, 2.0 * eta, q
    ).require()
    return 4.0 * p.lam * p.mu * val


def s_lt_2c_expansion(p: ScenarioParams) -> float:
    """``S_{<2c}`` expanded for ``mu (x + c)`` large; needs ``lam r0 >> 1``."""
    lam, mu, c, r0, eta, b = p.lam, p.mu, p.c, p.r0, p.eta, p.b
    if c == 0:
        return 0.0
    cm = c * mu
    first = (4.0 * lam * (-math.expm1(-cm))
             * gauss_2f1(eta, 2.0 * eta - 1.0, 2.0 * eta, -b)
             / ((2.0 * eta - 1.0) * r0 ** (2.0 * eta - 1.0)))
    second = (2.0 * lam * (math.exp(-cm) * (1.0 + cm) - 1.0)
              * gauss_2f1(2.0 * eta, eta + 1.0, 2.0 * eta + 1.0, -b)
              / (mu * r0 ** (2.0 * eta)))
    return first + second


def s_lt_2c_small_lc(p: ScenarioParams) -> float:
    """``S_{<2c}`` to second order in ``lam c``."""
    lam, c, r0, eta, b = p.lam, p.c, p.r0, p.eta, p.b
    if c == 0:
        return 0.0
    a = 2.0 * r0 ** (1.0 - 2.0 * eta) * gauss_2f1(2.0 * eta - 1.0, eta, 2.0 * eta, -b) / ((2.0 * eta - 1.0) * c)
    d = 0.5 * r0 ** (-2.0 * eta) * gauss_2f1(2.0 * eta, eta + 1.0, 2.0 * eta + 1.0, -b)
    return 2.0 * lam * lam * c * c * (a - d)


def var_closed(p: ScenarioParams) -> float:
    """Variance from ``S_{>2c}`` plus the small-``lam c`` ``S_{<2c}``, before expanding in ``b``."""
    if p.c == 0:
        return _kappa2(p)
    e = mean_interference(p)
    return _kappa2(p) + s_gt_2c(p) + s_lt_2c_small_lc(p) - e * e


def var_order2(p: ScenarioParams) -> float:
    """Second order in ``b`` with the pair correlation exact up to ``2c``."""
    lc = p.lc
    return _kappa2(p) * (1.0 - lc) + lc * lc * p.r0 ** (-2.0 * p.eta)


def var_order2_m3(p: ScenarioParams) -> float:
    """As :func:`var_order2` with the pair correlation exact up to ``3c``."""
    lc = p.lc
    return _kappa2(p) * (1.0 - lc + 0.5 * lc * lc) + lc * lc * p.r0 ** (-2.0 * p.eta)


def var_exponential(p: ScenarioParams) -> float:
    """PPP variance damped by ``exp(-lam c)``."""
    return _kappa2(p) * math.exp(-p.lc)


def cov_approx(p: ScenarioParams) -> float:
    """Coefficient of variation implied by :func:`var_exponential`."""
    if not p.lam > 0:
        raise ParameterError("cov_approx needs lam > 0")
    eta = p.eta
    return (eta - 1.0) / math.sqrt(2.0 * eta - 1.0) / math.sqrt(p.lam * p.r0) * math.exp(-0.5 * p.lc)
