"""First three interference moments at the origin for the hardcore deployment.

The pair correlation is kept exact for separations below ``m c`` and replaced
by ``lam**2`` beyond; the resulting double integrals are evaluated by iterated
adaptive quadrature.  ``c == 0`` is the PPP and uses closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pcf import _branch_sum
from .scenario import ParameterError, ScenarioParams
from .specfun import (
    DEFAULT_QUAD,
    QuadratureSpec,
    integrate_finite,
    integrate_semi_infinite,
    upper_incomplete_gamma_scaled,
)

ANALYTIC = "Analytic"
MONTE_CARLO = "MonteCarlo"


def quadrature_method(m: int) -> str:
    return f"Quadrature(m={m})"


class MomentError(ArithmeticError):
    pass


@dataclass(frozen=True)
class MomentSet:
    """Raw moments of the interference plus the statistics derived from them."""

    mean: float
    m2: float
    m3: float | None
    variance: float
    std_dev: float
    coeff_variation: float
    skewness: float | None
    method: str
    flags: tuple[str, ...] = field(default=())

    @classmethod
    def from_raw(cls, mean: float, m2: float, m3: float | None = None, *,
                 method: str, flags=()) -> MomentSet:
        variance = m2 - mean * mean
        if not variance > 0:
            raise MomentError(
                f"non-positive variance {variance!r} from raw moments; "
                "tighten the quadrature tolerance (--quad-rel-tol)"
            )
        std = math.sqrt(variance)
        cov = std / mean if mean > 0 else math.nan
        skew = None
        if m3 is not None:
            skew = (m3 - 3.0 * mean * m2 + 2.0 * mean ** 3) / variance ** 1.5
        return cls(mean, m2, m3, variance, std, cov, skew, method, tuple(flags))


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def mean_interference(p: ScenarioParams) -> float:
    """Campbell mean ``2 lam r0**(1-eta) / (eta-1)``; independent of ``c``."""
    return 2.0 * p.lam * p.r0 ** (1.0 - p.eta) / (p.eta - 1.0)


def ppp_cumulants(p: ScenarioParams, n: int) -> float:
    """n-th cumulant of the interference from a PPP of intensity ``p.lam`` (Rayleigh)."""
    if n not in (1, 2, 3):
        raise ValueError(f"cumulant order must be 1, 2 or 3 (n={n})")
    if not n * p.eta > 1:
        raise ValueError("n*eta must exceed 1")
    return 2.0 * p.lam * math.factorial(n) * p.r0 ** (1.0 - n * p.eta) / (n * p.eta - 1.0)


def _ppp_raw(p: ScenarioParams, n: int) -> float:
    k1 = ppp_cumulants(p, 1)
    if n == 1:
        return k1
    k2 = ppp_cumulants(p, 2)
    if n == 2:
        return k2 + k1 * k1
    return ppp_cumulants(p, 3) + 3.0 * k2 * k1 + k1 ** 3


# ---------------------------------------------------------------------------
# integrand helpers
# ---------------------------------------------------------------------------

def _g(y: float, r0: float, eta: float) -> float:
    a = abs(y)
    return a ** -eta if a > r0 else 0.0


def _left_mass(t: float, r0: float, eta: float) -> float:
    """Integral of the pathloss over ``(-inf, t]``."""
    if t <= -r0:
        return (-t) ** (1.0 - eta) / (eta - 1.0)
    base = r0 ** (1.0 - eta) / (eta - 1.0)
    if t <= r0:
        return base
    return base + (r0 ** (1.0 - eta) - t ** (1.0 - eta)) / (eta - 1.0)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_SMALL_MU_C = 1e-3


def shifted_exp_inner(y: float, p: ScenarioParams) -> float:
    """``int_{y+c}^{y+2c} w**-eta exp(-mu (w-y-c)) dw`` for ``y > 0`` via incomplete gamma.

    For ``mu c`` small the gamma difference cancels; the integrand is then smooth
    on a short range and a fixed Gauss-Legendre rule is used instead.
    """
    if p.mu * p.c < _SMALL_MU_C:
        t = 0.5 * p.c * (_GL_NODES + 1.0)
        f = (y + p.c + t) ** -p.eta * np.exp(-p.mu * t)
        return 0.5 * p.c * math.fsum(_GL_WEIGHTS * f)
    a = 1.0 - p.eta
    u1 = p.mu * (y + p.c)
    u2 = p.mu * (y + 2.0 * p.c)
    diff = (upper_incomplete_gamma_scaled(a, u1)
            - math.exp(-p.mu * p.c) * upper_incomplete_gamma_scaled(a, u2))
    return p.mu ** (p.eta - 1.0) * diff


def _integrate_from_r0(f, r0: float, breaks, decay: float, spec: QuadratureSpec) -> float:
    """``int_{r0}^inf f``: finite pieces up to the last breakpoint, power-law tail beyond."""
    breaks = sorted(b for b in breaks if b > r0)
    total = 0.0
    start = r0
    if breaks:
        start = breaks[-1]
        total += integrate_finite(f, r0, start, spec, points=breaks[:-1]).require()
    total += integrate_semi_infinite(f, start, decay, spec).require()
    return total


def pair_integral(p: ScenarioParams, m: int, outer_power: float,
                  q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """``int int g(x)**(outer_power/eta) g(y) rho2_m(x, y) dx dy`` over both sides.

    ``outer_power = eta`` gives the pair term of the second moment and
    ``2 eta`` the mixed pair term of the third.  Branches ``k < m`` are exact,
    the rest use ``lam**2``.
    """
    if m < 2:
        raise ValueError(f"truncation order must be >= 2 (m={m})")
    lam, c, r0, eta = p.lam, p.c, p.r0, p.eta
    inner_q = q.tighter()
    mc = m * c

    def near(x: float) -> float:
        tot = 0.0
        for k in range(1, m):
            lo, hi = x + k * c, x + (k + 1) * c
            tot += integrate_finite(
                lambda y, k=k: y ** -eta * _branch_sum(k, y - x, p), lo, hi, inner_q
            ).require()
            lo, hi = x - (k + 1) * c, x - k * c
            if lo >= -r0 and hi <= r0:
                continue
            tot += integrate_finite(
                lambda y, k=k: _g(y, r0, eta) * _branch_sum(k, x - y, p), lo, hi, inner_q,
                points=(-r0, r0),
            ).require()
        return x ** -outer_power * tot

    near_total = 0.0
    if c > 0:
        breaks = [r0 + k * c for k in range(1, m + 1)] + [k * c - r0 for k in range(1, m + 1)]
        near_total = _integrate_from_r0(near, r0, breaks, outer_power + eta, q)

    def tail_plus(x: float) -> float:
        return x ** -outer_power * (x + mc) ** (1.0 - eta) / (eta - 1.0)

    def tail_minus(x: float) -> float:
        return x ** -outer_power * _left_mass(x - mc, r0, eta)

    t_plus = integrate_semi_infinite(tail_plus, r0, outer_power + eta - 1.0, q).require()
    t_minus = _integrate_from_r0(tail_minus, r0, [mc + r0, mc - r0], outer_power, q)
    return 2.0 * near_total + 2.0 * lam * lam * (t_plus + t_minus)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def second_moment(p: ScenarioParams, m: int = 2, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """``E{I**2}`` with the pair correlation exact up to ``m c``."""
    if m < 2:
        raise ValueError(f"truncation order must be >= 2 (m={m})")
    if p.lam == 0:
        return 0.0
    if p.c == 0:
        return _ppp_raw(p, 2)
    single = 4.0 * p.lam * p.r0 ** (1.0 - 2.0 * p.eta) / (2.0 * p.eta - 1.0)
    return single + pair_integral(p, m, p.eta, q)


def third_moment(p: ScenarioParams, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """``E{I**3}`` with the pair correlation exact up to ``2c``.

    Single-vehicle, pair and triple contributions; triples straddling the cell
    treat the lone vehicle as uncorrelated with the pair.
    """
    if p.lam == 0:
        return 0.0
    if p.c == 0:
        return _ppp_raw(p, 3)
    lam, mu, c, r0, eta = p.lam, p.mu, p.c, p.r0, p.eta
    inner_q = q.tighter()
    single = 12.0 * lam * r0 ** (1.0 - 3.0 * eta) / (3.0 * eta - 1.0)
    s_pair = pair_integral(p, 2, 2.0 * eta, q)
    half_mass = r0 ** (1.0 - eta) / (eta - 1.0)

    def w_mass(y: float) -> float:
        # weight of the third vehicle ahead of y: exact branch 1 plus lam**2 beyond 2c
        return mu * shifted_exp_inner(y, p) + lam * (y + 2.0 * c) ** (1.0 - eta) / (eta - 1.0)

    def t1(y: float) -> float:
        x_mass = (r0 ** (1.0 - eta) - (y - 2.0 * c) ** (1.0 - eta)) / (eta - 1.0)
        return w_mass(y) * y ** -eta * x_mass

    def t2(x: float) -> float:
        inner = integrate_finite(
            lambda y: w_mass(y) * y ** -eta * math.exp(-mu * (y - x - c)),
            x + c, x + 2.0 * c, inner_q,
        ).require()
        return x ** -eta * inner

    T1 = integrate_semi_infinite(t1, r0 + 2.0 * c, 2.0 * eta - 1.0, q).require()
    T2 = integrate_semi_infinite(t2, r0, 3.0 * eta - 1.0, q).require()
    s1 = 12.0 * lam * lam * T1 + 12.0 * lam * mu * T2

    far = integrate_semi_infinite(
        lambda y: y ** -eta * (y + 2.0 * c) ** (1.0 - eta) / (eta - 1.0), r0, 2.0 * eta - 1.0, q
    ).require()
    close = integrate_semi_infinite(
        lambda y: y ** -eta * shifted_exp_inner(y, p), r0, 2.0 * eta, q
    ).require()
    s2 = 12.0 * lam * lam * half_mass * (lam * far + mu * close)
    return single + 6.0 * s_pair + s1 + s2


def moment_set(p: ScenarioParams, m: int = 2, with_third: bool = False,
               q: QuadratureSpec = DEFAULT_QUAD) -> MomentSet:
    """Mean, variance, std, coefficient of variation and (optionally) skewness."""
    if p.lam == 0:
        raise ParameterError("empty process: derived statistics undefined")
    flags = []
    mean = mean_interference(p)
    if p.c == 0:
        return MomentSet.from_raw(mean, _ppp_raw(p, 2), _ppp_raw(p, 3) if with_third else None,
                                  method=ANALYTIC)
    m2 = second_moment(p, m, q)
    m3 = None
    if with_third:
        m3 = third_moment(p, q)
        if p.lc > 0.6:
            flags.append("third-moment-degraded:lc>0.6")
    if p.lc > 0.6 and m == 2:
        flags.append("pcf-truncation-degraded:lc>0.6")
    return MomentSet.from_raw(mean, m2, m3, method=quadrature_method(m), flags=flags)
