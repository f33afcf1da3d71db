"""Interference from a lattice deployment with spacing ``c`` and a uniform random offset.

With the nearest vehicle to the right of the cell at ``r0 + z``, ``z ~ U(0, c)``,
the per-side pathloss sums are Hurwitz zeta values.  The left side's offset
depends on ``epsilon = frac(2 r0 / c)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .scenario import ParameterError
from .specfun import DEFAULT_QUAD, QuadratureSpec, hurwitz_zeta, integrate_finite

EPS_SNAP = 1e-9


def _frac_snapped(x: float) -> float:
    f = x - math.floor(x)
    if f < EPS_SNAP or 1.0 - f < EPS_SNAP:
        return 0.0
    return f


@dataclass(frozen=True)
class LatticeParams:
    c: float
    r0: float
    eta: float
    q: float = field(init=False)
    epsilon: float = field(init=False)

    def __post_init__(self):
        if not self.c > 0:
            raise ParameterError(f"lattice spacing must be > 0 (c={self.c})")
        if not self.r0 > 0:
            raise ParameterError(f"cell radius must be > 0 (r0={self.r0})")
        if self.eta < 2:
            raise ParameterError(f"pathloss exponent must be >= 2 (eta={self.eta})")
        object.__setattr__(self, "q", self.r0 / self.c)
        object.__setattr__(self, "epsilon", _frac_snapped(2.0 * self.r0 / self.c))

    @property
    def lam(self) -> float:
        return 1.0 / self.c


def lattice_mean(p: LatticeParams) -> float:
    """Mean interference; the zeta telescoping is cross-checked when it converges."""
    simple = 2.0 * p.r0 ** (1.0 - p.eta) / (p.c * (p.eta - 1.0))
    if p.eta > 2:
        s = p.eta - 1.0
        zeta_form = 2.0 * (hurwitz_zeta(s, p.q) - hurwitz_zeta(s, 1.0 + p.q)) / (p.c ** p.eta * s)
        if not math.isclose(zeta_form, simple, rel_tol=1e-10):
            raise ArithmeticError(f"zeta mean {zeta_form!r} disagrees with closed form {simple!r}")
    return simple


def j1(p: LatticeParams) -> float:
    """Excess of the fading second moment over the squared pathloss sums."""
    return 2.0 * p.lam * p.r0 ** (1.0 - 2.0 * p.eta) / (2.0 * p.eta - 1.0)


class _SideSum:
    """``sum_k (offset + k c)**-eta`` memoized by offset within one call."""

    def __init__(self, p: LatticeParams):
        self.c, self.eta = p.c, p.eta
        self.cache: dict[float, float] = {}

    def __call__(self, offset: float) -> float:
        v = self.cache.get(offset)
        if v is None:
            v = self.c ** -self.eta * hurwitz_zeta(self.eta, offset / self.c)
            self.cache[offset] = v
        return v


def j2(p: LatticeParams, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Same-side pair and square terms: ``(2/c) int_0^c S(r0 + z)**2 dz``."""
    side = _SideSum(p)
    val = integrate_finite(lambda z: side(p.r0 + z) ** 2, 0.0, p.c, q).require()
    return 2.0 * val / p.c


def j3(p: LatticeParams, q: QuadratureSpec = DEFAULT_QUAD, epsilon: float | None = None) -> float:
    """Cross-cell products of the right and left sums, averaged over the offset."""
    eps = p.epsilon if epsilon is None else epsilon
    if not 0 <= eps < 1:
        raise ParameterError(f"epsilon must lie in [0, 1) (epsilon={eps})")
    c, r0 = p.c, p.r0
    side = _SideSum(p)
    split = (1.0 - eps) * c
    total = integrate_finite(
        lambda z: side(r0 + z) * side(r0 + c * (1.0 - eps) - z), 0.0, split, q
    ).require()
    if eps > 0:
        total += integrate_finite(
            lambda z: side(r0 + z) * side(r0 + c * (2.0 - eps) - z), split, c, q
        ).require()
    return 2.0 * total / c


def lattice_variance(p: LatticeParams, q: QuadratureSpec = DEFAULT_QUAD,
                     epsilon: float | None = None) -> float:
    m = lattice_mean(p)
    return j1(p) + j2(p, q) + j3(p, q, epsilon) - m * m


def lattice_variance_approx(p: LatticeParams, epsilon: float | None = None) -> float:
    """Half the PPP variance at intensity ``1/c`` plus an ``epsilon`` correction."""
    eps = p.epsilon if epsilon is None else epsilon
    return (2.0 * p.r0 ** (1.0 - 2.0 * p.eta) / (p.c * (2.0 * p.eta - 1.0))
            + eps * (1.0 - eps) * p.r0 ** (-2.0 * p.eta))


def j3_large_q(p: LatticeParams) -> float:
    """Sum-to-integral expansion of :func:`j3` at ``epsilon = 0``; accurate for ``q >> 1``."""
    c, r0, e1 = p.c, p.r0, p.eta - 1.0
    return r0 ** (-2.0 * p.eta) * (c * c * e1 * e1 - 6.0 * c * e1 * r0 + 6.0 * r0 * r0) / (3.0 * c * c * e1 * e1)
