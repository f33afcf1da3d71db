"""Special functions and quadrature used by the analytic modules.

Hurwitz zeta, Gauss 2F1 on the non-positive real axis and the upper
incomplete gamma function (any real order) are implemented here directly.
Adaptive quadrature delegates to QUADPACK through :func:`scipy.integrate.quad`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

from scipy import integrate

EULER_GAMMA = 0.57721566490153286061

# B_2j / (2j)!
_BERNOULLI_OVER_FACTORIAL = [
    1.0 / 6 / 2,
    -1.0 / 30 / 24,
    1.0 / 42 / 720,
    -1.0 / 30 / 40320,
    5.0 / 66 / 3628800,
    -691.0 / 2730 / 479001600,
    7.0 / 6 / 87178291200,
    -3617.0 / 510 / 20922789888000,
    43867.0 / 798 / 6402373705728000,
    -174611.0 / 330 / 2432902008176640000,
    854513.0 / 138 / 1124000727777607680000,
    -236364091.0 / 2730 / 620448401733239439360000,
]


class QuadratureError(ArithmeticError):
    """Quadrature failed to converge or met a non-finite integrand."""


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-300
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if self.abs_tol < 0:
            raise ValueError("abs_tol must be >= 0")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")

    def tighter(self, factor: float = 10.0) -> QuadratureSpec:
        return QuadratureSpec(self.rel_tol / factor, self.abs_tol, self.max_subdivisions)


DEFAULT_QUAD = QuadratureSpec()


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    converged: bool

    def __float__(self):
        return self.value

    def require(self) -> float:
        """Return the value, raising :class:`QuadratureError` if not converged."""
        if not self.converged:
            raise QuadratureError(
                f"quadrature did not converge (value={self.value!r}, "
                f"error estimate={self.error_estimate!r})"
            )
        return self.value


# ---------------------------------------------------------------------------
# Hurwitz zeta
# ---------------------------------------------------------------------------

def hurwitz_zeta(s: float, a: float) -> float:
    """Hurwitz zeta ``sum_{k>=0} (k + a)**-s`` for real ``s > 1`` and ``a > 0``.

    Direct summation up to a shift ``N`` with ``a + N >= 20``, then the
    Euler-Maclaurin tail with Bernoulli corrections until they drop below
    double precision.
    """
    if not s > 1:
        raise ValueError(f"Hurwitz zeta diverges for s <= 1 (s={s})")
    if not a > 0:
        raise ValueError(f"Hurwitz zeta requires a > 0 (a={a})")
    n = max(0, math.ceil(20.0 - a))
    head = math.fsum((a + k) ** -s for k in range(n))
    x = a + n
    x_s = x ** -s
    tail = x * x_s / (s - 1.0) + 0.5 * x_s
    # rising factorial s (s+1) ... (s+2j-2) times x**(-s-2j+1)
    term = s * x_s / x
    inv_x2 = 1.0 / (x * x)
    for j, coef in enumerate(_BERNOULLI_OVER_FACTORIAL, start=1):
        corr = coef * term
        tail += corr
        if abs(corr) < 1e-17 * abs(tail):
            break
        term *= (s + 2 * j - 1) * (s + 2 * j) * inv_x2
    return head + tail


# ---------------------------------------------------------------------------
# Gauss hypergeometric 2F1
# ---------------------------------------------------------------------------

_ZETA_INTEGERS = [hurwitz_zeta(float(k), 1.0) for k in range(2, 40)]


def _hyp2f1_series(a: float, b: float, c: float, z: float, max_terms: int = 20000) -> float:
    total = 1.0
    term = 1.0
    comp = 0.0
    for n in range(max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z
        # Kahan summation: the transformed argument can be up to 0.8
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        if term == 0.0 or (abs(term) < 1e-17 * abs(total) and n > 2):
            return total
    raise ArithmeticError(f"2F1 series did not converge for z={z}")


def gauss_2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric ``2F1(a, b; c; z)`` for real ``z <= 0``.

    For ``z <= -0.5`` the Pfaff transformation maps the argument into
    ``[1/3, 1)`` before summing the power series.
    """
    if z > 0:
        raise ValueError(f"gauss_2f1 supports z <= 0 only (z={z})")
    if c <= 0 and float(c).is_integer():
        raise ValueError(f"c must not be a non-positive integer (c={c})")
    if z == 0.0:
        return 1.0
    if z > -0.5:
        return _hyp2f1_series(a, b, c, z)
    w = z / (z - 1.0)
    return (1.0 - z) ** -a * _hyp2f1_series(a, c - b, c, w)


# ---------------------------------------------------------------------------
# Upper incomplete gamma
# ---------------------------------------------------------------------------

_FPMIN = 1e-300


def _gamma_cf_scaled(a: float, x: float) -> float:
    """``exp(x) * Gamma(a, x)`` from the Legendre continued fraction (modified Lentz)."""
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b if b != 0 else 1.0 / _FPMIN
    h = d
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return math.exp(a * math.log(x)) * h
    raise ArithmeticError(f"incomplete gamma continued fraction failed (a={a}, x={x})")


def _gamma1p_minus_one_over_s(s: float) -> float:
    """``(Gamma(1+s) - 1) / s`` without cancellation for small ``s``."""
    if abs(s) >= 0.1:
        return (math.gamma(1.0 + s) - 1.0) / s
    # ln Gamma(1+s) = -gamma s + sum_{k>=2} (-1)**k zeta(k) s**k / k
    lg = -EULER_GAMMA * s
    sk = -s
    for k, z in enumerate(_ZETA_INTEGERS, start=2):
        sk *= -s
        term = z * sk / k
        lg += term
        if abs(term) < 1e-18 * abs(lg):
            break
    return math.expm1(lg) / s


def _gamma_small_x(s: float, x: float) -> float:
    """``Gamma(s, x)`` for ``-1 < s < 1`` and ``0 < x < 1`` by power series."""
    if s == 0.0:
        # E1(x)
        total = 0.0
        term = 1.0
        for n in range(1, 200):
            term *= -x / n
            total += term / n
            if abs(term) < 1e-18:
                break
        return -EULER_GAMMA - math.log(x) - total
    # Gamma(s, x) = (Gamma(1+s) - x**s)/s - x**s * sum_{n>=1} (-x)**n / (n! (s+n))
    lx = math.log(x)
    xs = math.exp(s * lx)
    total = 0.0
    term = 1.0
    for n in range(1, 200):
        term *= -x / n
        total += term / (s + n)
        if abs(term) < 1e-18:
            break
    head = _gamma1p_minus_one_over_s(s) - math.expm1(s * lx) / s
    return head - xs * total


def upper_incomplete_gamma_scaled(a: float, x: float) -> float:
    """``exp(x) * Gamma(a, x)``; finite for large ``x`` where Gamma(a, x) underflows."""
    if not x > 0:
        raise ValueError(f"upper incomplete gamma requires x > 0 (x={x})")
    if x >= 1.0 and x >= a - 1.0:
        return _gamma_cf_scaled(a, x)
    if a > 0 and not (x < 1.0 and a < 1.0):
        # lower gamma series; x < a + 1 here
        g_lower_scaled = 0.0
        term = 1.0 / a
        ap = a
        total = term
        for _ in range(10000):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-17:
                break
        g_lower_scaled = total * math.exp(a * math.log(x))
        return math.gamma(a) * math.exp(x) - g_lower_scaled
    # x < 1: series at the shifted order nearest zero, then downward recurrence
    n = max(0, round(-a))
    s = a + n
    ex = math.exp(-x)
    g = _gamma_small_x(s, x)
    for _ in range(n):
        # Gamma(s-1, x) = (Gamma(s, x) - x**(s-1) e**-x) / (s-1)
        g = (g - x ** (s - 1.0) * ex) / (s - 1.0)
        s -= 1.0
    return g * math.exp(x)


def upper_incomplete_gamma(a: float, x: float) -> float:
    """Upper incomplete gamma ``int_x^inf t**(a-1) e**-t dt`` for any real ``a`` and ``x > 0``."""
    if not x > 0:
        raise ValueError(f"upper incomplete gamma requires x > 0 (x={x})")
    return math.exp(-x) * upper_incomplete_gamma_scaled(a, x)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def _checked(f: Callable[[float], float]) -> Callable[[float], float]:
    def g(x):
        v = f(x)
        if not math.isfinite(v):
            raise QuadratureError(f"integrand is not finite at x={x!r} (value {v!r})")
        return v
    return g


def integrate_finite(f: Callable[[float], float], lo: float, hi: float,
                     spec: QuadratureSpec = DEFAULT_QUAD,
                     points: Sequence[float] = ()) -> QuadratureResult:
    """Adaptive Gauss-Kronrod quadrature over ``[lo, hi]``.

    ``points`` are interior breakpoints (kinks, discontinuities); the range is
    split there and each piece integrated separately.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    g = _checked(f)
    edges = [lo] + sorted(p for p in set(points) if lo < p < hi) + [hi]
    value = 0.0
    err = 0.0
    ok = True
    for a, b in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            out = integrate.quad(g, a, b, epsabs=spec.abs_tol, epsrel=spec.rel_tol,
                                 limit=spec.max_subdivisions, full_output=1)
        value += out[0]
        err += out[1]
        ok = ok and len(out) == 3
    if not ok and err <= max(spec.abs_tol, spec.rel_tol * abs(value)):
        # QUADPACK flags round-off even when the requested accuracy was met
        ok = True
    return QuadratureResult(value, err, ok)


def integrate_semi_infinite(f: Callable[[float], float], lo: float, decay: float,
                            spec: QuadratureSpec = DEFAULT_QUAD) -> QuadratureResult:
    """Integrate ``f`` over ``[lo, inf)`` for ``f`` decaying at least like ``x**-decay``.

    The substitution ``u = lo / x`` maps the range to ``(0, 1]`` so the power-law
    tail is integrated in full rather than cut off.
    """
    if not decay > 1:
        raise ValueError(f"decay exponent must be > 1 for convergence (got {decay})")
    if not lo > 0:
        raise ValueError(f"lower limit must be > 0 (got {lo})")

    def h(u):
        if u <= 0.0:
            return 0.0
        x = lo / u
        return f(x) * lo / (u * u)

    return integrate_finite(h, 0.0, 1.0, spec)
