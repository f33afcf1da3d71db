"""Pair and triple correlation functions of the shifted-exponential renewal process."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .scenario import ScenarioParams

K_MAX = 128


@dataclass(frozen=True)
class PcfValue:
    separation: float
    value: float
    branch_index: int
    truncated: bool = False

    def __float__(self):
        return self.value


def _branch_sum(k: int, d: float, p: ScenarioParams) -> float:
    # lam * sum_j mu**j (d - j c)**(j-1) exp(-mu (d - j c)) / (j-1)!, in log space
    lmu = math.log(p.mu)
    terms = []
    for j in range(1, k + 1):
        t = d - j * p.c
        if t < 0:
            break
        if j == 1:
            terms.append(math.exp(lmu - p.mu * t))
        elif t > 0:
            terms.append(math.exp(j * lmu + (j - 1) * math.log(t) - p.mu * t - math.lgamma(j)))
    return p.lam * math.fsum(terms)


def pcf_branch(k: int, d: float, p: ScenarioParams) -> float:
    """Branch ``k`` of the pair correlation at separation ``d``.

    Non-zero only on ``kc <= d < (k+1)c``; branch 0 vanishes (hardcore exclusion).
    """
    if k <= 0 or p.c <= 0:
        return 0.0
    if not (k * p.c <= d < (k + 1) * p.c):
        return 0.0
    return _branch_sum(k, d, p)


def pcf(d: float, p: ScenarioParams, k_max: int = K_MAX) -> PcfValue:
    """Pair correlation ``rho2`` at separation ``d > 0``.

    Exact branches up to ``k_max``; beyond that the decorrelated value
    ``lam**2`` is returned with ``truncated`` set.
    """
    d = abs(d)
    if p.c == 0.0:
        return PcfValue(d, p.lam ** 2, 0, False)
    k = math.floor(d / p.c)
    if k > k_max:
        return PcfValue(d, p.lam ** 2, k, True)
    return PcfValue(d, _branch_sum(k, d, p) if k >= 1 else 0.0, k, False)


def pcf_truncated(d: float, m: int, p: ScenarioParams) -> float:
    """Pair correlation with every branch ``k >= m`` replaced by ``lam**2``."""
    if m < 2:
        raise ValueError(f"truncation order must be >= 2 (m={m})")
    d = abs(d)
    if p.c == 0.0 or d >= m * p.c:
        return p.lam ** 2
    return pcf(d, p).value


def rho3(d1: float, d2: float, p: ScenarioParams) -> float:
    """Third-order intensity for ordered points with consecutive gaps ``d1``, ``d2``."""
    if p.lam == 0:
        return 0.0
    return pcf(d1, p).value * pcf(d2, p).value / p.lam
