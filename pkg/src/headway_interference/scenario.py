"""Traffic and radio parameters, pathloss and fading models."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class ParameterError(ValueError):
    """Raised for parameter combinations outside the supported model."""


@dataclass(frozen=True)
class ScenarioParams:
    """Hardcore (shifted-exponential headway) deployment plus cell geometry.

    ``lam`` is the vehicle intensity, ``mu`` the rate of the exponential part of
    the headway and ``c`` the hardcore distance; they are tied by
    ``1/lam = c + 1/mu``.  Build instances with :func:`make_scenario`.
    """

    lam: float
    mu: float
    c: float
    r0: float
    eta: float

    def __post_init__(self):
        if self.c < 0:
            raise ParameterError(f"hardcore distance must be >= 0, got c={self.c}")
        if self.r0 <= 0:
            raise ParameterError(f"cell radius must be > 0, got r0={self.r0}")
        if self.eta < 2:
            raise ParameterError(f"pathloss exponent must be >= 2, got eta={self.eta}")
        if self.lam < 0:
            raise ParameterError(f"intensity must be >= 0, got lam={self.lam}")
        if self.lam * self.c >= 1:
            raise ParameterError(
                f"lam*c = {self.lam * self.c:g} >= 1: lattice regime or infeasible"
            )
        if self.lam > 0:
            # mu/(1 + c mu) has no cancellation as lam*c -> 1
            if not math.isclose(self.lam, self.mu / (1.0 + self.c * self.mu), rel_tol=1e-12):
                raise ParameterError(f"mu={self.mu} inconsistent with lam and c")

    @property
    def lc(self) -> float:
        return self.lam * self.c

    @property
    def b(self) -> float:
        """Hardcore distance relative to the cell radius."""
        return self.c / self.r0

    @property
    def is_ppp(self) -> bool:
        return self.c == 0.0

    @property
    def pathloss(self) -> Pathloss:
        return Pathloss(self.r0, self.eta)

    def with_c(self, c: float) -> ScenarioParams:
        """Same intensity, different hardcore distance (mu re-derived)."""
        return make_scenario(lam=self.lam, c=c, r0=self.r0, eta=self.eta)

    def as_dict(self) -> dict:
        return {"lam": self.lam, "mu": self.mu, "c": self.c, "r0": self.r0, "eta": self.eta}


def make_scenario(*, lam: float | None = None, mu: float | None = None,
                  c: float, r0: float, eta: float) -> ScenarioParams:
    """Build a :class:`ScenarioParams` from exactly one of ``lam`` or ``mu``."""
    if (lam is None) == (mu is None):
        raise ParameterError("supply exactly one of lam or mu")
    if c < 0:
        raise ParameterError(f"hardcore distance must be >= 0, got c={c}")
    if lam is not None:
        if not lam > 0:
            raise ParameterError(f"intensity must be > 0, got lam={lam}")
        if lam * c >= 1:
            raise ParameterError(f"lam*c = {lam * c:g} >= 1: lattice regime or infeasible")
        mu = lam / (1.0 - lam * c)
    else:
        if not mu > 0:
            raise ParameterError(f"rate must be > 0, got mu={mu}")
        lam = mu / (1.0 + c * mu)
    return ScenarioParams(lam=float(lam), mu=float(mu), c=float(c), r0=float(r0), eta=float(eta))


@dataclass(frozen=True)
class Pathloss:
    """``|r|**-eta`` outside the cell ``[-r0, r0]``, zero inside (boundary included)."""

    r0: float
    eta: float

    def __call__(self, r):
        return pathloss_eval(self, r)


def pathloss_eval(p: Pathloss, r):
    """Evaluate the pathloss at signed distance(s) ``r``; scalars stay scalars."""
    if np.ndim(r) == 0:
        a = abs(float(r))
        return a ** -p.eta if a > p.r0 else 0.0
    a = np.abs(np.asarray(r, dtype=float))
    out = np.zeros_like(a)
    far = a > p.r0
    out[far] = a[far] ** -p.eta
    return out


class FadingModel(enum.Enum):
    RAYLEIGH_UNIT_MEAN = "rayleigh"
    NONE = "none"

    def moment(self, n: int) -> float:
        """n-th raw moment of the power gain."""
        return float(math.factorial(n)) if self is FadingModel.RAYLEIGH_UNIT_MEAN else 1.0
