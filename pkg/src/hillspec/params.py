"""Potential parameters for the operator -y'' + q y on [0, pi].

Two equivalent potentials are used: the optical form
(1+2V)e^{2ix} + (1-2V)e^{-2ix} and the shifted form 2ic cos 2x with
c = sqrt(4V^2-1).  Both have the same Hill discriminant; the shifted
form is the internal default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError


@dataclass(frozen=True)
class PotentialParams:
    """The coupling pair (V, c) plus the index thresholds n1, n2, n3.

    alpha is the complex shift with 2ic cos(2x + alpha) equal to the
    optical potential; it degenerates (log 0) at c = 0 and is None there.
    """

    V: float
    c: float
    alpha: complex | None
    n1: int
    n2: int
    n3: int

    def __post_init__(self):
        if self.c < 0:
            raise DomainError(f"coupling c must be >= 0, got {self.c}")


def _thresholds(c: float) -> tuple[int, int, int]:
    n1 = math.floor((c + 1.0) / 2.0)
    n2 = math.floor(c / 2.0)
    n3 = math.floor((2.0 * c + 1.0) / 2.0) + 1
    return n1, n2, n3


def make_params(V: float) -> PotentialParams:
    """Build parameters from the optical coupling V; requires V > 1/2."""
    if not (V > 0.5) or not math.isfinite(V):
        raise DomainError(f"V must be > 1/2, got {V}")
    c = math.sqrt(4.0 * V * V - 1.0)
    alpha = complex(-math.pi / 2.0, 0.5 * math.log((2.0 * V - 1.0) / (2.0 * V + 1.0)))
    n1, n2, n3 = _thresholds(c)
    return PotentialParams(V=V, c=c, alpha=alpha, n1=n1, n2=n2, n3=n3)


def from_coupling(c: float) -> PotentialParams:
    """Build parameters from the shifted coupling c >= 0.

    c = 0 is the free operator (V = 1/2 boundary); the optical form is
    unavailable there.
    """
    if c < 0 or not math.isfinite(c):
        raise DomainError(f"c must be >= 0 and finite, got {c}")
    V = 0.5 * math.sqrt(c * c + 1.0)
    if c == 0.0:
        alpha = None
    else:
        alpha = complex(-math.pi / 2.0, 0.5 * math.log((2.0 * V - 1.0) / (2.0 * V + 1.0)))
    n1, n2, n3 = _thresholds(c)
    return PotentialParams(V=V, c=c, alpha=alpha, n1=n1, n2=n2, n3=n3)
