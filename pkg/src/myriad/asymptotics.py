"""Population-level quantities behind the fast joint update.

For X ~ C(a, gamma) the expectations of ``Y = 1/(1 + X^2)`` and
``Z = X/(1 + X^2)`` have closed forms, and so do the expectations ``m0``,
``m1`` of the S0/S1 statistics at an arbitrary iterate. Replacing S0/S1 by
m0/m1 in the joint update gives a deterministic recursion that converges
linearly to the true parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .cauchy import CauchyParams


@dataclass(frozen=True)
class IdealizedState:
    a_tilde: float
    gamma_tilde: float
    true_params: CauchyParams

    def __post_init__(self):
        if not (math.isfinite(self.a_tilde) and self.gamma_tilde > 0 and math.isfinite(self.gamma_tilde)):
            raise ValueError("need finite a_tilde and gamma_tilde > 0")


def _shifted_denominator(p: CauchyParams) -> float:
    return p.a * p.a + (p.gamma + 1.0) ** 2


def expected_y(p: CauchyParams) -> float:
    """E[1/(1 + X^2)] for X ~ C(a, gamma).

    The textbook expression has denominator ``(a^2+gamma^2+1)^2 - 4 gamma^2``,
    which factors as ``(a^2+(gamma-1)^2)(a^2+(gamma+1)^2)``. Cancelling the
    first factor against the numerator leaves ``(gamma+1)/(a^2+(gamma+1)^2)``.
    This form is exact at a=0 (giving 1/(1+gamma)) and has no cancellation near
    (a, gamma) = (0, 1), so no branch is needed.
    """
    return (p.gamma + 1.0) / _shifted_denominator(p)


def expected_z(p: CauchyParams) -> float:
    """E[X/(1 + X^2)] for X ~ C(a, gamma), equal to ``a/(a^2+(gamma+1)^2)``."""
    return p.a / _shifted_denominator(p)


def m0_m1(true_p: CauchyParams, iter_p: CauchyParams) -> tuple[float, float]:
    """Expectations of S0 and S1 at ``iter_p`` when the data follow ``true_p``."""
    d = true_p.a - iter_p.a
    s = true_p.gamma + iter_p.gamma
    den = d * d + s * s
    return iter_p.gamma * s / den, iter_p.gamma * d / den


def idealized_step(state: IdealizedState) -> IdealizedState:
    """One step of the joint update with S0/S1 replaced by m0/m1."""
    a, g = state.true_params.a, state.true_params.gamma
    at, gt = state.a_tilde, state.gamma_tilde
    d = a - at
    a_next = at + gt * d / (g + gt)
    g2_next = gt * (g + d * d / (g + gt))
    return IdealizedState(a_next, math.sqrt(g2_next), state.true_params)


def idealized_trace(state: IdealizedState, steps: int) -> list[IdealizedState]:
    """``steps`` applications of :func:`idealized_step`, starting state included."""
    out = [state]
    for _ in range(steps):
        out.append(idealized_step(out[-1]))
    return out


def linear_rate(state: IdealizedState) -> float:
    """Guaranteed contraction factor ``max(1/2, gamma/(gamma + gamma_tilde_0))``."""
    g = state.true_params.gamma
    return max(0.5, g / (g + state.gamma_tilde))


def rate_bounds(state: IdealizedState, r: int) -> tuple[float, float]:
    """Error bounds after ``r`` steps from ``state``.

    Returns the bound on ``|a_tilde_r - a|`` and the bound on
    ``|gamma_tilde_r^2 - gamma^2|``.
    """
    q = linear_rate(state)
    a, g = state.true_params.a, state.true_params.gamma
    da = state.a_tilde - a
    a_bound = q**r * abs(da)
    if r == 0:
        return a_bound, abs(state.gamma_tilde**2 - g * g)
    geo = (1.0 - q**r) / (1.0 - q)
    g_bound = q**r * abs(state.gamma_tilde**2 - g * g) + q ** (r - 1) * geo * da * da
    return a_bound, g_bound
