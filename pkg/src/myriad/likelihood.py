"""Weighted Cauchy negative log-likelihood and the S0/S1 statistics.

For a weighted sample ``x_1 < ... < x_n`` with weights summing to one the
objective is::

    L(a, gamma) = sum_i w_i log((x_i - a)^2 + gamma^2) - log(gamma)

and the two statistics that drive every fixed-point scheme are::

    S0(a, gamma) = sum_i w_i gamma^2 / ((x_i - a)^2 + gamma^2)
    S1(a, gamma) = sum_i w_i gamma (x_i - a) / ((x_i - a)^2 + gamma^2)

They relate to the gradient by ``S0 = 1/2 + (gamma/2) dL/dgamma`` and
``S1 = -(gamma/2) dL/da``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cauchy import CauchyParams
from .errors import PreconditionViolated

DEDUP_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class WeightedSample:
    """Strictly increasing sample values with positive weights summing to one.

    Build instances with :meth:`from_values`, which sorts the raw data and
    merges (near-)duplicate values by summing their weights.
    """

    values: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_values(cls, values, weights=None) -> "WeightedSample":
        x = np.asarray(values, dtype=float).reshape(-1)
        if x.size == 0:
            raise ValueError("sample is empty")
        if not np.all(np.isfinite(x)):
            raise ValueError("sample values must be finite")
        if weights is None:
            w = np.ones_like(x)
        else:
            w = np.asarray(weights, dtype=float).reshape(-1)
            if w.shape != x.shape:
                raise ValueError("values and weights differ in length")
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ValueError("weights must be finite and positive")
        order = np.argsort(x, kind="stable")
        x, w = x[order], w[order]

        # a value starts a new group unless it is within tolerance of the previous one
        gap = np.diff(x)
        tol = DEDUP_RTOL * np.maximum(1.0, np.abs(x[:-1]))
        starts = np.concatenate(([True], gap > tol))
        group = np.cumsum(starts) - 1
        merged_w = np.bincount(group, weights=w)
        merged_x = x[starts]
        merged_w = merged_w / merged_w.sum()

        merged_x.setflags(write=False)
        merged_w.setflags(write=False)
        return cls(merged_x, merged_w)

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def w_max(self) -> float:
        return float(self.weights.max())

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class ScaleBracket:
    """Interval ``(d * eps, x_n - x_1)`` that contains the scale root for fixed a."""

    w_max: float
    epsilon: float
    d: float
    lower: float
    upper: float


def scale_bracket(s: WeightedSample) -> ScaleBracket:
    if s.n < 3 or s.w_max >= 0.5:
        raise PreconditionViolated(
            "scale bracket needs n >= 3 distinct values and all weights < 1/2"
        )
    eps = math.sqrt(0.5 - s.w_max)
    d = float(np.min(np.diff(s.values)))
    return ScaleBracket(s.w_max, eps, d, d * eps, float(s.values[-1] - s.values[0]))


def _terms(s: WeightedSample, a: float, gamma: float):
    r = s.values - a
    return r, r * r + gamma * gamma


def objective_Q(s: WeightedSample, a: float, gamma: float) -> float:
    _, den = _terms(s, a, gamma)
    return float(np.sum(s.weights * np.log(den)))


def objective_L(s: WeightedSample, p: CauchyParams) -> float:
    return objective_Q(s, p.a, p.gamma) - math.log(p.gamma)


def s0(s: WeightedSample, p: CauchyParams) -> float:
    _, den = _terms(s, p.a, p.gamma)
    return float(np.sum(s.weights * (p.gamma * p.gamma / den)))


def s1(s: WeightedSample, p: CauchyParams) -> float:
    r, den = _terms(s, p.a, p.gamma)
    return float(np.sum(s.weights * (p.gamma * r / den)))


def gradient(s: WeightedSample, p: CauchyParams) -> tuple[float, float]:
    """Analytic gradient ``(dL/da, dL/dgamma)``."""
    r, den = _terms(s, p.a, p.gamma)
    d_a = 2.0 * float(np.sum(s.weights * (-r) / den))
    d_gamma = 2.0 * float(np.sum(s.weights * p.gamma / den)) - 1.0 / p.gamma
    return d_a, d_gamma
