"""Cauchy distribution C(a, gamma): density, CDF, quantile and sampling.

Sampling uses the inversion method on uniforms drawn from an injected
generator. The package-wide convention is ``numpy.random.Generator`` with
the PCG64 bit generator (see :func:`make_rng`); any object exposing a
``random(size)`` method returning floats in ``[0, 1)`` is accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CauchyParams:
    """Location ``a`` and scale ``gamma`` (half-width at half-maximum)."""

    a: float
    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.gamma)):
            raise ValueError(f"parameters must be finite, got {self!r}")
        if self.gamma <= 0:
            raise ValueError(f"scale must be positive, got gamma={self.gamma!r}")


def make_rng(seed=None) -> np.random.Generator:
    """Return a PCG64-backed generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.PCG64(seed))


def pdf(params: CauchyParams, x):
    z = (np.asarray(x, dtype=float) - params.a) / params.gamma
    return 1.0 / (math.pi * params.gamma * (1.0 + z * z))


def cdf(params: CauchyParams, x):
    z = (np.asarray(x, dtype=float) - params.a) / params.gamma
    return np.arctan(z) / math.pi + 0.5


def quantile(params: CauchyParams, u):
    """Inverse CDF, ``a + gamma * tan(pi * (u - 1/2))`` for u in (0, 1)."""
    u = np.asarray(u, dtype=float)
    return params.a + params.gamma * np.tan(math.pi * (u - 0.5))


def uniforms(rng, count: int) -> np.ndarray:
    """Draw ``count`` uniforms strictly inside (0, 1).

    Exact zeros (and ones, for generators that can emit them) are redrawn
    so the quantile transform never hits the tangent's poles.
    """
    u = np.asarray(rng.random(count), dtype=float).reshape(-1)
    bad = (u <= 0.0) | (u >= 1.0)
    while bad.any():
        u[bad] = np.asarray(rng.random(int(bad.sum())), dtype=float).reshape(-1)
        bad = (u <= 0.0) | (u >= 1.0)
    return u


def sample(params: CauchyParams, rng, count: int) -> np.ndarray:
    """Draw ``count`` i.i.d. values from C(a, gamma) by inversion."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return quantile(params, uniforms(rng, count))
