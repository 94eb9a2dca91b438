"""PSNR and SSIM for 8-bit-range grayscale images (peak value 255).

Inputs are used as given; clamp beforehand if the comparison should be
made on displayable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, TooSmall

PEAK = 255.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class QualityReport:
    psnr_db: float
    ssim: float


def _pair(test, ref):
    t = np.asarray(test, dtype=float)
    r = np.asarray(ref, dtype=float)
    if t.shape != r.shape:
        raise DimensionMismatch(f"image shapes differ: {t.shape} vs {r.shape}")
    return t, r


def psnr(test, ref) -> float:
    """``10 log10(255^2 / MSE)``; ``inf`` for identical images."""
    t, r = _pair(test, ref)
    mse = float(np.mean((t - r) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalised 1-D Gaussian taps; the 2-D window is its outer product."""
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, taps):
    """Separable correlation with ``taps``, keeping only full windows."""
    rows = sliding_window_view(img, taps.size, axis=0) @ taps
    return sliding_window_view(rows, taps.size, axis=1) @ taps


def ssim_map(test, ref) -> np.ndarray:
    """Local SSIM over every full 11x11 Gaussian window."""
    t, r = _pair(test, ref)
    if t.ndim != 2 or min(t.shape) < SSIM_WINDOW:
        raise TooSmall(f"SSIM needs a 2-D image with sides >= {SSIM_WINDOW}")
    g = gaussian_window()
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2
    mu_t = _filter_valid(t, g)
    mu_r = _filter_valid(r, g)
    var_t = _filter_valid(t * t, g) - mu_t * mu_t
    var_r = _filter_valid(r * r, g) - mu_r * mu_r
    cov = _filter_valid(t * r, g) - mu_t * mu_r
    num = (2.0 * mu_t * mu_r + c1) * (2.0 * cov + c2)
    den = (mu_t * mu_t + mu_r * mu_r + c1) * (var_t + var_r + c2)
    return num / den


def ssim(test, ref) -> float:
    """Mean SSIM (Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03, L = 255)."""
    return float(np.mean(ssim_map(test, ref)))


def quality(test, ref) -> QualityReport:
    return QualityReport(psnr(test, ref), ssim(test, ref))
