"""Likelihood-ratio similarity of pixels and patches under Cauchy noise.

Two noisy pixels ``x, y`` with a common location have likelihood ratio
``(((x - y) / (2 gamma))^2 + 1)^(-2)``; patch similarity is the product over
pixels, handled here as a sum of logs.

Patches and search windows extend past the image border by mirroring with
the edge pixel repeated (``numpy.pad(mode="symmetric")``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SideMismatch


@dataclass(frozen=True, eq=False)
class Patch:
    center: tuple
    side: int
    values: np.ndarray
    """``side * side`` values in row-major order."""

    def __post_init__(self):
        if self.side < 1 or self.side % 2 == 0:
            raise ValueError("patch side must be odd and positive")
        if np.asarray(self.values).size != self.side * self.side:
            raise ValueError("patch needs side**2 values")


@dataclass(frozen=True, eq=False)
class Neighborhood:
    center: tuple
    indices: tuple
    """Image coordinates of the selected patch centres, best first."""
    log_sims: np.ndarray


def mirror_index(i, n):
    """Map any integer index onto ``0..n-1`` by symmetric reflection."""
    i = np.asarray(i) % (2 * n)
    return np.where(i < n, i, 2 * n - 1 - i)


def extract_patch(img, center, side: int) -> Patch:
    img = np.asarray(img, dtype=float)
    r, c = center
    h = side // 2
    rows = mirror_index(np.arange(r - h, r + h + 1), img.shape[0])
    cols = mirror_index(np.arange(c - h, c + h + 1), img.shape[1])
    return Patch((r, c), side, img[np.ix_(rows, cols)].reshape(-1))


def pixel_log_similarity(x, y, gamma):
    """``log`` of the pixel likelihood ratio, ``-2 log(((x-y)/(2 gamma))^2 + 1)``."""
    t = (np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) / (2.0 * gamma)
    return -2.0 * np.log1p(t * t)


def patch_log_similarity(p: Patch, q: Patch, gamma: float) -> float:
    """Sum of pixel log-similarities, accumulated in row-major order."""
    if p.side != q.side:
        raise SideMismatch(f"patch sides differ: {p.side} vs {q.side}")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    terms = pixel_log_similarity(p.values, q.values, gamma)
    total = 0.0
    for t in terms:
        total += t
    return float(total)


def window_offsets(window: int) -> list:
    """Candidate offsets: ``(0, 0)`` first, then the rest in row-major order.

    Sorting by similarity with a stable sort over this list makes the
    reference patch win every tie.
    """
    h = window // 2
    rest = [(dr, dc) for dr in range(-h, h + 1) for dc in range(-h, h + 1) if (dr, dc) != (0, 0)]
    return [(0, 0)] + rest


def find_similar(img, center, side: int, window: int, k: int, gamma: float) -> Neighborhood:
    """The ``k`` patches in the ``window`` x ``window`` search zone most similar to the one at ``center``."""
    if side % 2 == 0 or window % 2 == 0:
        raise ValueError("patch side and window must be odd")
    if not 1 <= k <= window * window:
        raise ValueError("k must lie in 1..window**2")
    img = np.asarray(img, dtype=float)
    ref = extract_patch(img, center, side)
    offs = window_offsets(window)
    sims = np.array([
        patch_log_similarity(ref, extract_patch(img, (center[0] + dr, center[1] + dc), side), gamma)
        for dr, dc in offs
    ])
    order = np.argsort(-sims, kind="stable")[:k]
    H, W = img.shape
    idx = tuple(
        (int(mirror_index(center[0] + offs[o][0], H)), int(mirror_index(center[1] + offs[o][1], W)))
        for o in order
    )
    return Neighborhood(tuple(center), idx, sims[order])
