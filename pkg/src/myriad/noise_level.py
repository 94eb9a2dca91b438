"""Global Cauchy noise level from blocks that look constant.

A block is called constant when none of four Kendall rank-correlation tests
between neighbouring pixels (horizontal, vertical and both diagonals)
rejects independence. Rank statistics need no moments, which matters for
Cauchy noise. Blocks are tried at sizes 16, 8 and 4 until enough of them
pass. The fast joint estimator runs on every accepted block and the scale
estimates are averaged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .errors import LengthMismatch, NoConstantRegions
from .estimators import SolverConfig, joint_rows

# (row, column) steps to the neighbour each test pairs a pixel with
NEIGHBOUR_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))


@dataclass(frozen=True)
class RegionTestConfig:
    initial_block: int = 16
    min_block: int = 4
    alpha: float = 0.05
    min_regions: int = 5

    def __post_init__(self):
        if not self.initial_block >= self.min_block >= 2:
            raise ValueError("need initial_block >= min_block >= 2")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.min_regions < 1:
            raise ValueError("min_regions must be >= 1")

    @property
    def critical_value(self) -> float:
        """Two-sided standard normal quantile for ``alpha``."""
        return NormalDist().inv_cdf(1.0 - 0.5 * self.alpha)

    def block_sizes(self) -> list[int]:
        sizes, b = [], self.initial_block
        while b >= self.min_block:
            sizes.append(b)
            b //= 2
        return sizes


@dataclass(frozen=True)
class ConstantRegionReport:
    accepted_blocks: tuple
    """``((row, col), side)`` of every block that was used."""
    per_block_gamma: tuple
    global_gamma: float


def _tau_rows(x, y) -> np.ndarray:
    """Kendall tau-a for each row pair of ``x`` and ``y`` (shape (B, n))."""
    n = x.shape[1]
    i, j = np.triu_indices(n, 1)
    out = np.empty(x.shape[0])
    step = max(1, 4_000_000 // max(1, i.size))
    for r0 in range(0, x.shape[0], step):
        xs, ys = x[r0:r0 + step], y[r0:r0 + step]
        s = np.sign(xs[:, i] - xs[:, j]) * np.sign(ys[:, i] - ys[:, j])
        out[r0:r0 + step] = s.sum(axis=1)
    return out / (n * (n - 1) / 2)


def _z_factor(n: int) -> float:
    return 3.0 * math.sqrt(n * (n - 1)) / math.sqrt(2.0 * (2 * n + 5))


def _check_pair(x, y):
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.size != y.size:
        raise LengthMismatch(f"sequences have lengths {x.size} and {y.size}")
    if x.size < 2:
        raise ValueError("need at least two pairs")
    return x, y


def kendall_tau(x, y) -> float:
    """Kendall's tau-a: ``(n_c - n_d) / (n(n-1)/2)``; tied pairs count in neither."""
    x, y = _check_pair(x, y)
    return float(_tau_rows(x[None, :], y[None, :])[0])


def kendall_z(x, y) -> float:
    """Standardised tau, approximately N(0, 1) for independent sequences."""
    x, y = _check_pair(x, y)
    return _z_factor(x.size) * kendall_tau(x, y)


def neighbour_pairs(blocks, offset):
    """Flattened (pixel, neighbour) sequences inside each block.

    ``blocks`` has shape (B, b, b). Only positions whose neighbour at
    ``offset`` is inside the same block are used.
    """
    dr, dc = offset
    b = blocks.shape[-1]
    r0, r1 = 0, b - dr
    c0, c1 = max(0, -dc), b - max(0, dc)
    first = blocks[:, r0:r1, c0:c1]
    second = blocks[:, r0 + dr:r1 + dr, c0 + dc:c1 + dc]
    B = blocks.shape[0]
    return first.reshape(B, -1), second.reshape(B, -1)


def block_z_scores(blocks) -> np.ndarray:
    """``|z|`` of the four neighbour tests per block, shape (B, 4)."""
    blocks = np.asarray(blocks, dtype=float)
    if blocks.ndim == 2:
        blocks = blocks[None]
    out = np.empty((blocks.shape[0], len(NEIGHBOUR_OFFSETS)))
    for k, off in enumerate(NEIGHBOUR_OFFSETS):
        x, y = neighbour_pairs(blocks, off)
        out[:, k] = np.abs(_z_factor(x.shape[1]) * _tau_rows(x, y))
    return out


def test_block_constant(block, cfg: RegionTestConfig = RegionTestConfig()) -> bool:
    """True when no neighbour test rejects at level ``cfg.alpha``."""
    block = np.asarray(block, dtype=float)
    if block.ndim != 2 or block.shape[0] != block.shape[1] or block.shape[0] < 2:
        raise ValueError("block must be square with side >= 2")
    return bool(np.all(block_z_scores(block) <= cfg.critical_value))


test_block_constant.__test__ = False  # keep pytest from collecting it


def _tile(img, b):
    h, w = img.shape
    nr, nc = h // b, w // b
    tiles = img[:nr * b, :nc * b].reshape(nr, b, nc, b).swapaxes(1, 2).reshape(-1, b, b)
    origins = [(r * b, c * b) for r in range(nr) for c in range(nc)]
    return tiles, origins


def _usable(rows) -> np.ndarray:
    """Rows where the joint estimate exists: no value holds half the mass or more."""
    srt = np.sort(rows, axis=1)
    n = rows.shape[1]
    ok = np.ones(rows.shape[0], dtype=bool)
    run = np.ones(rows.shape[0], dtype=int)
    longest = run.copy()
    for k in range(1, n):
        same = srt[:, k] == srt[:, k - 1]
        run = np.where(same, run + 1, 1)
        longest = np.maximum(longest, run)
    ok &= 2 * longest < n
    return ok


def estimate_global_gamma(
    img,
    cfg: RegionTestConfig = RegionTestConfig(),
    solver: SolverConfig = SolverConfig(),
) -> ConstantRegionReport:
    """Average scale estimate over the blocks that pass the constancy test.

    Blocks tile the image from the top-left corner without overlap; a
    partial strip at the right or bottom edge is ignored. Accepted blocks
    whose values are too degenerate for a joint estimate (for example a
    noiseless flat patch) are dropped. If the smallest size still yields
    fewer than ``cfg.min_regions`` blocks, whatever it yielded is used.
    """
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("image must be two-dimensional")
    if min(img.shape) < cfg.min_block:
        raise ValueError("image is smaller than the smallest block")
    tiles = origins = None
    keep = np.zeros(0, dtype=bool)
    for b in cfg.block_sizes():
        if min(img.shape) < b:
            continue
        tiles, origins = _tile(img, b)
        z = block_z_scores(tiles)
        keep = np.all(z <= cfg.critical_value, axis=1)
        keep &= _usable(tiles.reshape(tiles.shape[0], -1))
        if keep.sum() >= cfg.min_regions:
            break
    if not keep.any():
        raise NoConstantRegions("no block passed the constancy test")
    idx = np.flatnonzero(keep)
    rows = tiles[idx].reshape(idx.size, -1)
    res = joint_rows(rows, method="fast", cfg=solver)
    side = tiles.shape[-1]
    gam = tuple(float(g) for g in res.gamma)
    return ConstantRegionReport(
        accepted_blocks=tuple((origins[k], side) for k in idx),
        per_block_gamma=gam,
        global_gamma=float(np.mean(res.gamma)),
    )
