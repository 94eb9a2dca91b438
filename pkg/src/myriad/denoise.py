"""Local and nonlocal myriad-type denoising of images with Cauchy noise.

Every pixel is estimated independently from a weighted sample:

* local mode uses the ``(2r+1) x (2r+1)`` neighbourhood of the pixel;
* nonlocal mode uses the centre values of the ``n`` patches in a
  ``w x w`` search window that are most similar to the pixel's own patch,
  optionally weighted by ``exp(log_sim / h)``.

The generalized estimator fits location and scale jointly per pixel (and
reports the local scale map). The classical estimator fits the location
only, with the scale fixed to the global noise level.

Images are 2-D float arrays, row-major, unclamped. Borders are handled by
symmetric mirroring (edge pixel repeated).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cauchy import CauchyParams, quantile, uniforms
from .estimators import (
    SolverConfig,
    _argmin_q_rows,
    estimate_batch,
    joint_rows,
)
from .noise_level import RegionTestConfig, estimate_global_gamma
from .similarity import find_similar, mirror_index, pixel_log_similarity, window_offsets

# output rows handled per work item; fixed so results never depend on threading
CHUNK_ROWS = 8


def as_grid(img) -> np.ndarray:
    """Validate and convert to a 2-D float64 array."""
    a = np.asarray(img, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError("image must be a non-empty 2-D array")
    if not np.all(np.isfinite(a)):
        raise ValueError("image values must be finite")
    return a


@dataclass(frozen=True)
class DenoiseConfig:
    """Denoising options.

    ``patch_side=None`` picks 3 when the noise level is at most 7.5 and 5
    above. ``gamma=None`` estimates the noise level from constant blocks
    whenever it is needed (nonlocal similarity or the classical estimator).
    """

    mode: str = "nonlocal"
    estimator: str = "generalized"
    algorithm: str = "gmf"
    local_radius: int = 1
    patch_side: Optional[int] = None
    window: int = 31
    samples: int = 40
    weighted: bool = False
    kernel_h: Optional[float] = None
    gamma: Optional[float] = None
    threads: int = 1

    def __post_init__(self):
        if self.mode not in ("local", "nonlocal"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.estimator not in ("generalized", "classical"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.algorithm not in ("gmf", "fast"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.local_radius < 1:
            raise ValueError("local_radius must be >= 1")
        if self.patch_side is not None and (self.patch_side < 1 or self.patch_side % 2 == 0):
            raise ValueError("patch_side must be odd")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("window must be odd")
        if not 1 <= self.samples <= self.window**2:
            raise ValueError("samples must lie in 1..window**2")
        if self.weighted and not (self.kernel_h is not None and self.kernel_h > 0):
            raise ValueError("weighted mode needs kernel_h > 0")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def side_for(self, gamma: float) -> int:
        if self.patch_side is not None:
            return self.patch_side
        return 3 if gamma <= 7.5 else 5

    @property
    def needs_gamma(self) -> bool:
        return self.mode == "nonlocal" or self.estimator == "classical"


@dataclass(frozen=True, eq=False)
class DenoiseOutput:
    image: np.ndarray
    gamma_map: Optional[np.ndarray]
    """Per-pixel scale estimates (generalized mode); NaN where the sample was degenerate."""
    gamma_used: Optional[float]
    """Noise level used for similarity or the fixed-scale fit, if any."""
    nonconverged: int = 0
    """Pixels whose solver stopped at the iteration cap or on an invalid step."""


def add_noise(img, gamma: float, rng) -> np.ndarray:
    """``img + gamma * eta`` with ``eta`` i.i.d. C(0, 1), drawn in row-major order."""
    img = as_grid(img)
    u = uniforms(rng, img.size).reshape(img.shape)
    return img + quantile(CauchyParams(0.0, gamma), u)


# ---------------------------------------------------------------------------
# sample selection
# ---------------------------------------------------------------------------


def _local_offsets(r):
    return [(dr, dc) for dr in range(-r, r + 1) for dc in range(-r, r + 1)]


def select_samples(img, i, cfg: DenoiseConfig, gamma: Optional[float] = None):
    """Sample values and weights used for pixel ``i = (row, col)``.

    ``gamma`` overrides ``cfg.gamma`` for the similarity measure.
    """
    img = as_grid(img)
    H, W = img.shape
    r, c = i
    if cfg.mode == "local":
        offs = _local_offsets(cfg.local_radius)
        vals = np.array([img[mirror_index(r + dr, H), mirror_index(c + dc, W)] for dr, dc in offs])
        return vals, np.full(vals.size, 1.0 / vals.size)
    g = cfg.gamma if gamma is None else gamma
    if g is None:
        raise ValueError("nonlocal selection needs gamma")
    nb = find_similar(img, (r, c), cfg.side_for(g), cfg.window, cfg.samples, g)
    vals = np.array([img[p] for p in nb.indices])
    if cfg.weighted:
        w = np.exp(nb.log_sims / cfg.kernel_h)
    else:
        w = np.ones(vals.size)
    return vals, w / w.sum()


def _nonlocal_rows(F, pad, r0, r1, W, cfg, gamma):
    """Samples for output rows r0..r1-1 from the padded image ``F``.

    Same arithmetic and ordering as :func:`find_similar`, so the selection
    is bit-identical to the scalar path.
    """
    side = cfg.side_for(gamma)
    hs = side // 2
    R = r1 - r0
    offs = window_offsets(cfg.window)
    # region of padded coordinates covering every reference patch pixel
    top, left = pad + r0 - hs, pad - hs
    ref = F[top:top + R + 2 * hs, left:left + W + 2 * hs]
    sims = np.empty((R * W, len(offs)))
    for k, (dr, dc) in enumerate(offs):
        cand = F[top + dr:top + dr + R + 2 * hs, left + dc:left + dc + W + 2 * hs]
        d = pixel_log_similarity(ref, cand, gamma)
        total = np.zeros((R, W))
        for u in range(side):
            for v in range(side):
                total += d[u:u + R, v:v + W]
        sims[:, k] = total.reshape(-1)
    order = _top_k(sims, cfg.samples)
    log_sims = np.take_along_axis(sims, order, axis=1)
    off_arr = np.array(offs)
    dr, dc = off_arr[order, 0], off_arr[order, 1]
    rr, cc = np.meshgrid(np.arange(r0, r1), np.arange(W), indexing="ij")
    vals = F[pad + rr.reshape(-1, 1) + dr, pad + cc.reshape(-1, 1) + dc]
    if cfg.weighted:
        w = np.exp(log_sims / cfg.kernel_h)
        w = w / w.sum(axis=1, keepdims=True)
    else:
        w = None
    return vals, w


def _top_k(sims, k):
    """Column indices of the ``k`` largest entries of each row, best first.

    Equal values keep their column order, exactly as a stable descending
    sort would, but only the selected entries are sorted.
    """
    P, O = sims.shape
    if k == O:
        return np.argsort(-sims, axis=1, kind="stable")
    kth = np.partition(sims, O - k, axis=1)[:, O - k:O - k + 1]
    chosen = sims > kth
    ties = sims == kth
    room = k - chosen.sum(axis=1)
    crowded = ties.sum(axis=1) > room
    # rows where every tie fits need no counting
    chosen[~crowded] |= ties[~crowded]
    if crowded.any():
        first = np.cumsum(ties[crowded], axis=1) <= room[crowded, None]
        chosen[crowded] |= ties[crowded] & first
    rows, cols = np.nonzero(chosen)
    idx = cols.reshape(P, k)
    vals = np.take_along_axis(sims, idx, axis=1)
    inner = np.argsort(-vals, axis=1, kind="stable")
    return np.take_along_axis(idx, inner, axis=1)


def _local_rows(F, pad, r0, r1, W, cfg):
    offs = _local_offsets(cfg.local_radius)
    R = r1 - r0
    vals = np.empty((R * W, len(offs)))
    for k, (dr, dc) in enumerate(offs):
        vals[:, k] = F[pad + r0 + dr:pad + r1 + dr, pad + dc:pad + W + dc].reshape(-1)
    return vals, None


# ---------------------------------------------------------------------------
# per-pixel estimation
# ---------------------------------------------------------------------------


def _heaviest_value(vals, w):
    """Value carrying the most merged weight per row, and that weight."""
    P, K = vals.shape
    if w is None:
        w = np.full((P, K), 1.0 / K)
    order = np.argsort(vals, axis=1, kind="stable")
    vs = np.take_along_axis(vals, order, axis=1)
    ws = np.take_along_axis(w, order, axis=1)
    starts = np.ones((P, K), dtype=bool)
    starts[:, 1:] = vs[:, 1:] != vs[:, :-1]
    group = np.cumsum(starts, axis=1) - 1
    merged = np.zeros((P, K))
    np.add.at(merged, (np.arange(P)[:, None], group), ws)
    g = np.argmax(merged, axis=1)
    first = np.argmax(group == g[:, None], axis=1)
    return vs[np.arange(P), first], merged[np.arange(P), g]


def _estimate(vals, w, cfg, gamma, solver):
    P = vals.shape[0]
    u = np.empty(P)
    gmap = np.full(P, np.nan)
    value, mass = _heaviest_value(vals, w)
    if cfg.estimator == "generalized":
        # no interior minimiser once one value holds half the mass
        degenerate = mass >= 0.5 * (1.0 - 1e-12)
    else:
        degenerate = mass >= 1.0 - 1e-12
    u[degenerate] = value[degenerate]
    idx = np.flatnonzero(~degenerate)
    if idx.size == 0:
        return u, gmap, 0
    x = vals[idx]
    ww = None if w is None else w[idx]
    if cfg.estimator == "generalized":
        res = joint_rows(x, ww, method=cfg.algorithm, cfg=solver)
        gmap[idx] = res.gamma
    else:
        wr = np.full(x.shape, 1.0 / x.shape[1]) if ww is None else ww
        a0 = _argmin_q_rows(x, wr, gamma)
        res = estimate_batch(x, ww, method="location", a0=a0, gamma0=gamma, cfg=solver)
    u[idx] = res.a
    return u, gmap, int(np.sum(~res.converged))


def denoise(
    img,
    cfg: DenoiseConfig = DenoiseConfig(),
    solver: SolverConfig = SolverConfig(),
    region_cfg: RegionTestConfig = RegionTestConfig(),
) -> DenoiseOutput:
    """Denoise ``img`` pixel by pixel.

    Pixels whose sample is degenerate (a single value, or in generalized
    mode one value holding at least half the weight) take that value and
    get no scale estimate. Pixels where the solver stops early keep the
    last iterate; they are counted in ``nonconverged``.
    """
    img = as_grid(img)
    H, W = img.shape
    gamma = cfg.gamma
    if gamma is None and cfg.needs_gamma:
        gamma = estimate_global_gamma(img, region_cfg, solver).global_gamma

    if cfg.mode == "local":
        pad = cfg.local_radius
    else:
        pad = cfg.window // 2 + cfg.side_for(gamma) // 2
    F = np.pad(img, pad, mode="symmetric")

    def work(r0):
        r1 = min(H, r0 + CHUNK_ROWS)
        if cfg.mode == "local":
            vals, w = _local_rows(F, pad, r0, r1, W, cfg)
        else:
            vals, w = _nonlocal_rows(F, pad, r0, r1, W, cfg, gamma)
        return _estimate(vals, w, cfg, gamma, solver)

    starts = list(range(0, H, CHUNK_ROWS))
    if cfg.threads == 1:
        parts = [work(r0) for r0 in starts]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(work, starts))

    out = np.concatenate([p[0] for p in parts]).reshape(H, W)
    gmap = None
    if cfg.estimator == "generalized":
        gmap = np.concatenate([p[1] for p in parts]).reshape(H, W)
    bad = sum(p[2] for p in parts)
    return DenoiseOutput(out, gmap, None if gamma is None else float(gamma), bad)

