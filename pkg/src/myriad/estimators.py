"""Fixed-point estimators for the Cauchy location and scale.

Four schemes are provided, all driven by the S0/S1 statistics:

``gmf``       joint update ``a += gamma S1/S0``, ``gamma^2 *= (1 - S0)/S0``
``fast``      joint update ``a += gamma S1/(S0^2 + S1^2)``,
              ``gamma *= S0/(S0^2 + S1^2) - 1``
``location``  the classical myriad filter, ``gamma`` held fixed
``scale``     the scale-only update with ``a`` held fixed

Every scheme stops once the relative change of the parameter vector
``||(a_{r+1}, g_{r+1}) - (a_r, g_r)|| / ||(a_r, g_r)||`` drops below the
configured tolerance. For the single-parameter schemes the frozen
coordinate stays in the vector, which keeps the criterion well defined when
the estimate itself is zero.

The scalar entry points (:func:`estimate_joint_gmf` and friends) validate
their input and delegate to :func:`estimate_batch`, which runs many
independent problems at once, one per row. Image denoising and the Monte
Carlo study use the batched form directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cauchy import CauchyParams
from .errors import DegenerateSample, PreconditionViolated
from .likelihood import WeightedSample, objective_L, scale_bracket

METHODS = ("gmf", "fast", "location", "scale")

# pair counts above this use the counting bisection in init_scale
_DIRECT_PAIR_LIMIT = 4_000_000
# pair-array entries per chunk in the batched initialiser
_CHUNK_PAIRS = 2_000_000


@dataclass(frozen=True)
class SolverConfig:
    rel_tolerance: float = 1e-6
    max_iterations: int = 1000

    def __post_init__(self):
        if not self.rel_tolerance > 0:
            raise ValueError("rel_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class EstimateResult:
    params: CauchyParams
    iterations: int
    converged: bool
    final_objective: float
    trace: Optional[tuple] = None
    """Iterates ``(a_r, gamma_r)`` starting with the initial point, if recorded."""


@dataclass(frozen=True)
class BatchResult:
    a: np.ndarray
    gamma: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray


# ---------------------------------------------------------------------------
# medians and initial values
# ---------------------------------------------------------------------------


def weighted_median_rows(values, weights=None) -> np.ndarray:
    """Row-wise weighted median.

    The median is the smallest value whose cumulative weight reaches half
    the total; when the cumulative weight hits exactly one half the two
    neighbouring values are averaged. With ``weights=None`` (or equal
    weights) this is ``numpy.median``.
    """
    v = np.atleast_2d(np.asarray(values, dtype=float))
    if weights is None:
        return np.median(v, axis=1)
    w = np.broadcast_to(np.asarray(weights, dtype=float), v.shape)
    equal = np.all(w == w[:, :1], axis=1)
    if equal.all():
        return np.median(v, axis=1)
    if equal.any():
        out = np.empty(v.shape[0])
        out[equal] = np.median(v[equal], axis=1)
        out[~equal] = weighted_median_rows(v[~equal], w[~equal])
        return out
    order = np.argsort(v, axis=1, kind="stable")
    vs = np.take_along_axis(v, order, axis=1)
    cw = np.cumsum(np.take_along_axis(w, order, axis=1), axis=1)
    half = 0.5 * cw[:, -1:]
    tol = 1e-12 * cw[:, -1:]
    k = np.argmax(cw >= half - tol, axis=1)
    rows = np.arange(v.shape[0])
    lo = vs[rows, k]
    exact = np.abs(cw[rows, k] - half[:, 0]) <= tol[:, 0]
    hi = vs[rows, np.minimum(k + 1, v.shape[1] - 1)]
    return np.where(exact, 0.5 * (lo + hi), lo)


def _pair_median_rows(x, w=None) -> np.ndarray:
    """Median of ``|x_i - x_j| / 2`` over pairs i < j, weighted by ``w_i w_j``."""
    m = x.shape[1]
    i, j = np.triu_indices(m, 1)
    half_range = 0.5 * np.abs(x[:, i] - x[:, j])
    if w is None:
        return np.median(half_range, axis=1)
    return weighted_median_rows(half_range, w[:, i] * w[:, j])


def _log_walsh_rows(x, w, center) -> np.ndarray:
    """Hodges-Lehmann estimate of ``log|x - center|``, mapped back by exp.

    For Cauchy data ``log|X - a| - log(gamma)`` is symmetric about zero, so
    the median of the Walsh averages ``(log r_i + log r_j) / 2`` (i <= j)
    estimates ``log(gamma)``. Computed as the weighted median of
    ``sqrt(r_i r_j)``; residuals that are exactly zero carry no weight.
    Rows where nothing is left return 0.
    """
    m = x.shape[1]
    if w is None:
        w = np.full(x.shape, 1.0 / m)
    r = np.abs(x - np.asarray(center, dtype=float).reshape(-1, 1))
    wr = np.where(r > 0, w, 0.0)
    i, j = np.triu_indices(m, 0)
    geo = np.sqrt(r[:, i] * r[:, j])
    pw = wr[:, i] * wr[:, j]
    out = weighted_median_rows(geo, pw)
    return np.where(pw.sum(axis=1) > 0, out, 0.0)


def _bisect_median(weight_below, total, lo, hi) -> float:
    """Smallest t in [lo, hi] with ``weight_below(t) >= total / 2``."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if weight_below(mid) >= 0.5 * total:
            hi = mid
        else:
            lo = mid
    return hi


def _pair_median_bisect(x, w) -> float:
    """Pairwise half-range median of one large sorted sample, by counting."""
    cum = np.concatenate(([0.0], np.cumsum(w)))
    after = cum[1:]

    def weight_below(t):
        hi = np.searchsorted(x, x + 2.0 * t, side="right")
        return float(np.sum(w * (cum[hi] - after)))

    total = 0.5 * (1.0 - float(np.sum(w * w)))
    return _bisect_median(weight_below, total, 0.0, 0.5 * float(x[-1] - x[0]))


def _log_walsh_bisect(x, w, center) -> float:
    """Log-scale Walsh median of one large sample, by counting."""
    r = np.abs(x - center)
    keep = r > 0
    lr, wk = np.log(r[keep]), w[keep]
    order = np.argsort(lr, kind="stable")
    lr, wk = lr[order], wk[order]
    if lr.size == 0:
        return 0.0
    cum = np.concatenate(([0.0], np.cumsum(wk)))
    before = cum[:-1]

    def weight_below(t):
        # pairs i <= j with lr_i + lr_j <= 2 t
        hi = np.searchsorted(lr, 2.0 * t - lr, side="right")
        return float(np.sum(wk * np.maximum(cum[hi] - before, 0.0)))

    s = float(wk.sum())
    total = 0.5 * (s * s + float(np.sum(wk * wk)))
    return math.exp(_bisect_median(weight_below, total, float(lr[0]), float(lr[-1])))


def scale_start_rows(x, w=None, center=None) -> np.ndarray:
    """Default starting scale for every row of ``x`` (see :func:`init_scale`).

    Rows are processed in chunks so the pair arrays stay small.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    P, n = x.shape
    if w is not None:
        w = np.broadcast_to(np.asarray(w, dtype=float), x.shape)
    if center is None:
        center = weighted_median_rows(x, w)
    center = np.broadcast_to(np.asarray(center, dtype=float), (P,))
    g = np.empty(P)
    step = max(1, _CHUNK_PAIRS // (n * (n + 1) // 2))
    for r0 in range(0, P, step):
        sl = slice(r0, r0 + step)
        g[sl] = _log_walsh_rows(x[sl], None if w is None else w[sl], center[sl])
    bad = ~(g > 0)
    if bad.any():
        g[bad] = _pair_median_rows(x[bad], None if w is None else w[bad])
    return g


def joint_rows(x, w=None, *, method: str = "gmf", cfg: SolverConfig = SolverConfig()) -> BatchResult:
    """Joint estimate for every row from the default start (median, :func:`init_scale`).

    Rows must satisfy the joint preconditions; nothing is checked here.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    a0 = weighted_median_rows(x, w)
    g0 = scale_start_rows(x, w, a0)
    return estimate_batch(x, w, method=method, a0=a0, gamma0=g0, cfg=cfg)


def _argmin_q_rows(x, w, gamma) -> np.ndarray:
    """Sample value minimising Q over the sample itself; ties go to the smallest."""
    x = np.atleast_2d(x)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (x.shape[0],))
    if w is None:
        w = np.full(x.shape, 1.0 / x.shape[1])
    q = np.empty_like(x)
    step = max(1, 2_000_000 // max(1, x.shape[0] * x.shape[1]))
    g2 = (gamma * gamma)[:, None, None]
    for k0 in range(0, x.shape[1], step):
        cand = x[:, k0:k0 + step]
        d = x[:, None, :] - cand[:, :, None]
        q[:, k0:k0 + step] = np.sum(w[:, None, :] * np.log(d * d + g2), axis=2)
    qmin = q.min(axis=1, keepdims=True)
    tied = q <= qmin + 1e-12 * (1.0 + np.abs(qmin))
    return np.where(tied, x, np.inf).min(axis=1)


def init_location(s: WeightedSample, mode: str = "median", gamma: float | None = None) -> float:
    """Starting location: weighted median, or the sample point minimising Q.

    ``mode="argmin_q"`` needs the fixed scale ``gamma`` and is the start used
    for the classical (fixed-scale) filter.
    """
    if mode == "median":
        w = None if np.all(s.weights == s.weights[0]) else s.weights[None, :]
        return float(weighted_median_rows(s.values[None, :], w)[0])
    if mode == "argmin_q":
        if gamma is None or not gamma > 0:
            raise ValueError("argmin_q initialisation needs gamma > 0")
        return float(_argmin_q_rows(s.values[None, :], s.weights[None, :], gamma)[0])
    raise ValueError(f"unknown mode {mode!r}")


def init_scale(s: WeightedSample, method: str = "hodges_lehmann") -> float:
    """Robust starting value for the scale.

    ``method="hodges_lehmann"`` (default) is the Hodges-Lehmann estimator of
    ``log|x - median|``: the median over pairs i <= j of
    ``sqrt(|x_i - m| |x_j - m|)``, m the weighted median. It falls back to
    the pairwise rule when no residual is nonzero.

    ``method="pairwise"`` is the median over pairs i < j of
    ``|x_i - x_j| / 2``. Since ``X - X'`` is C(0, 2 gamma) for Cauchy data,
    both rules are consistent for gamma.
    """
    if s.n < 2:
        raise DegenerateSample("scale initialisation needs at least two distinct values")
    w = s.weights
    large = s.n * (s.n + 1) // 2 > _DIRECT_PAIR_LIMIT
    if method == "hodges_lehmann":
        m = init_location(s)
        if large:
            g = _log_walsh_bisect(s.values, w, m)
        else:
            g = float(_log_walsh_rows(s.values[None, :], w[None, :], m)[0])
        if g > 0:
            return g
    elif method != "pairwise":
        raise ValueError(f"unknown method {method!r}")
    if large:
        return _pair_median_bisect(s.values, w)
    equal = np.all(w == w[0])
    return float(_pair_median_rows(s.values[None, :], None if equal else w[None, :])[0])


# ---------------------------------------------------------------------------
# batched fixed-point kernel
# ---------------------------------------------------------------------------


def estimate_batch(
    x,
    w=None,
    *,
    method: str,
    a0,
    gamma0,
    cfg: SolverConfig = SolverConfig(),
    record_trace: bool = False,
):
    """Run one fixed-point scheme on every row of ``x``.

    Parameters
    ----------
    x : (P, n) array
        One sample per row. Rows need not be sorted or deduplicated; the
        update formulas are invariant to both.
    w : (P, n) array, optional
        Row weights summing to one. Uniform when omitted.
    method : {"gmf", "fast", "location", "scale"}
    a0, gamma0 : array_like
        Starting point per row (broadcast to ``P``). For ``location`` the
        scale stays at ``gamma0`` and for ``scale`` the location stays at
        ``a0``.

    Returns
    -------
    BatchResult, plus the list of iterates of row 0 if ``record_trace``.

    No precondition checking happens here. A row whose update produces a
    non-finite or non-positive scale is frozen at its last valid iterate
    and reported as not converged.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    P, n = x.shape
    if w is None:
        w = np.full((P, n), 1.0 / n)
    else:
        w = np.broadcast_to(np.asarray(w, dtype=float), (P, n))
    a = np.array(np.broadcast_to(np.asarray(a0, dtype=float), (P,)))
    g = np.array(np.broadcast_to(np.asarray(gamma0, dtype=float), (P,)))
    iters = np.zeros(P, dtype=np.int64)
    converged = np.zeros(P, dtype=bool)
    active = np.ones(P, dtype=bool)
    trace = [(float(a[0]), float(g[0]))] if record_trace else None

    for _ in range(cfg.max_iterations):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa, wa, ar, gr = x[idx], w[idx], a[idx], g[idx]
        d = xa - ar[:, None]
        g2 = gr * gr
        den = d * d + g2[:, None]
        S0 = np.sum(wa * (g2[:, None] / den), axis=1)
        if method == "scale":
            a_new = ar
            with np.errstate(divide="ignore", invalid="ignore"):
                g_new = np.sqrt(g2 * (1.0 - S0) / S0)
        else:
            S1 = np.sum(wa * (gr[:, None] * d / den), axis=1)
            if method == "gmf":
                a_new = ar + gr * S1 / S0
                with np.errstate(divide="ignore", invalid="ignore"):
                    g_new = np.sqrt(g2 * (1.0 - S0) / S0)
            elif method == "fast":
                norm = S0 * S0 + S1 * S1
                a_new = ar + gr * S1 / norm
                g_new = gr * (S0 / norm - 1.0)
            else:
                a_new = ar + gr * S1 / S0
                g_new = gr

        ok = np.isfinite(a_new) & np.isfinite(g_new) & (g_new > 0)
        change = np.hypot(a_new - ar, g_new - gr) / np.hypot(ar, gr)
        a[idx] = np.where(ok, a_new, ar)
        g[idx] = np.where(ok, g_new, gr)
        iters[idx] += ok
        done = ok & (change < cfg.rel_tolerance)
        converged[idx[done]] = True
        active[idx[done | ~ok]] = False
        if record_trace and idx[0] == 0 and ok[0]:
            trace.append((float(a[0]), float(g[0])))

    result = BatchResult(a, g, iters, converged)
    if record_trace:
        return result, trace
    return result


# ---------------------------------------------------------------------------
# scalar API
# ---------------------------------------------------------------------------


def _check_joint(s: WeightedSample):
    if s.n == 1:
        raise DegenerateSample("all sample values are equal")
    if s.n < 3:
        raise PreconditionViolated(f"joint estimation needs n >= 3 distinct values, got {s.n}")
    if s.w_max >= 0.5:
        raise PreconditionViolated(f"joint estimation needs all weights < 1/2, max is {s.w_max}")


def _check_location_init(s: WeightedSample, a0: float):
    if not s.values[0] <= a0 <= s.values[-1]:
        raise PreconditionViolated(
            f"initial location {a0} outside the sample range [{s.values[0]}, {s.values[-1]}]"
        )


def _finish(s, res, trace, gamma_fixed=None) -> EstimateResult:
    a = float(res.a[0])
    g = float(res.gamma[0]) if gamma_fixed is None else gamma_fixed
    p = CauchyParams(a, g)
    return EstimateResult(
        params=p,
        iterations=int(res.iterations[0]),
        converged=bool(res.converged[0]),
        final_objective=objective_L(s, p),
        trace=tuple(trace) if trace is not None else None,
    )


def _joint(method, s, cfg, init, record_trace):
    _check_joint(s)
    if init is None:
        init = CauchyParams(init_location(s), init_scale(s))
    _check_location_init(s, init.a)
    res, trace = estimate_batch(
        s.values[None, :], s.weights[None, :], method=method,
        a0=init.a, gamma0=init.gamma, cfg=cfg, record_trace=True,
    )
    return _finish(s, res, trace if record_trace else None)


def estimate_joint_gmf(
    s: WeightedSample,
    cfg: SolverConfig = SolverConfig(),
    init: Optional[CauchyParams] = None,
    record_trace: bool = False,
) -> EstimateResult:
    """Joint ML estimate of (a, gamma) with the generalized myriad filter.

    Starts from the weighted median and :func:`init_scale`
    unless ``init`` is given. Requires at least three distinct values and
    every weight below one half, under which the minimiser is unique.
    """
    return _joint("gmf", s, cfg, init, record_trace)


def estimate_joint_fast(
    s: WeightedSample,
    cfg: SolverConfig = SolverConfig(),
    init: Optional[CauchyParams] = None,
    record_trace: bool = False,
) -> EstimateResult:
    """Joint ML estimate with the accelerated update (same fixed point as GMF)."""
    return _joint("fast", s, cfg, init, record_trace)


def estimate_location_mf(
    s: WeightedSample,
    gamma: float,
    cfg: SolverConfig = SolverConfig(),
    init: Optional[float] = None,
    record_trace: bool = False,
) -> EstimateResult:
    """Classical myriad filter: minimise Q(a) for a fixed scale ``gamma``.

    Q may have several local minima; the result is the critical point
    reached from ``init`` (default: the sample point with the smallest Q).
    """
    if not gamma > 0:
        raise PreconditionViolated("gamma must be positive")
    if s.n < 2:
        # a single distinct value is its own myriad
        p = CauchyParams(float(s.values[0]), gamma)
        trace = ((p.a, gamma),) if record_trace else None
        return EstimateResult(p, 0, True, objective_L(s, p), trace)
    a0 = init_location(s, "argmin_q", gamma) if init is None else float(init)
    _check_location_init(s, a0)
    res, trace = estimate_batch(
        s.values[None, :], s.weights[None, :], method="location",
        a0=a0, gamma0=gamma, cfg=cfg, record_trace=True,
    )
    return _finish(s, res, trace if record_trace else None, gamma_fixed=gamma)


def estimate_scale(
    s: WeightedSample,
    a: float,
    cfg: SolverConfig = SolverConfig(),
    init: Optional[float] = None,
    record_trace: bool = False,
) -> EstimateResult:
    """Minimise L(a, .) for a fixed location ``a`` inside the sample range.

    The iterates approach the unique root of ``S0(a, gamma) = 1/2``
    monotonically. Without ``init`` the default :func:`init_scale` is used,
    clamped into the bracket that provably contains the root.
    """
    _check_joint(s)
    if not s.values[0] < a < s.values[-1]:
        raise PreconditionViolated(f"a={a} must lie strictly inside the sample range")
    if init is None:
        br = scale_bracket(s)
        g0 = min(max(init_scale(s), br.lower), br.upper)
        if g0 >= br.upper:
            g0 = math.nextafter(br.upper, 0.0)
    else:
        g0 = float(init)
        if not 0 < g0 < s.values[-1] - s.values[0]:
            raise PreconditionViolated("initial scale must lie in (0, x_n - x_1)")
    res, trace = estimate_batch(
        s.values[None, :], s.weights[None, :], method="scale",
        a0=a, gamma0=g0, cfg=cfg, record_trace=True,
    )
    return _finish(s, res, trace if record_trace else None)
