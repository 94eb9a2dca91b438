"""Simulation study of the two joint estimators on synthetic Cauchy samples.

Each trial draws ``n`` values from C(a, gamma) and runs both the GMF and the
fast update from the same start (median and the default scale initializer).
Trial ``k`` draws from its own generator, seeded with child ``k`` of
``numpy.random.SeedSequence(seed).spawn(N)``, so every trial is
reproducible on its own and the result does not depend on how trials are
scheduled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .cauchy import CauchyParams, sample
from .estimators import (
    SolverConfig,
    estimate_batch,
    scale_start_rows,
    weighted_median_rows,
)

# trials per batched solver call
BATCH_TRIALS = 2000


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    a_hat: float
    gamma_hat: float
    iterations_alg1: int
    iterations_alg4: int


@dataclass(frozen=True)
class StudySummary:
    a: float
    gamma: float
    n: int
    N: int
    mean_iter1: float
    sd_iter1: float
    mean_iter4: float
    sd_iter4: float
    mean_a: float
    sd_a: float
    mean_gamma: float
    sd_gamma: float
    mse_a: float
    mse_gamma: float
    nonconverged: int = 0

    @property
    def iteration_ratio(self) -> float:
        return self.mean_iter1 / self.mean_iter4


def draw_trials(a, gamma, n, N, seed) -> np.ndarray:
    """Sample matrix of shape (N, n); row k comes from the k-th spawned seed."""
    p = CauchyParams(a, gamma)
    children = np.random.SeedSequence(seed).spawn(N)
    return np.stack([sample(p, np.random.Generator(np.random.PCG64(c)), n) for c in children])


def run_trials(x, solver: SolverConfig = SolverConfig()):
    """Both estimators on every row of ``x``; returns (records, nonconverged count)."""
    records, bad = [], 0
    for t0 in range(0, x.shape[0], BATCH_TRIALS):
        rows = x[t0:t0 + BATCH_TRIALS]
        a0 = weighted_median_rows(rows)
        g0 = scale_start_rows(rows, None, a0)
        r1 = estimate_batch(rows, method="gmf", a0=a0, gamma0=g0, cfg=solver)
        r4 = estimate_batch(rows, method="fast", a0=a0, gamma0=g0, cfg=solver)
        bad += int(np.sum(~r1.converged) + np.sum(~r4.converged))
        for k in range(rows.shape[0]):
            records.append(TrialRecord(
                t0 + k, float(r1.a[k]), float(r1.gamma[k]),
                int(r1.iterations[k]), int(r4.iterations[k]),
            ))
    return records, bad


def summarize(records, a, gamma, n, nonconverged=0) -> StudySummary:
    """Means, N-1 standard deviations and MSEs, reduced in trial order."""
    N = len(records)
    if N < 2:
        raise ValueError("need at least two trials")

    def col(name):
        return np.array([getattr(r, name) for r in records], dtype=float)

    it1, it4 = col("iterations_alg1"), col("iterations_alg4")
    ah, gh = col("a_hat"), col("gamma_hat")
    return StudySummary(
        a=a, gamma=gamma, n=n, N=N,
        mean_iter1=float(it1.mean()), sd_iter1=float(it1.std(ddof=1)),
        mean_iter4=float(it4.mean()), sd_iter4=float(it4.std(ddof=1)),
        mean_a=float(ah.mean()), sd_a=float(ah.std(ddof=1)),
        mean_gamma=float(gh.mean()), sd_gamma=float(gh.std(ddof=1)),
        mse_a=float(np.mean((ah - a) ** 2)), mse_gamma=float(np.mean((gh - gamma) ** 2)),
        nonconverged=nonconverged,
    )


def run_study(a, gamma, n, N, seed, solver: SolverConfig = SolverConfig(), with_records=False):
    """Repeat the paired GMF / fast estimation ``N`` times on samples of size ``n``."""
    if n < 3:
        raise ValueError("need n >= 3")
    if N < 2:
        raise ValueError("need N >= 2 trials")
    if not (math.isfinite(a) and gamma > 0):
        raise ValueError("need finite a and gamma > 0")
    x = draw_trials(a, gamma, n, N, seed)
    records, bad = run_trials(x, solver)
    summary = summarize(records, a, gamma, n, bad)
    if with_records:
        return summary, records
    return summary


TRIAL_COLUMNS = ("trial", "a_hat", "gamma_hat", "iter_gmf", "iter_fast")


def write_trials_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        for r in records:
            w.writerow([r.trial_index, repr(r.a_hat), repr(r.gamma_hat), r.iterations_alg1, r.iterations_alg4])


def write_summary_csv(path, summary: StudySummary):
    names = [f.name for f in fields(summary)]
    row = asdict(summary)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        w.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in names])
