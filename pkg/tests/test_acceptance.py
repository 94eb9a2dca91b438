"""Acceptance checks, one printed PASS/FAIL/SKIP line per criterion.

Run with ``pytest -v tests/test_acceptance.py`` and read the ACCEPTANCE lines.
"""

import math
import numpy as np
import pytest
from scipy import integrate

from myriad.asymptotics import IdealizedState, expected_y, expected_z, idealized_trace, m0_m1, rate_bounds
from myriad.cauchy import CauchyParams, make_rng, sample
from myriad.denoise import DenoiseConfig, add_noise, denoise
from myriad.estimators import (
    SolverConfig,
    estimate_joint_fast,
    estimate_joint_gmf,
    estimate_location_mf,
    estimate_scale,
)
from myriad.likelihood import WeightedSample, objective_L, objective_Q
from myriad.metrics import psnr
from myriad.montecarlo import run_study
from myriad.noise_level import RegionTestConfig, estimate_global_gamma, kendall_z, test_block_constant

import oracles
from conftest import IMAGES, load_image

TIGHT = SolverConfig(1e-12, 100_000)

# reference means and MSEs: gamma -> n -> (iter1, iter4, mse_a, mse_gamma)
TABLE = {
    0.1: {10: (26.5283, 11.5150, 0.0028, 0.0028), 50: (18.6562, 6.7790, 0.0004, 0.0004),
          100: (17.1849, 5.8667, 0.0002, 0.0002)},
    1.0: {10: (26.6976, 11.6328, 0.2779, 0.2953), 50: (18.6468, 6.7959, 0.0425, 0.0426),
          100: (17.1643, 5.8671, 0.0205, 0.0213)},
    5.0: {10: (26.5601, 11.5128, 7.0082, 7.3173), 50: (18.6685, 6.7773, 1.0599, 1.0508),
          100: (17.1735, 5.8558, 0.5023, 0.5068)},
    10.0: {10: (26.6397, 11.6081, 27.8461, 29.9846), 50: (18.6471, 6.8004, 4.2095, 4.2861),
           100: (17.1711, 5.8545, 2.0610, 2.0885)},
}


@pytest.fixture
def report(capsys):
    def emit(tag, ok, detail):
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
        with capsys.disabled():
            print(f"\nACCEPTANCE {tag} {status} {detail}")
    return emit


def random_instance(rng, n_lo=3, n_hi=50):
    while True:
        n = int(rng.integers(n_lo, n_hi + 1))
        x = rng.standard_cauchy(n) * rng.uniform(0.1, 10) + rng.uniform(-5, 5)
        w = rng.uniform(0.1, 1.0, n)
        s = WeightedSample.from_values(x, w / w.sum())
        if s.n >= 3 and s.w_max < 0.5:
            return s


def test_1_oracle_equivalence(report):
    rng = np.random.default_rng(1)
    worst_joint = worst_scale = 0.0
    for _ in range(500):
        s = random_instance(rng)
        a, g = oracles.grid_minimiser(s.values, s.weights)
        for fn in (estimate_joint_gmf, estimate_joint_fast):
            p = fn(s, TIGHT).params
            worst_joint = max(worst_joint, abs(p.a - a), abs(p.gamma - g))
        a_fix = rng.uniform(s.values[0], s.values[-1])
        if s.values[0] < a_fix < s.values[-1]:
            r = estimate_scale(s, a_fix, TIGHT).params.gamma
            worst_scale = max(worst_scale, abs(r - oracles.scale_root(s.values, s.weights, a_fix)))
    ok = worst_joint <= 1e-3 and worst_scale <= 1e-8
    report(1, ok, f"joint max err {worst_joint:.2e} (tol 1e-3), scale max err {worst_scale:.2e} (tol 1e-8)")
    assert ok


def test_2_closed_form(report):
    s = WeightedSample.from_values([-1, 0, 1])
    root3 = 1 / math.sqrt(3)
    errs = []
    for fn in (estimate_joint_gmf, estimate_joint_fast):
        p = fn(s, TIGHT).params
        errs += [abs(p.a), abs(p.gamma - root3)]
    scale = estimate_scale(s, 0.0, TIGHT).params.gamma
    # sublinear convergence on this fixture; see the ledger
    mf = estimate_location_mf(WeightedSample.from_values([-1, 1]), 1.0, SolverConfig(1e-6, 20_000))
    ok = max(errs) <= 1e-9 and abs(scale - root3) <= 1e-9 and mf.converged and abs(mf.params.a) < 2e-2
    report(2, ok, f"joint max err {max(errs):.1e}, scale err {abs(scale - root3):.1e}, "
                  f"mf a={mf.params.a:.4f} after {mf.iterations} iterations")
    assert ok


def test_3_descent(report):
    rng = np.random.default_rng(3)
    bad = {"L_gmf": 0, "L_fast": 0, "Q_mf": 0, "mono_scale": 0}

    def rises(seq):
        return any(b > a + 1e-12 * (1 + abs(a)) for a, b in zip(seq, seq[1:]))

    for _ in range(1000):
        s = random_instance(rng)
        for key, fn in (("L_gmf", estimate_joint_gmf), ("L_fast", estimate_joint_fast)):
            tr = fn(s, TIGHT, record_trace=True).trace
            bad[key] += rises([objective_L(s, CauchyParams(a, g)) for a, g in tr])
        gamma = float(rng.uniform(0.05, 20))
        tr = estimate_location_mf(s, gamma, TIGHT, record_trace=True).trace
        bad["Q_mf"] += rises([objective_Q(s, a, gamma) for a, _ in tr])
        a_fix = s.values[0] + rng.uniform(0.01, 0.99) * (s.values[-1] - s.values[0])
        r = estimate_scale(s, a_fix, TIGHT, record_trace=True)
        g = np.array([t[1] for t in r.trace])
        d = np.diff(g)
        toward = g[:-1] <= r.params.gamma
        ok_steps = np.where(toward, d >= -1e-12 * g[1:], d <= 1e-12 * g[1:])
        overshoot = np.where(g[0] <= r.params.gamma, g > r.params.gamma * (1 + 1e-12),
                             g < r.params.gamma * (1 - 1e-12))
        bad["mono_scale"] += bool(not ok_steps.all() or overshoot.any())
    ok = not any(bad.values())
    report(3, ok, "violating traces out of 1000: " + ", ".join(f"{k}={v}" for k, v in bad.items()))
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("gamma", [0.1, 1.0, 5.0, 10.0])
@pytest.mark.parametrize("n", [10, 50, 100])
def test_4_simulation_table(report, gamma, n):
    s = run_study(0.0, gamma, n, 10_000, seed=2026)
    it1, it4, mse_a, mse_g = TABLE[gamma][n]
    checks = [
        abs(s.mean_iter1 - it1) <= 1.0,
        abs(s.mean_iter4 - it4) <= 1.0,
        2.4 <= s.iteration_ratio <= 3.6,
        abs(s.mse_a / mse_a - 1) <= 0.25,
        abs(s.mse_gamma / mse_g - 1) <= 0.25,
        s.nonconverged == 0,
    ]
    ok = all(checks)
    report(f"4[gamma={gamma:g},n={n}]", ok,
           f"iter {s.mean_iter1:.3f}/{s.mean_iter4:.3f} vs {it1:.3f}/{it4:.3f}, "
           f"ratio {s.iteration_ratio:.2f}, mse a {s.mse_a:.4g} vs {mse_a:.4g}, "
           f"mse gamma {s.mse_gamma:.4g} vs {mse_g:.4g}")
    assert ok


def _quad(p, f):
    val, _ = integrate.quad(lambda t: f(p.a + p.gamma * math.tan(t)), -math.pi / 2, math.pi / 2,
                            epsabs=1e-13, epsrel=1e-13, limit=500)
    return val / math.pi


def test_5_asymptotics(report):
    rng = np.random.default_rng(5)
    quad_err = 0.0
    for _ in range(100):
        p = CauchyParams(float(rng.uniform(-10, 10)), float(rng.uniform(0.05, 10)))
        quad_err = max(quad_err,
                       abs(expected_y(p) - _quad(p, lambda x: 1 / (1 + x * x))),
                       abs(expected_z(p) - _quad(p, lambda x: x / (1 + x * x))))

    bound_violations = 0
    for _ in range(100):
        true = CauchyParams(float(rng.uniform(-5, 5)), float(rng.uniform(0.1, 5)))
        st = IdealizedState(float(rng.uniform(-20, 20)), float(rng.uniform(0.01, 20)), true)
        for r, cur in enumerate(idealized_trace(st, 40)):
            ab, gb = rate_bounds(st, r)
            slack = 1e-9 * (1 + ab + gb)
            if abs(cur.a_tilde - true.a) > ab + slack or abs(cur.gamma_tilde**2 - true.gamma**2) > gb + slack:
                bound_violations += 1

    worst_se = 0.0
    n = 1_000_000
    for k in range(5):
        true = CauchyParams(float(rng.uniform(-3, 3)), float(rng.uniform(0.2, 4)))
        it = CauchyParams(float(rng.uniform(-3, 3)), float(rng.uniform(0.2, 4)))
        x = sample(true, make_rng(50 + k), n)
        den = (x - it.a) ** 2 + it.gamma**2
        t0 = it.gamma**2 / den
        t1 = it.gamma * (x - it.a) / den
        m0, m1 = m0_m1(true, it)
        for t, m in ((t0, m0), (t1, m1)):
            worst_se = max(worst_se, abs(t.mean() - m) / (t.std(ddof=1) / math.sqrt(n)))
    ok = quad_err <= 1e-8 and bound_violations == 0 and worst_se <= 3
    report(5, ok, f"quadrature max err {quad_err:.1e}, rate-bound violations {bound_violations}, "
                  f"m0/m1 worst deviation {worst_se:.2f} SE")
    assert ok


def test_6_kendall(report):
    fix_up = kendall_z([1, 2, 3], [1, 2, 3])
    fix_down = kendall_z([1, 2, 3], [3, 2, 1])
    rng = np.random.default_rng(6)
    base = np.arange(128)
    z = np.array([kendall_z(base, rng.permutation(128)) for _ in range(10_000)])
    cfg = RegionTestConfig()
    crng = make_rng(66)
    blocks = 128.0 + sample(CauchyParams(0, 5), crng, 2000 * 256).reshape(2000, 16, 16)
    rate = np.mean([test_block_constant(b, cfg) for b in blocks])
    need = 1 - 4 * cfg.alpha - 0.02
    ok = (abs(fix_up - 1.5667) < 1e-4 and abs(fix_down + 1.5667) < 1e-4
          and abs(z.mean()) < 0.05 and abs(z.var() - 1) < 0.1 and rate >= need)
    report(6, ok, f"z(n=3) {fix_up:+.4f}/{fix_down:+.4f}, null mean {z.mean():+.4f} var {z.var():.4f}, "
                  f"constant-block acceptance {rate:.3f} (need {need:.2f})")
    assert ok


def test_6_critical_value_is_normal_quantile():
    assert RegionTestConfig(alpha=0.05).critical_value == pytest.approx(1.959963984540054, abs=1e-12)


def test_7_noise_level(report, cameraman):
    synth = add_noise(np.full((256, 256), 128.0), 5.0, make_rng(7))
    g_synth = estimate_global_gamma(synth).global_gamma
    g_cam = estimate_global_gamma(add_noise(cameraman, 5.0, make_rng(0))).global_gamma
    ok = abs(g_synth / 5 - 1) <= 0.1 and 4.5 <= g_cam <= 6.5
    report(7, ok, f"synthetic {g_synth:.4f} (5 +-10%), cameraman {g_cam:.4f} (in [4.5, 6.5])")
    assert ok


@pytest.fixture(scope="module")
def denoised():
    """Noisy realisation and three denoisers per image, PSNR on clamped output."""
    out = {}
    for k, name in enumerate(IMAGES):
        u = load_image(name)
        f = add_noise(u, 5.0, make_rng(k))
        score = lambda o: psnr(np.clip(o.image, 0, 255), u)  # noqa: E731
        ng = denoise(f, DenoiseConfig())
        out[name] = dict(
            gamma=ng.gamma_used,
            n_gmf=score(ng),
            n_mf=score(denoise(f, DenoiseConfig(estimator="classical", gamma=5.0))),
            l_gmf=score(denoise(f, DenoiseConfig(mode="local"))),
        )
    return out


@pytest.mark.slow
def test_8a_cameraman(report, denoised):
    r = denoised["cameraman"]
    ok = r["n_gmf"] >= 27.5
    report("8a", ok, f"cameraman N-GMF {r['n_gmf']:.2f} dB (need >= 27.5, estimated gamma {r['gamma']:.3f})")
    assert ok


@pytest.mark.slow
def test_8b_boat_gap(report, denoised):
    gaps = ", ".join(f"{k} {v['n_gmf'] - v['l_gmf']:+.2f}" for k, v in denoised.items())
    report("8b", None, f"boat image not available; N-GMF minus L-GMF on substitutes: {gaps} dB")
    pytest.skip("boat test image is not distributed with the package")


@pytest.mark.slow
def test_8c_generalized_beats_classical(report, denoised):
    wins = [k for k, v in denoised.items() if v["n_gmf"] > v["n_mf"]]
    detail = ", ".join(f"{k} {v['n_gmf']:.2f}/{v['n_mf']:.2f}" for k, v in denoised.items())
    ok = len(wins) >= 4
    report("8c", ok, f"N-GMF beats N-MF on {len(wins)}/5 images ({detail} dB)")
    assert ok


def test_9_determinism(report, cameraman):
    crop = cameraman[64:128, 64:128]
    f1 = add_noise(crop, 5.0, make_rng(9))
    f2 = add_noise(crop, 5.0, make_rng(9))
    same_noise = f1.tobytes() == f2.tobytes()
    cfg = dict(window=15, samples=20, gamma=5.0)
    d1 = denoise(f1, DenoiseConfig(threads=1, **cfg))
    d4 = denoise(f1, DenoiseConfig(threads=4, **cfg))
    same_denoise = d1.image.tobytes() == d4.image.tobytes() and d1.gamma_map.tobytes() == d4.gamma_map.tobytes()
    same_study = run_study(0.0, 1.0, 20, 300, seed=9) == run_study(0.0, 1.0, 20, 300, seed=9)
    same_gamma = estimate_global_gamma(f1).global_gamma == estimate_global_gamma(f2).global_gamma
    ok = same_noise and same_denoise and same_study and same_gamma
    report(9, ok, f"noise {same_noise}, denoise 1 vs 4 workers {same_denoise}, "
                  f"simulation {same_study}, noise level {same_gamma}")
    assert ok
