"""Command-line interface.

Every command prints human-readable lines followed by one machine-readable
line ``RESULT <json>``; its keys are listed in each command's help and
only ever grow. Infinite values are written as the string ``"inf"``.

Exit codes:

0  success
1  an estimator stopped at its iteration cap (``estimate`` only)
2  usage or configuration error
3  estimator precondition violated, or no constant regions found
4  file could not be read or written
5  image dimensions do not match
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import io
from .cauchy import make_rng
from .denoise import DenoiseConfig, add_noise, denoise
from .errors import DimensionMismatch, NoConstantRegions, PreconditionViolated, TooSmall
from .estimators import (
    SolverConfig,
    estimate_joint_fast,
    estimate_joint_gmf,
    estimate_location_mf,
    estimate_scale,
)
from .likelihood import WeightedSample
from .metrics import psnr, ssim
from .montecarlo import run_study, write_summary_csv, write_trials_csv
from .noise_level import RegionTestConfig, estimate_global_gamma

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_USAGE = 2
EXIT_PRECONDITION = 3
EXIT_IO = 4
EXIT_DIMENSION = 5


class _Fail(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _json_value(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def _result(**kw):
    print("RESULT " + json.dumps({k: _json_value(v) for k, v in kw.items()}, sort_keys=True))


def _load_image(path):
    try:
        return io.read_image(path)
    except (OSError, ValueError) as exc:
        raise _Fail(EXIT_IO, f"cannot read {path}: {exc}") from None


def _write(fn, path, *args):
    try:
        fn(path, *args)
    except (OSError, ValueError) as exc:
        raise _Fail(EXIT_IO, f"cannot write {path}: {exc}") from None


def _solver(args):
    try:
        return SolverConfig(args.tol, args.max_iter)
    except ValueError as exc:
        raise _Fail(EXIT_USAGE, str(exc)) from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_estimate(args):
    if args.algo == "mf" and args.fix_gamma is None:
        raise _Fail(EXIT_USAGE, "--algo mf requires --fix-gamma")
    if args.algo == "scale" and args.fix_a is None:
        raise _Fail(EXIT_USAGE, "--algo scale requires --fix-a")
    solver = _solver(args)
    try:
        values, weights = io.read_samples_csv(args.input)
    except (OSError, ValueError) as exc:
        raise _Fail(EXIT_IO, f"cannot read {args.input}: {exc}") from None
    try:
        s = WeightedSample.from_values(values, weights)
        if args.algo == "gmf":
            res = estimate_joint_gmf(s, solver)
        elif args.algo == "fast":
            res = estimate_joint_fast(s, solver)
        elif args.algo == "mf":
            res = estimate_location_mf(s, args.fix_gamma, solver)
        else:
            res = estimate_scale(s, args.fix_a, solver)
    except (PreconditionViolated, ValueError) as exc:
        raise _Fail(EXIT_PRECONDITION, str(exc)) from None
    p = res.params
    print(f"a_hat      {p.a:.12g}")
    print(f"gamma_hat  {p.gamma:.12g}")
    print(f"iterations {res.iterations}")
    print(f"converged  {'yes' if res.converged else 'no'}")
    _result(a_hat=p.a, gamma_hat=p.gamma, iterations=res.iterations, converged=res.converged,
            objective=res.final_objective)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_add_noise(args):
    if not args.gamma > 0:
        raise _Fail(EXIT_USAGE, "--gamma must be positive")
    img = _load_image(args.image)
    noisy = add_noise(img, args.gamma, make_rng(args.seed))
    _write(io.write_pfm, args.out, noisy)
    if args.preview:
        _write(io.write_png, args.preview, noisy)
    print(f"wrote {args.out}")
    _result(out=args.out, height=int(noisy.shape[0]), width=int(noisy.shape[1]))
    return EXIT_OK


def _region_cfg(args):
    try:
        return RegionTestConfig(alpha=args.alpha, min_regions=args.min_regions)
    except ValueError as exc:
        raise _Fail(EXIT_USAGE, str(exc)) from None


def cmd_noise_level(args):
    cfg = _region_cfg(args)
    img = _load_image(args.image)
    try:
        rep = estimate_global_gamma(img, cfg)
    except NoConstantRegions as exc:
        raise _Fail(EXIT_PRECONDITION, str(exc)) from None
    except ValueError as exc:
        raise _Fail(EXIT_PRECONDITION, str(exc)) from None
    side = rep.accepted_blocks[0][1]
    print(f"gamma      {rep.global_gamma:.6g}")
    print(f"regions    {len(rep.accepted_blocks)} of side {side}")
    _result(gamma=rep.global_gamma, regions=len(rep.accepted_blocks), block_side=side)
    return EXIT_OK


def cmd_denoise(args):
    if args.gamma is not None and args.auto_gamma:
        raise _Fail(EXIT_USAGE, "--gamma and --auto-gamma are exclusive")
    needs = args.mode == "nonlocal" or args.estimator == "classical"
    if needs and args.gamma is None and not args.auto_gamma:
        raise _Fail(EXIT_USAGE, "this mode needs --gamma G or --auto-gamma")
    if args.weighted and args.h is None:
        raise _Fail(EXIT_USAGE, "--weighted requires --h")
    try:
        cfg = DenoiseConfig(
            mode=args.mode, estimator=args.estimator, algorithm=args.algo,
            local_radius=args.radius, patch_side=args.patch, window=args.window,
            samples=args.samples, weighted=args.weighted, kernel_h=args.h,
            gamma=args.gamma, threads=args.threads,
        )
    except ValueError as exc:
        raise _Fail(EXIT_USAGE, str(exc)) from None
    solver = _solver(args)
    img = _load_image(args.image)
    try:
        out = denoise(img, cfg, solver)
    except NoConstantRegions as exc:
        raise _Fail(EXIT_PRECONDITION, f"noise level estimation failed: {exc}") from None
    _write(io.write_pfm, args.out, out.image)
    if args.preview:
        _write(io.write_png, args.preview, out.image)
    if args.gamma_map:
        if out.gamma_map is None:
            raise _Fail(EXIT_USAGE, "--gamma-map needs the generalized estimator")
        _write(io.write_pfm, args.gamma_map, out.gamma_map)
    print(f"wrote {args.out}")
    if out.gamma_used is not None:
        print(f"gamma used {out.gamma_used:.6g}")
    _result(out=args.out, gamma_used=out.gamma_used, nonconverged=out.nonconverged)
    return EXIT_OK


def cmd_simulate(args):
    if args.trials < 2:
        raise _Fail(EXIT_USAGE, "--trials must be >= 2")
    if args.n < 3:
        raise _Fail(EXIT_USAGE, "--n must be >= 3")
    if not args.gamma > 0:
        raise _Fail(EXIT_USAGE, "--gamma must be positive")
    solver = _solver(args)
    summary, records = run_study(args.a, args.gamma, args.n, args.trials, args.seed, solver,
                                 with_records=True)
    _write(write_trials_csv, args.out, records)
    if args.summary:
        _write(write_summary_csv, args.summary, summary)
    print(f"iter gmf   {summary.mean_iter1:.4f} +- {summary.sd_iter1:.4f}")
    print(f"iter fast  {summary.mean_iter4:.4f} +- {summary.sd_iter4:.4f}")
    print(f"mse a      {summary.mse_a:.6g}")
    print(f"mse gamma  {summary.mse_gamma:.6g}")
    _result(mean_iter1=summary.mean_iter1, mean_iter4=summary.mean_iter4,
            mse_a=summary.mse_a, mse_gamma=summary.mse_gamma, trials=summary.N)
    return EXIT_OK


def cmd_metrics(args):
    ref = _load_image(args.ref)
    test = _load_image(args.test)
    if args.clamp:
        test = np.clip(test, 0.0, 255.0)
    try:
        p = psnr(test, ref)
        q = ssim(test, ref)
    except (DimensionMismatch, TooSmall) as exc:
        raise _Fail(EXIT_DIMENSION, str(exc)) from None
    print(f"psnr_db    {p:.4f}")
    print(f"ssim       {q:.4f}")
    _result(psnr_db=p, ssim=q)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_solver_flags(p):
    p.add_argument("--tol", type=float, default=1e-6, help="relative stopping tolerance")
    p.add_argument("--max-iter", type=int, default=1000)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="myriad", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate Cauchy parameters from a CSV sample")
    p.add_argument("--input", required=True, help="CSV with header value[,weight]")
    p.add_argument("--algo", choices=("gmf", "fast", "mf", "scale"), default="gmf")
    p.add_argument("--fix-a", type=float)
    p.add_argument("--fix-gamma", type=float)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("add-noise", help="add Cauchy noise to an image")
    p.add_argument("--image", required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output PFM")
    p.add_argument("--preview", help="optional 8-bit PNG preview")
    p.set_defaults(func=cmd_add_noise)

    p = sub.add_parser("noise-level", help="estimate the global noise level")
    p.add_argument("--image", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--min-regions", type=int, default=5)
    p.set_defaults(func=cmd_noise_level)

    p = sub.add_parser("denoise", help="local or nonlocal myriad denoising")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True, help="output PFM")
    p.add_argument("--preview")
    p.add_argument("--mode", choices=("local", "nonlocal"), default="nonlocal")
    p.add_argument("--estimator", choices=("generalized", "classical"), default="generalized")
    p.add_argument("--algo", choices=("gmf", "fast"), default="gmf")
    p.add_argument("--gamma", type=float)
    p.add_argument("--auto-gamma", action="store_true")
    p.add_argument("--radius", type=int, default=1, help="local neighbourhood radius")
    p.add_argument("--patch", type=int, help="patch side (default 3, or 5 above gamma 7.5)")
    p.add_argument("--window", type=int, default=31)
    p.add_argument("--samples", type=int, default=40)
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--h", type=float, help="kernel width for --weighted")
    p.add_argument("--gamma-map", help="output PFM of per-pixel scale estimates")
    p.add_argument("--threads", type=int, default=1)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("simulate", help="Monte Carlo study of the joint estimators")
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--n", type=int, required=True, help="sample size")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="per-trial CSV")
    p.add_argument("--summary", help="one-row summary CSV")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("metrics", help="PSNR and SSIM against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--clamp", action="store_true", help="clamp the test image to 0..255 first")
    p.set_defaults(func=cmd_metrics)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
