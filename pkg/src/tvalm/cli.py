"""Command-line entry point: denoise, deblur, and benchmark commands.

Every run is reproducible from (input image, flags, seed); restored images
are written as 8-bit PGM next to a JSON run report and a per-iteration CSV.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .alm import AlmConfig, alm_run
from .alg2 import alg2_run
from .bench import cells_to_csv, cells_to_markdown, run_matrix
from .degrade import DegradeSpec, blocks_image, degrade
from .errors import SolverError
from .linops import LinearMap, blur_map, motion_kernel
from .pgm import load_image, save_image
from .report import RunReport

SOLVERS = ("pdp", "pdd", "pt", "alg2")
ALG2_MAX_ITERS = 500000
ALG2_CHECK_EVERY = 10


def run_solver(z: np.ndarray, K: Optional[LinearMap], solver: str, alpha: float,
               mu: float, variant: str, tol: float, sigma0: float, growth: float,
               sigma_max: float, delta: float, max_outer: int,
               reference: Optional[np.ndarray], seed: Optional[int]):
    """Dispatch one restoration run; returns (OuterState, RunReport)."""
    if solver == "alg2":
        return alg2_run(z, K, alpha, mu, variant, tol, ALG2_MAX_ITERS,
                        reference=reference, seed=seed,
                        check_every=ALG2_CHECK_EVERY)
    cfg = AlmConfig(alpha=alpha, variant=variant, mu=mu, inner=solver,
                    sigma0=sigma0, growth_c=growth, sigma_max=sigma_max,
                    delta_inner=delta, outer_tol=tol, max_outer=max_outer)
    return alm_run(z, K, cfg, reference=reference, seed=seed)


def _final_row(report: RunReport) -> str:
    s = report.summary
    return (f"{report.method}  n={s['iterations']}  t={s['total_wall_ms'] / 1e3:.2f}s  "
            f"res(u)={s['res_u']:.3e}  res(lambda)={s['res_lambda']:.3e}  "
            f"Res1={s['res1']:.3e}  Res2={s['res2']:.3e}  Gap={s['gap']:.3e}  "
            f"PSNR={s['psnr']:.2f}  Err={s['err']:.3e}")


def _write_artifacts(u: np.ndarray, report: RunReport, out: str, report_path: str) -> None:
    save_image(out, u)
    rp = Path(report_path)
    rp.write_text(report.to_json())
    rp.with_suffix(".csv").write_text(report.to_csv())


def _solver_failure(exc: SolverError) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("err", "residual", "iterations"):
        if hasattr(exc, attr):
            payload[attr] = getattr(exc, attr)
    print(json.dumps(payload, sort_keys=True))
    return 2


def cmd_denoise(args: argparse.Namespace) -> int:
    clean = load_image(args.input)
    z = degrade(clean, DegradeSpec(noise_std=args.noise, seed=args.seed))
    reference = clean if args.noise > 0 else z
    try:
        state, report = run_solver(
            z, None, args.solver, args.alpha, 0.0, args.tv, args.tol, args.sigma0,
            args.growth, args.sigma_max, args.delta, args.max_outer, reference,
            args.seed)
    except SolverError as exc:
        return _solver_failure(exc)
    _write_artifacts(state.u, report, args.out, args.report)
    print(_final_row(report))
    return 0


def cmd_deblur(args: argparse.Namespace) -> int:
    clean = load_image(args.input)
    kernel = motion_kernel(args.blur_len)
    z = degrade(clean, DegradeSpec(noise_std=args.noise, blur=kernel, seed=args.seed))
    try:
        state, report = run_solver(
            z, blur_map(kernel), args.solver, args.alpha, args.mu, args.tv,
            args.tol, args.sigma0, args.growth, args.sigma_max, args.delta,
            args.max_outer, clean, args.seed)
    except SolverError as exc:
        return _solver_failure(exc)
    _write_artifacts(state.u, report, args.out, args.report)
    print(_final_row(report))
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    corpus = sorted(Path(args.corpus).glob("*.pgm"))
    if not corpus:
        print(f"no PGM images found in {args.corpus}", file=sys.stderr)
        return 1
    images = [(p.stem, load_image(p)) for p in corpus]
    solvers = args.solvers.split(",")
    variants = args.variants.split(",")
    tols = [float(t) for t in args.tols.split(",")]

    def runner(z, clean, solver, variant, tol):
        _, report = run_solver(z, None, solver, args.alpha, 0.0, variant, tol,
                               args.sigma0, args.growth, args.sigma_max,
                               args.delta, args.max_outer, clean, args.seed)
        return report

    cells = run_matrix(images, solvers, variants, tols, args.alpha, args.noise,
                       args.seed, runner, workers=args.workers)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "bench.csv").write_text(cells_to_csv(cells))
    (out_dir / "bench.md").write_text(cells_to_markdown(cells))
    print(cells_to_markdown(cells))
    failed = sum(1 for c in cells if c.error)
    print(f"{len(cells)} cells, {failed} failed; tables in {out_dir}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    save_image(args.output, blocks_image(args.rows, args.cols, seed=args.seed))
    return 0


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--alpha", type=float, default=0.1, help="TV weight")
    sub.add_argument("--tv", choices=("iso", "aniso"), default="iso")
    sub.add_argument("--solver", choices=SOLVERS, default="pdp")
    sub.add_argument("--tol", type=float, default=1e-6, help="target Err")
    sub.add_argument("--sigma0", type=float, default=4.0)
    sub.add_argument("--growth", type=float, default=4.0)
    sub.add_argument("--sigma-max", dest="sigma_max", type=float, default=1e6)
    sub.add_argument("--delta", type=float, default=1e-4,
                     help="inner stop constant (residual <= delta/sigma)")
    sub.add_argument("--max-outer", dest="max_outer", type=int, default=30)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", default="restored.pgm")
    sub.add_argument("--report", default="report.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvalm",
        description="TV-regularized image restoration with semismooth-Newton ALM")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("denoise", help="seeded noise, then ROF denoising")
    p.add_argument("input", help="clean 8-bit PGM image")
    _add_common(p)
    p.add_argument("--noise", type=float, default=0.1,
                   help="Gaussian noise std on the [0,1] scale")
    p.set_defaults(func=cmd_denoise)

    p = subs.add_parser("deblur", help="seeded motion blur + noise, then deblurring")
    p.add_argument("input", help="clean 8-bit PGM image")
    _add_common(p)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--mu", type=float, default=1e-6,
                   help="gradient penalty making the data term elliptic")
    p.add_argument("--blur-len", dest="blur_len", type=int, default=41,
                   help="odd horizontal motion-blur length")
    p.set_defaults(func=cmd_deblur)

    p = subs.add_parser("bench", help="solver x variant x tolerance matrix")
    p.add_argument("corpus", help="directory of PGM images")
    _add_common(p)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--solvers", default="pdp,pt,alg2")
    p.add_argument("--variants", default="aniso")
    p.add_argument("--tols", default="1e-4,1e-6")
    p.add_argument("--workers", type=int, default=1,
                   help="concurrent runs (capped by TVALM_THREADS)")
    p.add_argument("--out-dir", dest="out_dir", default="bench_out")
    p.set_defaults(func=cmd_bench)

    p = subs.add_parser("synth", help="write a synthetic piecewise test image")
    p.add_argument("output")
    p.add_argument("--rows", type=int, default=64)
    p.add_argument("--cols", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
