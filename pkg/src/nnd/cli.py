"""Command-line interface.

Subcommands: sample-prior, denoise, grid-denoise, complete, grid-complete,
fit-lambda, validate, compare-np, ess, synth. Every command writes a JSON
manifest next to its outputs and is byte-deterministic under --seed
(wall-clock timing is recorded only with --record-timing). Exit codes:
0 success, 1 numeric or statistical failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io as nio
from .diagnostics import ess as compute_ess
from .diagnostics import ks_statistic, spectral_compare
from .distributions import (
    NP_CALIBRATED_SIGMA2,
    NndParams,
    NpParams,
    sample_normal_product,
)
from .exceptions import ConfigurationError, NumericalError, SamplingError
from .models import (
    CompletionModel,
    DenoisingModel,
    PriorModel,
    fit_lambda_moment,
    lambda_grid,
    make_lowrank_problem,
    run_experiment,
)
from .samplers import ChainConfig, HyperState, run_chain
from .validate import run_battery

_USAGE_ERRORS = (ValueError, ConfigurationError, FileNotFoundError,
                 IsADirectoryError, PermissionError, NotADirectoryError)


def _chain_flags(p, iters=10000, burn=1000, thin=1):
    p.add_argument("--iters", type=int, default=iters)
    p.add_argument("--burn-in", type=int, default=burn)
    p.add_argument("--thin", type=int, default=thin)
    p.add_argument("--seed", type=int, default=0)


def _config_from(args) -> ChainConfig:
    return ChainConfig(iterations=args.iters, burn_in=args.burn_in,
                       thinning=args.thin, seed=args.seed)


def _parse_lambda(text: str):
    if text == "adaptive":
        return None
    lam = float(text)
    if lam < 0:
        raise ValueError(f"lambda must be non-negative or 'adaptive', got {text}")
    return lam


def _manifest(args, command: str, config: dict, metrics_dict: dict,
              t_start: float) -> nio.RunManifest:
    return nio.RunManifest(
        command=command, seed=getattr(args, "seed", 0), config=config,
        metrics=metrics_dict,
        timing=(time.perf_counter() - t_start) if args.record_timing else None)


def _trace_columns(output, n):
    cols = {"iter": np.arange(1, n + 1, dtype=float)}
    for name in ("nuclear_norm", "lam", "gamma2", "log_post", "delta", "accepted"):
        cols[name] = output.traces[name]
    return cols


def _out_dir(path) -> Path:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_sample_prior(args) -> int:
    t0 = time.perf_counter()
    cfg = _config_from(args)
    params = NndParams(args.lam, args.rows, args.cols)
    output = run_chain(PriorModel(params), cfg, kernel=args.kernel)
    out_draws = Path(args.out_draws)
    if args.per_draw_files:
        out_draws.mkdir(parents=True, exist_ok=True)
        for i, d in enumerate(output.draws):
            nio.save_matrix_csv(out_draws / f"draw_{i:06d}.csv", d)
    else:
        nio.save_draws_csv(out_draws, output.draws)
    nio.save_trace_csv(args.out_trace, {
        "iter": np.arange(1, cfg.iterations + 1, dtype=float),
        "nuclear_norm": output.traces["nuclear_norm"],
        "delta": output.traces["delta"],
        "accepted": output.traces["accepted"],
    })
    man = _manifest(args, "sample-prior", {
        "rows": args.rows, "cols": args.cols, "lambda": args.lam,
        "kernel": args.kernel, "iterations": cfg.iterations,
        "burn_in": cfg.burn_in, "thinning": cfg.thinning,
    }, {
        "n_draws": int(output.draws.shape[0]),
        "acceptance_rates": output.acceptance_rates,
        "mean_nuclear_norm": float(np.mean(output.traces["nuclear_norm"][cfg.burn_in:])),
    }, t0)
    man.save(args.manifest or (Path(args.out_trace).parent / "manifest.json"))
    return 0


def _posterior_command(args, completion: bool) -> int:
    t0 = time.perf_counter()
    cfg = _config_from(args)
    y = nio.load_matrix(args.input)
    lam = _parse_lambda(args.lam)
    hyper = HyperState(lam=(1.0 if lam is None else lam), gamma2=args.gamma2,
                       gamma2_fixed=not args.sample_gamma2)
    mode = "adaptive" if lam is None else "fixed"
    if completion:
        mask = nio.load_matrix(args.mask)
        model = CompletionModel(y=y, mask=mask, hyper=hyper, lambda_mode=mode)
    else:
        model = DenoisingModel(y=y, hyper=hyper, lambda_mode=mode)
    truth = nio.load_matrix(args.truth) if args.truth else None
    result, output = run_experiment(model, cfg, kernel=args.kernel, truth=truth)
    out = _out_dir(args.out)
    nio.save_matrix_csv(out / "posterior_mean.csv", result.posterior_mean)
    nio.save_trace_csv(out / "trace.csv", _trace_columns(output, cfg.iterations))
    name = "complete" if completion else "denoise"
    man = _manifest(args, name, {
        "input": str(args.input), "gamma2": args.gamma2,
        "lambda": args.lam, "kernel": args.kernel,
        "iterations": cfg.iterations, "burn_in": cfg.burn_in,
        "thinning": cfg.thinning, "sample_gamma2": args.sample_gamma2,
        **({"mask": str(args.mask)} if completion else {}),
    }, {
        **result.as_dict(),
        "acceptance_rates": output.acceptance_rates,
    }, t0)
    man.save(out / "manifest.json")
    return 0


def cmd_denoise(args) -> int:
    return _posterior_command(args, completion=False)


def cmd_complete(args) -> int:
    return _posterior_command(args, completion=True)


def _grid_command(args, completion: bool) -> int:
    t0 = time.perf_counter()
    y = nio.load_matrix(args.input)
    truth = nio.load_matrix(args.truth)
    mask = nio.load_matrix(args.mask) if completion else None
    grid = lambda_grid(args.grid_lo, args.grid_hi, args.grid_points)
    rows = []
    for i, lam in enumerate(grid):
        cfg = ChainConfig(iterations=args.iters, burn_in=args.burn_in,
                          thinning=args.thin, seed=args.seed)
        hyper = HyperState(lam=float(lam), gamma2=args.gamma2)
        model = (CompletionModel(y=y, mask=mask, hyper=hyper) if completion
                 else DenoisingModel(y=y, hyper=hyper))
        result, _ = run_experiment(model, cfg, kernel=args.kernel, truth=truth,
                                   chain_index=i + 1)
        rows.append((float(lam), result.mse_all, result.mse_hidden, result.sse))
    cfg = ChainConfig(iterations=args.iters, burn_in=args.burn_in,
                      thinning=args.thin, seed=args.seed)
    hyper = HyperState(lam=1.0, gamma2=args.gamma2)
    model = (CompletionModel(y=y, mask=mask, hyper=hyper, lambda_mode="adaptive")
             if completion else
             DenoisingModel(y=y, hyper=hyper, lambda_mode="adaptive"))
    adaptive, _ = run_experiment(model, cfg, kernel=args.kernel, truth=truth)
    out = _out_dir(args.out)
    nio.save_trace_csv(out / "grid.csv", {
        "lambda": np.array([r[0] for r in rows]),
        "mse_all": np.array([r[1] for r in rows]),
        "mse_hidden": np.array([float("nan") if r[2] is None else r[2] for r in rows]),
        "sse": np.array([r[3] for r in rows]),
    })
    nio.save_matrix_csv(out / "adaptive_posterior_mean.csv", adaptive.posterior_mean)
    if completion and adaptive.mse_hidden is not None:
        key = "mse_hidden"
        grid_best = min(r[2] for r in rows)
        adaptive_val = adaptive.mse_hidden
    else:
        key = "mse_all"
        grid_best = min(r[1] for r in rows)
        adaptive_val = adaptive.mse_all
    name = "grid-complete" if completion else "grid-denoise"
    man = _manifest(args, name, {
        "input": str(args.input), "gamma2": args.gamma2, "kernel": args.kernel,
        "grid": [r[0] for r in rows], "iterations": args.iters,
        "burn_in": args.burn_in, "thinning": args.thin,
        **({"mask": str(args.mask)} if completion else {}),
    }, {
        "metric": key,
        "grid_best": grid_best,
        "adaptive": adaptive_val,
        "adaptive_over_best": (adaptive_val / grid_best if grid_best > 0 else None),
        "adaptive_lambda_median": adaptive.lambda_median,
        "grid_rows": [list(r) for r in rows],
    }, t0)
    man.save(out / "manifest.json")
    return 0


def cmd_grid_denoise(args) -> int:
    return _grid_command(args, completion=False)


def cmd_grid_complete(args) -> int:
    return _grid_command(args, completion=True)


def cmd_fit_lambda(args) -> int:
    t0 = time.perf_counter()
    mats = [nio.load_matrix(p) for p in args.inputs]
    lam_hat = fit_lambda_moment(mats)
    shape = mats[0].shape
    mean_norm = shape[0] * shape[1] / lam_hat
    man = _manifest(args, "fit-lambda", {"inputs": [str(p) for p in args.inputs]}, {
        "lambda_hat": lam_hat,
        "nm": shape[0] * shape[1],
        "mean_nuclear_norm": mean_norm,
        "n_matrices": len(mats),
    }, t0)
    man.save(args.out)
    print(json.dumps({"lambda_hat": lam_hat, "n_matrices": len(mats)}))
    return 0


def cmd_validate(args) -> int:
    if args.n_draws < 100:
        print("validate: --n-draws below 100 is underpowered; refusing",
              file=sys.stderr)
        return 2
    results = run_battery(args.rows, args.cols, args.lam, args.n_draws, args.seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_compare_np(args) -> int:
    t0 = time.perf_counter()
    rng = np.random.default_rng(args.seed)
    n = args.n
    cfg = ChainConfig(iterations=args.burn_in + args.n_draws * args.thin,
                      burn_in=args.burn_in, thinning=args.thin, seed=args.seed)
    nnd_out = run_chain(PriorModel(NndParams(1.0, n, n)), cfg, kernel="prox")
    nnd_draws = nnd_out.draws
    if args.self_compare:
        np_draws = nnd_draws
    else:
        np_draws = sample_normal_product(NpParams(NP_CALIBRATED_SIGMA2, n), rng,
                                         size=nnd_draws.shape[0])
    report = spectral_compare(nnd_draws, np_draws, lam=1.0, rescale=True)
    # radial law of eigenvalue moduli at a larger size, normal product only
    eig_mods = []
    for _ in range(args.eig_draws):
        x = sample_normal_product(NpParams(1.0, args.eig_n), rng) / args.eig_n
        eig_mods.append(np.abs(np.linalg.eigvals(x)))
    eig_mods = np.sort(np.concatenate(eig_mods))
    eig_d, _ = ks_statistic(np.clip(eig_mods, 0.0, 1.0), lambda r: np.clip(r, 0.0, 1.0))
    out = _out_dir(args.out)
    sv_a = np.concatenate([np.linalg.svd(x, compute_uv=False) for x in nnd_draws]) / n
    sv_b = np.concatenate([np.linalg.svd(x, compute_uv=False) for x in np_draws]) / n
    hist_a, edges = np.histogram(sv_a, bins=60, range=(0.0, max(sv_a.max(), sv_b.max())),
                                 density=True)
    hist_b, _ = np.histogram(sv_b, bins=edges, density=True)
    nio.save_trace_csv(out / "sv_hist.csv", {
        "bin_left": edges[:-1], "bin_right": edges[1:],
        "density_nnd": hist_a, "density_np": hist_b,
    })
    eh, ee = np.histogram(eig_mods, bins=50, range=(0.0, 1.2), density=True)
    nio.save_trace_csv(out / "eig_modulus_hist.csv", {
        "bin_left": ee[:-1], "bin_right": ee[1:], "density_np": eh,
    })
    man = _manifest(args, "compare-np", {
        "n": n, "n_draws": args.n_draws, "sigma2": NP_CALIBRATED_SIGMA2,
        "self": args.self_compare, "eig_n": args.eig_n, "eig_draws": args.eig_draws,
        "iterations": cfg.iterations, "burn_in": cfg.burn_in, "thinning": cfg.thinning,
    }, {
        **report.as_dict(),
        "eig_radial_ks_np": eig_d,
    }, t0)
    man.save(out / "manifest.json")
    print(json.dumps({"sv_wasserstein": report.sv_wasserstein,
                      "eig_radial_ks_np": eig_d}))
    return 0


def cmd_ess(args) -> int:
    cols = nio.load_trace_csv(args.trace)
    if args.column not in cols:
        raise ValueError(f"column {args.column!r} not in trace "
                         f"(have: {', '.join(cols)})")
    report = compute_ess(cols[args.column])
    print(json.dumps(report.as_dict()))
    return 0


def cmd_synth(args) -> int:
    t0 = time.perf_counter()
    rng = np.random.default_rng(args.seed)
    hide = args.hide_prob if args.hide_prob > 0 else None
    truth, y, mask = make_lowrank_problem(args.rows, args.cols, args.rank, rng,
                                          noise_sd=args.noise_sd, hide_prob=hide)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    nio.save_matrix_csv(f"{prefix}_truth.csv", truth)
    nio.save_matrix_csv(f"{prefix}_y.csv", y)
    written = {"truth": f"{prefix}_truth.csv", "y": f"{prefix}_y.csv"}
    if mask is not None:
        nio.save_matrix_csv(f"{prefix}_mask.csv", mask)
        written["mask"] = f"{prefix}_mask.csv"
    man = _manifest(args, "synth", {
        "rows": args.rows, "cols": args.cols, "rank": args.rank,
        "noise_sd": args.noise_sd, "hide_prob": args.hide_prob,
    }, {"files": written}, t0)
    man.save(f"{prefix}_manifest.json")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nnd",
        description="Nuclear norm distribution: samplers, posterior experiments, "
                    "and distribution-law validation.")
    ap.add_argument("--record-timing", action="store_true",
                    help="include wall-clock timing in manifests (breaks "
                         "byte-determinism across runs)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-prior", help="draw from the matrix prior")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--kernel", choices=("prox", "svd"), default="prox")
    _chain_flags(p)
    p.add_argument("--out-draws", required=True)
    p.add_argument("--out-trace", required=True)
    p.add_argument("--per-draw-files", action="store_true")
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_sample_prior)

    for name, completion in (("denoise", False), ("complete", True)):
        p = sub.add_parser(name, help=f"posterior mean for the {name} model")
        p.add_argument("--input", required=True)
        if completion:
            p.add_argument("--mask", required=True)
        p.add_argument("--gamma2", type=float, required=True)
        p.add_argument("--lambda", dest="lam", required=True,
                       help="a fixed value or 'adaptive'")
        p.add_argument("--kernel", choices=("prox", "svd"), default="prox")
        p.add_argument("--truth", default=None)
        p.add_argument("--sample-gamma2", action="store_true")
        _chain_flags(p)
        p.add_argument("--out", required=True)
        p.set_defaults(func=cmd_complete if completion else cmd_denoise)

    for name, completion in (("grid-denoise", False), ("grid-complete", True)):
        p = sub.add_parser(name, help=f"{name}: fixed-rate grid plus adaptive run")
        p.add_argument("--input", required=True)
        if completion:
            p.add_argument("--mask", required=True)
        p.add_argument("--gamma2", type=float, required=True)
        p.add_argument("--truth", required=True)
        p.add_argument("--kernel", choices=("prox", "svd"), default="prox")
        p.add_argument("--grid-lo", type=float, default=0.01)
        p.add_argument("--grid-hi", type=float, default=100.0)
        p.add_argument("--grid-points", type=int, default=10)
        _chain_flags(p, iters=4000, burn=800)
        p.add_argument("--out", required=True)
        p.set_defaults(func=cmd_grid_complete if completion else cmd_grid_denoise)

    p = sub.add_parser("fit-lambda", help="moment-matching fit of the penalty rate")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit_lambda)

    p = sub.add_parser("validate", help="distribution-law battery")
    p.add_argument("--rows", type=int, default=2)
    p.add_argument("--cols", type=int, default=2)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--n-draws", type=int, default=5000)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compare-np", help="spectral comparison against the "
                                          "normal-product approximation")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--n-draws", type=int, default=20000)
    p.add_argument("--thin", type=int, default=5)
    p.add_argument("--burn-in", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--self", dest="self_compare", action="store_true")
    p.add_argument("--eig-n", type=int, default=200)
    p.add_argument("--eig-draws", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare_np)

    p = sub.add_parser("ess", help="effective sample size of one trace column")
    p.add_argument("--trace", required=True)
    p.add_argument("--column", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ess)

    p = sub.add_parser("synth", help="generate a synthetic benchmark problem")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--noise-sd", type=float, default=0.1)
    p.add_argument("--hide-prob", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_synth)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"nnd {args.command}: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, SamplingError) as exc:
        print(f"nnd {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
