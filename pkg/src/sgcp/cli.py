"""Command-line harness for simulation, fitting, benchmarking, and checks.

Subcommands::

    simulate       draw patterns from a cataloged truth and write them out
    fit            run the posterior sampler on pattern files
    bench          full contraction experiment with rate-slope fit
    calibrate      joint forward/chained sampler calibration check
    verify-priors  analytic tail, moment, and link envelope checks

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure, 5 a validation or acceptance band failed. All outputs are
deterministic functions of the inputs and the seed — no clocks, no host
names — so identical invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from ._accel import BACKEND
from .config import ConfigError, HarnessConfig, load_config, rng_for
from .experiment import (FLOAT_FMT, ExperimentConfig, run_contraction_experiment,
                         write_cells_csv, write_medians_csv, write_report_json)
from .inference import NumericalError, PosteriorChain, geweke_joint_test, run_chain
from .kernels import (FactorizationError, KernelSpec, QuadratureError, SPECTRAL,
                      SpectralDensity, check_exponential_moment)
from .metrics import credible_radius, distances_to_truth, sqrt_l2_distance
from .point_process import (DataError, Grid, IntensityField, integrate_field,
                            read_field_csv, read_pattern_csv, simulate_thinning,
                            write_field_csv, write_pattern_csv)
from .priors import (estimate_sqrt_link_lipschitz, validate_length_scale_tail,
                     validate_max_intensity_tail)
from .truths import get_truth

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_CHECK = 5


def _write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _ensure_out(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write_chain_jsonl(chain: PosteriorChain, path, fingerprint: str, seed: int) -> None:
    """Per-draw chain records; the first line is a metadata record."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({
            "config": fingerprint,
            "kind": "sgcp-chain",
            "n_kept": chain.n_kept,
            "resolution": chain.grid.resolution,
            "seed": seed,
        }, sort_keys=True) + "\n")
        for i in range(chain.n_kept):
            fh.write(json.dumps({
                "ell": float(chain.ell[i]),
                "iteration": int(chain.iterations[i]),
                "lambda_star": float(chain.lambda_star[i]),
                "log_post": float(chain.log_post[i]),
            }, sort_keys=True) + "\n")


def _write_draws_csv(chain: PosteriorChain, path, meta: dict) -> None:
    """Kept intensity draws as a matrix, one draw per row in node order."""
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(meta):
            fh.write(f"# {key}={meta[key]}\n")
        fh.write(f"{chain.grid.dim},{chain.grid.resolution}\n")
        for row in chain.intensity:
            fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")


# -- subcommands ---------------------------------------------------------


def cmd_simulate(args, cfg: HarnessConfig) -> int:
    truth = get_truth(cfg.truth)
    field = truth.field(cfg.resolution)
    ceiling = float(np.max(field.values))
    out = _ensure_out(args)
    rng = rng_for(cfg.seed)
    file_meta = {"config": cfg.fingerprint(), "seed": str(cfg.seed), "truth": cfg.truth}
    counts = []
    for i in range(args.n):
        pattern = simulate_thinning(ceiling, field, rng)
        counts.append(pattern.n)
        write_pattern_csv(pattern, os.path.join(out, f"pattern_{i:04d}.csv"),
                          meta={**file_meta, "index": str(i)})
    write_field_csv(field, os.path.join(out, "truth.csv"), meta=file_meta)
    _write_json({
        "ceiling": ceiling,
        "config_fingerprint": cfg.fingerprint(),
        "counts": counts,
        "integral": integrate_field(field),
        "n": args.n,
        "resolution": cfg.resolution,
        "seed": cfg.seed,
        "total_points": int(sum(counts)),
        "truth": cfg.truth,
    }, os.path.join(out, "simulate.json"))
    print(f"wrote {args.n} patterns ({sum(counts)} points) to {out}")
    return EXIT_OK


def cmd_fit(args, cfg: HarnessConfig) -> int:
    names = sorted(f for f in os.listdir(args.data)
                   if f.startswith("pattern_") and f.endswith(".csv"))
    if not names:
        raise DataError(f"no pattern_*.csv files found in {args.data}")
    patterns = [read_pattern_csv(os.path.join(args.data, f)) for f in names]
    dims = {p.dim for p in patterns}
    if len(dims) != 1:
        raise DataError(f"patterns mix dimensions {sorted(dims)}")
    dim = dims.pop()
    prior = cfg.prior(dim)
    chain_cfg = cfg.chain_config()
    chain = run_chain(patterns, prior, chain_cfg, rng_for(cfg.seed, 1))
    out = _ensure_out(args)
    file_meta = {"config": cfg.fingerprint(), "seed": str(cfg.seed)}
    mean_field = chain.mean_intensity()
    write_field_csv(mean_field, os.path.join(out, "posterior_mean.csv"), meta=file_meta)
    _write_chain_jsonl(chain, os.path.join(out, "chain.jsonl"),
                       cfg.fingerprint(), cfg.seed)
    _write_draws_csv(chain, os.path.join(out, "intensity_draws.csv"), file_meta)
    summary = {
        "accept_ell": chain.accept_ell,
        "accept_lambda": chain.accept_lambda,
        "backend": BACKEND,
        "config_fingerprint": cfg.fingerprint(),
        "ell_mean": float(np.mean(chain.ell)),
        "lambda_star_mean": float(np.mean(chain.lambda_star)),
        "n_eff_ell": chain.diagnostics["n_eff_ell"],
        "n_eff_lambda_star": chain.diagnostics["n_eff_lambda_star"],
        "n_kept": chain.n_kept,
        "n_patterns": len(patterns),
        "n_points": int(sum(p.n for p in patterns)),
        "resolution": chain_cfg.resolution,
        "seed": cfg.seed,
    }
    truth_path = os.path.join(args.data, "truth.csv")
    if os.path.exists(truth_path):
        truth = read_field_csv(truth_path)
        if truth.grid != chain.grid:
            truth = IntensityField(chain.grid, truth.at(chain.grid.nodes()))
        dists = distances_to_truth(chain.intensity, truth)
        summary["distance_mean_to_truth"] = sqrt_l2_distance(mean_field, truth)
        summary["credible_radius_090"] = credible_radius(dists, 0.9)
    _write_json(summary, os.path.join(out, "fit.json"))
    print(f"fit {len(patterns)} patterns ({summary['n_points']} points); "
          f"lam* mean {summary['lambda_star_mean']:.4g}, ell mean {summary['ell_mean']:.4g}")
    if "distance_mean_to_truth" in summary:
        print(f"distance of posterior mean to truth: {summary['distance_mean_to_truth']:.6g}")
    return EXIT_OK


def cmd_bench(args, cfg: HarnessConfig) -> int:
    exp_cfg = ExperimentConfig(
        truth=cfg.truth,
        ns=cfg.ns,
        replicates=cfg.replicates,
        resolution=cfg.resolution,
        seed=cfg.seed,
        radius_constant=cfg.radius_constant,
        chain=cfg.chain_config(),
        synthetic=args.synthetic,
    )
    truth = get_truth(cfg.truth)
    prior = cfg.prior(truth.dim)

    def progress(cell):
        print(f"  n={cell.n} rep={cell.replicate}: distance {cell.distance_mean:.5f}, "
              f"radius {cell.credible_radius_090:.5f}", flush=True)

    report = run_contraction_experiment(exp_cfg, prior=prior,
                                        progress=progress if args.verbose else None)
    out = _ensure_out(args)
    file_meta = {"config": cfg.fingerprint(), "seed": str(cfg.seed)}
    write_report_json(report, os.path.join(out, "report.json"),
                      extra={"config_fingerprint": cfg.fingerprint()})
    write_cells_csv(report, os.path.join(out, "cells.csv"), meta=file_meta)
    write_medians_csv(report, os.path.join(out, "medians.csv"), meta=file_meta)
    for i, n in enumerate(report.ns):
        print(f"n={n:5d}  median distance {report.median_distance[i]:.5f}  "
              f"theory radius {report.theory_radius[i]:.5f}")
    print(f"fitted slope {report.slope:.4f} (theory exponent -{report.theory_exponent:.4f}); "
          f"{report.inversions} inversion(s)")

    if args.baseline is not None:
        with open(args.baseline, encoding="utf-8") as fh:
            baseline = json.load(fh)
        base_slope = float(baseline["slope"])
        if not base_slope < -0.25:
            print(f"CHECK FAIL: baseline slope {base_slope:.4f} is not steeper than -0.25")
            return EXIT_CHECK
        if abs(report.slope - base_slope) > args.band:
            print(f"CHECK FAIL: slope {report.slope:.4f} outside +/-{args.band} "
                  f"of baseline {base_slope:.4f}")
            return EXIT_CHECK
        print(f"CHECK PASS: slope {report.slope:.4f} within +/-{args.band} "
              f"of baseline {base_slope:.4f}")
    return EXIT_OK


def cmd_calibrate(args, cfg: HarnessConfig) -> int:
    grid = Grid(args.dim, args.resolution)
    prior = cfg.prior(args.dim)
    result = geweke_joint_test(
        prior, grid, rng_for(cfg.seed, 7),
        n_rounds=args.rounds,
        sweeps_per_round=args.sweeps,
        mutate_drop_integral=args.mutate,
    )
    for name in sorted(result.z_scores):
        print(f"z[{name}] = {result.z_scores[name]:+.3f}")
    print(f"rounds completed: {result.n_rounds}; diverged: {result.diverged}")
    if args.out is not None:
        _ensure_out(args)
        _write_json({
            "config_fingerprint": cfg.fingerprint(),
            "diverged": result.diverged,
            "mutate": args.mutate,
            "n_rounds": result.n_rounds,
            "resolution": args.resolution,
            "seed": cfg.seed,
            "z_scores": {k: (None if not math.isfinite(v) else v)
                         for k, v in result.z_scores.items()},
        }, os.path.join(args.out, "calibrate.json"))
    ok = (not result.diverged) and result.max_abs_z < args.z_threshold
    print("CALIBRATION " + ("PASS" if ok else "FAIL")
          + f" (max |z| {'inf' if result.diverged else f'{result.max_abs_z:.3f}'}"
          + f", threshold {args.z_threshold})")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_verify_priors(args, cfg: HarnessConfig) -> int:
    prior = cfg.prior(args.dim)
    checks = []

    r = validate_length_scale_tail(prior.ell_prior)
    checks.append(("length-scale-tail-sandwich", r.passed, r.detail, r.witness))
    r = validate_max_intensity_tail(prior.lam_prior)
    checks.append(("ceiling-exponential-tail", r.passed, r.detail, r.witness))

    spec = KernelSpec(family=SPECTRAL, ell=1.0,
                      spectral_density=SpectralDensity("gaussian", args.dim),
                      delta=args.delta)
    m = check_exponential_moment(spec)
    checks.append(("spectral-exponential-moment", m.converged and math.isfinite(m.value),
                   f"value {m.value:.6g} after {m.shells} shells", None))

    heavy = KernelSpec(family=SPECTRAL, ell=1.0,
                       spectral_density=SpectralDensity("cauchy", args.dim),
                       delta=args.delta)
    mh = check_exponential_moment(heavy)
    checks.append(("heavy-tail-probe-divergence", not mh.converged,
                   f"divergence detected after {mh.shells} shells", None))

    est = estimate_sqrt_link_lipschitz(prior.link)
    bound = prior.link.sqrt_lipschitz + 1e-3
    checks.append(("sqrt-link-lipschitz", est <= bound,
                   f"estimate {est:.6f} vs stated constant {prior.link.sqrt_lipschitz:.6f}",
                   None))

    all_ok = True
    for name, passed, detail, witness in checks:
        status = "PASS" if passed else "FAIL"
        extra = f" (witness x={witness:.6g})" if (witness is not None and not passed) else ""
        print(f"{status} {name}: {detail}{extra}")
        all_ok = all_ok and passed
    if args.out is not None:
        _ensure_out(args)
        _write_json({
            "checks": [{"detail": d, "name": n, "passed": p,
                        "witness": w} for n, p, d, w in checks],
            "config_fingerprint": cfg.fingerprint(),
            "dim": args.dim,
            "link": cfg.link,
            "seed": cfg.seed,
        }, os.path.join(args.out, "verify.json"))
    return EXIT_OK if all_ok else EXIT_CHECK


# -- argument plumbing ----------------------------------------------------


def _add_common(sub, out_required: bool = True):
    sub.add_argument("--config", default=None, help="INI configuration file")
    sub.add_argument("--seed", type=int, default=None, help="master seed override")
    if out_required:
        sub.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgcp",
        description="Sigmoidal-Gaussian Cox process intensity learning harness",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate", help="simulate patterns from a cataloged truth")
    _add_common(p)
    p.add_argument("--truth", default=None, help="truth name override")
    p.add_argument("--n", type=int, default=50, help="number of patterns")
    p.add_argument("--resolution", type=int, default=None, help="grid resolution override")
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("fit", help="run the posterior sampler on pattern files")
    _add_common(p)
    p.add_argument("--data", required=True, help="directory with pattern_*.csv")
    p.add_argument("--n-iter", type=int, default=None, help="chain length override")
    p.add_argument("--n-burn", type=int, default=None, help="burn-in override")
    p.add_argument("--resolution", type=int, default=None, help="grid resolution override")
    p.set_defaults(func=cmd_fit)

    p = subs.add_parser("bench", help="contraction experiment and rate-slope fit")
    _add_common(p)
    p.add_argument("--truth", default=None, help="truth name override")
    p.add_argument("--ns", default=None, help="comma-separated design sizes override")
    p.add_argument("--replicates", type=int, default=None, help="replicates override")
    p.add_argument("--n-iter", type=int, default=None, help="chain length override")
    p.add_argument("--n-burn", type=int, default=None, help="burn-in override")
    p.add_argument("--resolution", type=int, default=None, help="grid resolution override")
    p.add_argument("--synthetic", action="store_true",
                   help="inject exact power-law distances instead of sampling")
    p.add_argument("--baseline", default=None, help="report.json to compare the slope against")
    p.add_argument("--band", type=float, default=0.15, help="allowed slope deviation")
    p.add_argument("--verbose", action="store_true", help="per-cell progress lines")
    p.set_defaults(func=cmd_bench)

    p = subs.add_parser("calibrate", help="joint sampler calibration check")
    _add_common(p, out_required=False)
    p.add_argument("--out", default=None, help="optional output directory")
    p.add_argument("--dim", type=int, default=1, help="domain dimension")
    p.add_argument("--resolution", type=int, default=16, help="grid resolution")
    p.add_argument("--rounds", type=int, default=50000, help="calibration rounds")
    p.add_argument("--sweeps", type=int, default=5, help="sampler sweeps per round")
    p.add_argument("--z-threshold", type=float, default=4.0, help="|z| failure threshold")
    p.add_argument("--mutate", action="store_true",
                   help="deliberately corrupt the likelihood (power check; expected FAIL)")
    p.set_defaults(func=cmd_calibrate)

    p = subs.add_parser("verify-priors", help="analytic envelope and moment checks")
    _add_common(p, out_required=False)
    p.add_argument("--out", default=None, help="optional output directory")
    p.add_argument("--dim", type=int, default=1, help="domain dimension")
    p.add_argument("--delta", type=float, default=1.0, help="exponential-moment tilt")
    p.set_defaults(func=cmd_verify_priors)

    return parser


_OVERRIDE_MAP = {
    "seed": "experiment.seed",
    "truth": "experiment.truth",
    "ns": "experiment.ns",
    "replicates": "experiment.replicates",
    "resolution": "experiment.resolution",
    "n_iter": "chain.n_iter",
    "n_burn": "chain.n_burn",
}


def _collect_overrides(args) -> dict:
    overrides = {}
    for attr, dotted in _OVERRIDE_MAP.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[dotted] = str(value)
    return overrides


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, _collect_overrides(args))
        return args.func(args, cfg)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FactorizationError, QuadratureError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
