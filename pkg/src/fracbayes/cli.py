"""fracbayes command line: simulate, fit, predict and the three studies."""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import config as _config
from .config import ConfigError, build
from .data import DatasetError, GridSpec, read_dataset, simulate_dataset, write_dataset
from .experiments import (
    CoverageConfig,
    PriorSensitivityConfig,
    RobustnessConfig,
    coverage_study,
    prior_sensitivity_study,
    robustness_study,
    write_json,
    write_rows,
)
from .inference import credible_interval, default_slices, predictive_profiles, write_intervals, write_profiles
from .model import PriorSpec
from .series import SeriesConfig, SeriesNonConvergence
from .sir import DegenerateWeightsError, SirConfig, read_samples, run_sir, write_diagnostics, write_samples


@dataclass(frozen=True)
class Truth:
    alpha: float
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class PredictSpec:
    draws_per_sample: int = 10
    seed: int = 0
    x_slices: Optional[list] = None
    t_slices: Optional[list] = None


@dataclass(frozen=True)
class Paths:
    data: str = "data.csv"
    samples: str = "samples.csv"
    diagnostics: str = "diagnostics.json"
    intervals: str = "intervals.json"
    profiles: str = "profiles.csv"


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    prior: PriorSpec = field(default_factory=PriorSpec)
    sir: SirConfig = field(default_factory=SirConfig)
    series: SeriesConfig = field(default_factory=SeriesConfig)
    truth: Optional[Truth] = None
    predict: PredictSpec = field(default_factory=PredictSpec)
    paths: Paths = field(default_factory=Paths)


class CliError(Exception):
    pass


def _load(cls, path):
    if path is None:
        return cls()
    return build(cls, _config.load_json(path))


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("FRACBAYES_THREADS")
        try:
            n = int(env) if env else 1
        except ValueError:
            raise CliError(f"FRACBAYES_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise CliError("--threads must be >= 1")
    return n


def cmd_simulate(args) -> int:
    cfg = _load(RunConfig, args.config)
    if cfg.truth is None:
        raise CliError("truth required for simulate")
    seed = cfg.truth.seed if args.seed is None else args.seed
    out = args.out or cfg.paths.data
    data = simulate_dataset(cfg.grid, cfg.truth.alpha, cfg.truth.sigma, seed, cfg.series)
    write_dataset(data, out)
    print(f"wrote {len(data)} observations to {out} "
          f"(alpha={cfg.truth.alpha}, sigma={cfg.truth.sigma}, seed={seed})")
    return 0


def cmd_fit(args) -> int:
    cfg = _load(RunConfig, args.config)
    data = read_dataset(args.data or cfg.paths.data)
    sir = cfg.sir if args.seed is None else replace(cfg.sir, seed=args.seed)
    out = args.out or cfg.paths.samples
    diag_path = args.diagnostics or cfg.paths.diagnostics
    try:
        post = run_sir(data, cfg.prior, sir, cfg.series, threads=_threads(args))
    except DegenerateWeightsError as e:
        if e.diagnostics is not None:
            write_diagnostics(e.diagnostics, diag_path)
        raise CliError(f"sampler degenerate: {e}") from None
    write_samples(post, out)
    write_diagnostics(post.diagnostics, diag_path)
    ci_a = credible_interval(post.alpha)
    ci_s = credible_interval(post.sigma)
    write_intervals({"alpha": ci_a, "sigma": ci_s}, args.intervals or cfg.paths.intervals)
    d = post.diagnostics
    print(f"{len(post)} posterior samples from {d.n_candidates} candidates "
          f"(unique {d.unique_fraction:.3f}, ESS {d.ess:.1f})")
    print(f"alpha 95% credible interval: ({ci_a.lo:.4f}, {ci_a.hi:.4f})")
    print(f"sigma 95% credible interval: ({ci_s.lo:.4f}, {ci_s.hi:.4f})")
    return 0


def cmd_predict(args) -> int:
    cfg = _load(RunConfig, args.config)
    samples = read_samples(args.samples or cfg.paths.samples)
    spec = cfg.predict
    seed = spec.seed if args.seed is None else args.seed
    slices = default_slices(cfg.grid)
    xs = spec.x_slices if spec.x_slices is not None else slices["x"]
    ts = spec.t_slices if spec.t_slices is not None else slices["t"]
    profiles = predictive_profiles(samples, cfg.grid, xs, "x", spec.draws_per_sample, seed, cfg.series)
    profiles += predictive_profiles(samples, cfg.grid, ts, "t", spec.draws_per_sample, seed, cfg.series)
    out = args.out or cfg.paths.profiles
    write_profiles(profiles, out)
    print(f"wrote {len(profiles)} predictive profiles to {out}")
    return 0


def _study_out(args, default):
    out = Path(args.out or default)
    js = out.with_suffix(".json")
    if args.config and Path(args.config).resolve() == js.resolve():
        raise CliError(f"summary {js} would overwrite the config file; choose another --out")
    return out, js


def _total_failure(failed: bool) -> int:
    if failed:
        raise CliError("every fit in the study failed; see the output table")
    return 0


def _containment_summary(recs):
    ok = [r for r in recs if r.ok]
    return {
        "n_cells": len(recs),
        "n_failed": len(recs) - len(ok),
        "contains_alpha": sum(r.contains_alpha for r in recs),
        "contains_sigma": sum(r.contains_sigma for r in recs),
        "rows": [r.row() for r in recs],
    }


def cmd_robustness(args) -> int:
    cfg = _load(RobustnessConfig, args.config)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    out, js = _study_out(args, "robustness.csv")
    recs = robustness_study(cfg, workers=_threads(args))
    write_rows([r.row() for r in recs], out)
    summary = _containment_summary(recs)
    write_json(summary, js)
    n = len(recs)
    print(f"robustness: alpha contained in {summary['contains_alpha']}/{n} cells, "
          f"sigma in {summary['contains_sigma']}/{n}, failed {summary['n_failed']}")
    return _total_failure(summary["n_failed"] == n)


def cmd_prior_sensitivity(args) -> int:
    cfg = _load(PriorSensitivityConfig, args.config)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    out, js = _study_out(args, "prior_sensitivity.csv")
    recs = prior_sensitivity_study(cfg, workers=_threads(args))
    write_rows([r.row() for r in recs], out)
    summary = _containment_summary(recs)
    write_json(summary, js)
    for r in recs:
        status = "contains" if r.contains_alpha else "EXCLUDES"
        ci = f"({r.ci_alpha[0]:.4f}, {r.ci_alpha[1]:.4f})" if r.ok else "failed"
        print(f"shape {r.shape:g}: alpha {ci} {status} {cfg.alpha_true}")
    return _total_failure(summary["n_failed"] == len(recs))


def cmd_coverage(args) -> int:
    cfg = _load(CoverageConfig, args.config)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    out, js = _study_out(args, "coverage.csv")
    res = coverage_study(cfg, workers=_threads(args))
    if args.per_replicate:
        write_rows([r.row() for r in res.replicates], out)
    else:
        write_rows([c.row() for c in res.cells], out)
    write_json(res.summary(), js)
    for c in res.cells:
        print(f"alpha={c.alpha_true:g} sigma={c.sigma_true:g}: "
              f"coverage alpha {c.coverage_alpha:.3f}, sigma {c.coverage_sigma:.3f} "
              f"(m={c.m}, failed {c.n_failed})")
    return _total_failure(all(c.n_failed == c.m for c in res.cells))


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "robustness": cmd_robustness,
    "prior-sensitivity": cmd_prior_sensitivity,
    "coverage": cmd_coverage,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracbayes", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file (defaults used if omitted)")
        s.add_argument("--seed", type=int, help="override the seed (u64)")
        s.add_argument("--out", help="output path")
        s.add_argument("--threads", type=int, help="worker cap; does not change results")
        if name == "fit":
            s.add_argument("--data", help="dataset CSV (x,t,p)")
            s.add_argument("--diagnostics", help="diagnostics JSON path")
            s.add_argument("--intervals", help="credible interval JSON path")
        if name == "predict":
            s.add_argument("--samples", help="posterior sample CSV (alpha,sigma2)")
        if name == "coverage":
            s.add_argument("--per-replicate", action="store_true",
                           help="one CSV row per replicate instead of per cell")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except (CliError, ConfigError, DatasetError, SeriesNonConvergence, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
