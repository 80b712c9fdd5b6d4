"""Simulation studies: robustness grid, prior sensitivity and coverage.

Every job (one dataset plus one fit) gets its dataset and sampler seeds from
``derive_seed(base_seed, ...)`` with a flat job index, so seeds never
collide within a study and results do not depend on worker count or order.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .data import GridSpec, simulate_dataset
from .inference import credible_interval
from .model import PriorSpec
from .rng import derive_seed
from .series import SeriesConfig, SeriesNonConvergence
from .sir import DegenerateWeightsError, SirConfig, run_sir

DEFAULT_ALPHAS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
DEFAULT_SIGMAS = [0.01, 0.1, 0.25]


@dataclass(frozen=True)
class RobustnessConfig:
    alphas: list = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    sigmas: list = field(default_factory=lambda: list(DEFAULT_SIGMAS))
    base_seed: int = 0
    sir: SirConfig = field(default_factory=SirConfig)
    prior: PriorSpec = field(default_factory=PriorSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    series: SeriesConfig = field(default_factory=SeriesConfig)

    def __post_init__(self):
        _check_truths(self.alphas, self.sigmas)


@dataclass(frozen=True)
class PriorSensitivityConfig:
    shape_values: list = field(default_factory=lambda: [1, 3, 5, 10, 20, 50, 100])
    alpha_true: float = 0.82
    sigma_true: float = 0.1
    df: float = 1.0
    base_seed: int = 0
    sir: SirConfig = field(default_factory=SirConfig)
    grid: GridSpec = field(default_factory=GridSpec)
    series: SeriesConfig = field(default_factory=SeriesConfig)

    def __post_init__(self):
        if not self.shape_values or any(not v > 0 for v in self.shape_values):
            raise ValueError("shape_values must be positive")
        _check_truths([self.alpha_true], [self.sigma_true])


@dataclass(frozen=True)
class CoverageConfig:
    m: int = 200
    alphas: list = field(default_factory=lambda: [0.1, 0.3, 0.5, 0.7, 0.9])
    sigmas: list = field(default_factory=lambda: list(DEFAULT_SIGMAS))
    level: float = 0.95
    base_seed: int = 0
    sir: SirConfig = field(default_factory=SirConfig)
    prior: PriorSpec = field(default_factory=PriorSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    series: SeriesConfig = field(default_factory=SeriesConfig)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        _check_truths(self.alphas, self.sigmas)


def _check_truths(alphas, sigmas):
    if not alphas or any(not 0 < a < 1 for a in alphas):
        raise ValueError("alphas must lie in (0, 1)")
    if not sigmas or any(not s > 0 for s in sigmas):
        raise ValueError("sigmas must be positive")


@dataclass
class FitRecord:
    alpha_true: float
    sigma_true: float
    data_seed: int
    sir_seed: int
    ok: bool
    ci_alpha: Optional[tuple] = None
    ci_sigma: Optional[tuple] = None
    unique_fraction: Optional[float] = None
    ess: Optional[float] = None
    error: Optional[str] = None
    shape: Optional[float] = None
    replicate: Optional[int] = None

    @property
    def contains_alpha(self) -> bool:
        return self.ok and self.ci_alpha[0] <= self.alpha_true <= self.ci_alpha[1]

    @property
    def contains_sigma(self) -> bool:
        return self.ok and self.ci_sigma[0] <= self.sigma_true <= self.ci_sigma[1]

    @property
    def width_alpha(self) -> float:
        return self.ci_alpha[1] - self.ci_alpha[0] if self.ok else float("nan")

    def row(self) -> dict:
        lo_a, hi_a = self.ci_alpha or (None, None)
        lo_s, hi_s = self.ci_sigma or (None, None)
        return {
            "alpha_true": self.alpha_true, "sigma_true": self.sigma_true,
            "shape": self.shape, "replicate": self.replicate,
            "alpha_lo": lo_a, "alpha_hi": hi_a, "sigma_lo": lo_s, "sigma_hi": hi_s,
            "contains_alpha": self.contains_alpha, "contains_sigma": self.contains_sigma,
            "unique_fraction": self.unique_fraction, "ess": self.ess,
            "status": "ok" if self.ok else f"failed: {self.error}",
        }


@dataclass(frozen=True)
class _Job:
    alpha_true: float
    sigma_true: float
    data_seed: int
    sir_seed: int
    sir: SirConfig
    prior: PriorSpec
    grid: GridSpec
    series: SeriesConfig
    level: float = 0.95
    shape: Optional[float] = None
    replicate: Optional[int] = None


def fit_one(job: _Job) -> FitRecord:
    """Simulate one dataset and fit it; failures are recorded, not raised."""
    rec = FitRecord(job.alpha_true, job.sigma_true, job.data_seed, job.sir_seed, ok=False,
                    shape=job.shape, replicate=job.replicate)
    try:
        data = simulate_dataset(job.grid, job.alpha_true, job.sigma_true, job.data_seed, job.series)
        post = run_sir(data, job.prior, replace(job.sir, seed=job.sir_seed), job.series)
    except (DegenerateWeightsError, SeriesNonConvergence) as e:
        rec.error = f"{type(e).__name__}: {e}"
        return rec
    ca = credible_interval(post.alpha, job.level)
    cs = credible_interval(post.sigma, job.level)
    rec.ok = True
    rec.ci_alpha = (ca.lo, ca.hi)
    rec.ci_sigma = (cs.lo, cs.hi)
    rec.unique_fraction = post.diagnostics.unique_fraction
    rec.ess = post.diagnostics.ess
    return rec


def _run_jobs(jobs, workers: int = 1) -> list[FitRecord]:
    if workers <= 1 or len(jobs) <= 1:
        return [fit_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fit_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def robustness_study(cfg: RobustnessConfig, workers: int = 1) -> list[FitRecord]:
    """One simulated dataset and one fit per (alpha, sigma) cell."""
    jobs = []
    for i, (a, s) in enumerate((a, s) for a in cfg.alphas for s in cfg.sigmas):
        jobs.append(_Job(a, s, derive_seed(cfg.base_seed, 2 * i), derive_seed(cfg.base_seed, 2 * i + 1),
                         cfg.sir, cfg.prior, cfg.grid, cfg.series))
    return _run_jobs(jobs, workers)


def prior_sensitivity_study(cfg: PriorSensitivityConfig, workers: int = 1) -> list[FitRecord]:
    """One shared dataset and sampler seed; only the Beta shapes change between rows."""
    data_seed = derive_seed(cfg.base_seed, 0)
    sir_seed = derive_seed(cfg.base_seed, 1)
    jobs = [
        _Job(cfg.alpha_true, cfg.sigma_true, data_seed, sir_seed, cfg.sir,
             PriorSpec(alpha_star=v, beta_star=v, df=cfg.df), cfg.grid, cfg.series, shape=v)
        for v in cfg.shape_values
    ]
    return _run_jobs(jobs, workers)


@dataclass
class CoverageCell:
    alpha_true: float
    sigma_true: float
    m: int
    coverage_alpha: float
    coverage_sigma: float
    n_failed: int
    mean_width_alpha: float

    def row(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CoverageResult:
    cells: list
    replicates: list

    def summary(self) -> dict:
        return {"cells": [c.row() for c in self.cells]}


def coverage_study(cfg: CoverageConfig, workers: int = 1) -> CoverageResult:
    """Fraction of m independent replicates whose interval covers the truth.

    Failed replicates count as non-covering and are tallied in ``n_failed``.
    """
    cells = [(a, s) for a in cfg.alphas for s in cfg.sigmas]
    jobs = []
    for ci, (a, s) in enumerate(cells):
        for r in range(cfg.m):
            flat = ci * cfg.m + r
            jobs.append(_Job(a, s, derive_seed(cfg.base_seed, 2 * flat),
                             derive_seed(cfg.base_seed, 2 * flat + 1), cfg.sir, cfg.prior,
                             cfg.grid, cfg.series, level=cfg.level, replicate=r))
    recs = _run_jobs(jobs, workers)
    out = []
    for ci, (a, s) in enumerate(cells):
        block = recs[ci * cfg.m:(ci + 1) * cfg.m]
        widths = [r.width_alpha for r in block if r.ok]
        out.append(CoverageCell(
            a, s, cfg.m,
            coverage_alpha=sum(r.contains_alpha for r in block) / cfg.m,
            coverage_sigma=sum(r.contains_sigma for r in block) / cfg.m,
            n_failed=sum(not r.ok for r in block),
            mean_width_alpha=float(np.mean(widths)) if widths else float("nan"),
        ))
    return CoverageResult(out, recs)


# -- output ------------------------------------------------------------------

def write_rows(rows: list[dict], path) -> None:
    if not rows:
        raise ValueError("nothing to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(v) for k, v in r.items()})


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return v


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
