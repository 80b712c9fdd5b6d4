"""Posterior summaries and posterior predictive profiles."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .data import GridSpec
from .series import DEFAULT_SERIES, SeriesConfig, series_factor_grid
from .sir import PosteriorSampleSet


@dataclass(frozen=True)
class CredibleInterval:
    lo: float
    hi: float
    level: float = 0.95

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("lo must not exceed hi")

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def to_dict(self, parameter: str) -> dict:
        return {"parameter": parameter, "lo": self.lo, "hi": self.hi, "level": self.level}


def quantile(values, q, axis=None):
    """Sample quantile with linear interpolation at h = (n - 1) q (type 7)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("quantile of an empty sample")
    if np.any((np.asarray(q) < 0) | (np.asarray(q) > 1)):
        raise ValueError("q must lie in [0, 1]")
    return np.quantile(v, q, axis=axis, method="linear")


def credible_interval(samples, level: float = 0.95) -> CredibleInterval:
    """Central interval between the (1-level)/2 and 1-(1-level)/2 quantiles."""
    if not 0 <= level < 1:
        raise ValueError("level must lie in [0, 1)")
    tail = (1 - level) / 2
    lo, hi = quantile(samples, [tail, 1 - tail])
    return CredibleInterval(float(lo), float(hi), level)


def posterior_predictive(samples: PosteriorSampleSet, points, draws_per_sample: int = 10,
                         seed: int = 0, cfg: SeriesConfig = DEFAULT_SERIES) -> np.ndarray:
    """Predictive draws p_new = mu(x, t; alpha_j) exp(sigma_j z).

    ``points`` is an (m, 2) array of (x, t). Returns an array of shape
    (n_s * draws_per_sample, m); column i holds the draws for point i.
    """
    if draws_per_sample < 1:
        raise ValueError("draws_per_sample must be >= 1")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    alpha = np.asarray(samples.alpha, dtype=float)
    sigma = np.sqrt(np.asarray(samples.sigma2, dtype=float))
    n_s = alpha.size

    a_unique, a_index = np.unique(alpha, return_inverse=True)
    t_unique, t_index = np.unique(pts[:, 1], return_inverse=True)
    s = series_factor_grid(a_unique, t_unique, cfg)
    mu = np.exp(-pts[:, 0])[None, :] * s[a_index][:, t_index]  # (n_s, m)

    z = _rng.stream(seed, _rng.PREDICT).standard_normal((n_s, draws_per_sample, pts.shape[0]))
    draws = mu[:, None, :] * np.exp(sigma[:, None, None] * z)
    return draws.reshape(n_s * draws_per_sample, pts.shape[0])


def predictive_bands(samples: PosteriorSampleSet, points, draws_per_sample: int = 10,
                     seed: int = 0, cfg: SeriesConfig = DEFAULT_SERIES) -> np.ndarray:
    """(m, 3) array of pointwise q025, q50, q975 of the predictive draws."""
    draws = posterior_predictive(samples, points, draws_per_sample, seed, cfg)
    return quantile(draws, [0.025, 0.5, 0.975], axis=0).T


@dataclass
class PredictiveProfile:
    fixed_label: str
    fixed_value: float
    coord: np.ndarray
    q025: np.ndarray
    q50: np.ndarray
    q975: np.ndarray

    def rows(self):
        for c, a, b, d in zip(self.coord, self.q025, self.q50, self.q975):
            yield [self.fixed_label, self.fixed_value, c, a, b, d]


def default_slices(spec: GridSpec) -> dict:
    """First, middle and last grid line along each axis."""
    xs, ts = spec.xs, spec.ts
    pick = lambda v: sorted({v[0], v[(len(v) - 1) // 2], v[-1]})  # noqa: E731
    return {"x": [float(v) for v in pick(xs)], "t": [float(v) for v in pick(ts)]}


def predictive_profiles(samples: PosteriorSampleSet, spec: GridSpec, slice_values, fixed: str,
                        draws_per_sample: int = 10, seed: int = 0,
                        cfg: SeriesConfig = DEFAULT_SERIES) -> list[PredictiveProfile]:
    """Predictive quantile curves along the free axis at each fixed-coordinate value.

    ``fixed="x"`` holds x at each slice value and runs along the t grid;
    ``fixed="t"`` holds t and runs along the x grid.
    """
    if fixed not in ("x", "t"):
        raise ValueError("fixed must be 'x' or 't'")
    lo, hi = (spec.x_min, spec.x_max) if fixed == "x" else (spec.t_min, spec.t_max)
    free = spec.ts if fixed == "x" else spec.xs
    out = []
    for k, v in enumerate(slice_values):
        v = float(v)
        if not lo <= v <= hi:
            raise ValueError(f"slice {fixed}={v} outside grid range [{lo}, {hi}]")
        if fixed == "x":
            pts = np.column_stack([np.full(free.size, v), free])
        else:
            pts = np.column_stack([free, np.full(free.size, v)])
        # distinct stream per slice so slices are not correlated by reuse
        bands = predictive_bands(samples, pts, draws_per_sample,
                                 _rng.derive_seed(seed, (0 if fixed == "x" else 1 << 32) + k), cfg)
        out.append(PredictiveProfile(fixed, v, free.copy(), bands[:, 0], bands[:, 1], bands[:, 2]))
    return out


PROFILE_HEADER = ["fixed_label", "fixed_value", "coord", "q025", "q50", "q975"]


def write_profiles(profiles, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROFILE_HEADER)
        for prof in profiles:
            for row in prof.rows():
                w.writerow([row[0]] + [format(float(v), ".17g") for v in row[1:]])


def read_profiles(path) -> list[PredictiveProfile]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != PROFILE_HEADER:
        raise ValueError(f"{path}: expected header {','.join(PROFILE_HEADER)}")
    groups: dict = {}
    for r in rows[1:]:
        if not r:
            continue
        key = (r[0], float(r[1]))
        groups.setdefault(key, []).append([float(v) for v in r[2:]])
    out = []
    for (label, value), vals in groups.items():
        arr = np.array(vals)
        out.append(PredictiveProfile(label, value, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]))
    return out


def write_intervals(intervals: dict, path) -> None:
    """Interval JSON: a list of {parameter, lo, hi, level} records."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([ci.to_dict(name) for name, ci in intervals.items()], fh, indent=2)
        fh.write("\n")
