"""Observation grids, noisy dataset simulation and CSV persistence."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import rng as _rng
from .series import DEFAULT_SERIES, SeriesConfig, series_factor_grid


class DatasetError(ValueError):
    """Invalid dataset content or CSV input."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class GridSpec:
    """Equally spaced observation design; defaults reproduce the 31 x 11 layout."""

    x_min: float = 0.01
    x_max: float = 10.0
    n_x: int = 31
    t_min: float = 0.5
    t_max: float = 1.5
    n_t: int = 11

    def __post_init__(self):
        for name in ("n_x", "n_t"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        for lo, hi, n in (("x_min", "x_max", "n_x"), ("t_min", "t_max", "n_t")):
            a, b = getattr(self, lo), getattr(self, hi)
            if a < 0:
                raise ValueError(f"{lo} must be non-negative")
            if a > b or (a == b and getattr(self, n) > 1):
                raise ValueError(f"need {lo} < {hi}")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def ts(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.n_t)


def make_grid(spec: GridSpec) -> np.ndarray:
    """All (x, t) design points as an (n_x * n_t, 2) array, x-major."""
    xx, tt = np.meshgrid(spec.xs, spec.ts, indexing="ij")
    return np.column_stack([xx.ravel(), tt.ravel()])


@dataclass
class Dataset:
    x: np.ndarray
    t: np.ndarray
    p: np.ndarray
    provenance: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).ravel()
        self.t = np.asarray(self.t, dtype=float).ravel()
        self.p = np.asarray(self.p, dtype=float).ravel()
        if self.x.size == 0:
            raise DatasetError("empty dataset")
        if not (self.x.size == self.t.size == self.p.size):
            raise DatasetError("x, t and p must have equal length")
        for name in ("x", "t", "p"):
            col = getattr(self, name)
            bad = ~np.isfinite(col) | (col <= 0 if name == "p" else col < 0)
            if bad.any():
                i = int(np.argmax(bad))
                rule = "positive" if name == "p" else "non-negative"
                raise DatasetError(f"{name}={col[i]!r} must be finite and {rule}", row=i + 1)

    def __len__(self):
        return self.x.size

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.x, other.x)
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.p, other.p)
        )

    @property
    def observations(self) -> list[tuple[float, float, float]]:
        return list(zip(self.x.tolist(), self.t.tolist(), self.p.tolist()))

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(
            np.concatenate([self.x, other.x]),
            np.concatenate([self.t, other.t]),
            np.concatenate([self.p, other.p]),
        )


def noiseless(spec: GridSpec, alpha: float, cfg: SeriesConfig = DEFAULT_SERIES) -> np.ndarray:
    """mu at every design point, in make_grid order."""
    s = series_factor_grid([alpha], spec.ts, cfg)[0]
    return (np.exp(-spec.xs)[:, None] * s[None, :]).ravel()


def simulate_dataset(
    spec: GridSpec,
    alpha: float,
    sigma: float,
    seed: int,
    cfg: SeriesConfig = DEFAULT_SERIES,
) -> Dataset:
    """Noisy observations p = mu * exp(sigma * z), z ~ N(0, 1).

    The noise factor has median one. Draw i of the seeded stream goes to
    design point i, so a larger grid with the same seed extends a smaller
    one's draws.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    pts = make_grid(spec)
    mu = noiseless(spec, alpha, cfg)
    z = _rng.stream(seed, _rng.NOISE).standard_normal(len(mu))
    p = mu * np.exp(sigma * z)
    return Dataset(
        pts[:, 0], pts[:, 1], p,
        provenance={"alpha_true": alpha, "sigma_true": sigma, "seed": seed},
    )


HEADER = ["x", "t", "p"]


def _fmt(v: float) -> str:
    return format(v, ".17g")


def write_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for x, t, p in zip(dataset.x, dataset.t, dataset.p):
            w.writerow([_fmt(x), _fmt(t), _fmt(p)])


def read_dataset(path) -> Dataset:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or all(not r for r in rows):
        raise DatasetError("empty dataset")
    header = [h.strip() for h in rows[0]]
    if header != HEADER:
        raise DatasetError(f"expected header 'x,t,p', got {','.join(rows[0])!r}", row=1)
    cols: list[list[float]] = [[], [], []]
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise DatasetError(f"expected 3 fields, got {len(row)}", row=n)
        try:
            vals = [float(v) for v in row]
        except ValueError:
            raise DatasetError(f"non-numeric field in {row!r}", row=n) from None
        x, t, p = vals
        if not all(math.isfinite(v) for v in vals):
            raise DatasetError("non-finite value", row=n)
        if x < 0 or t < 0:
            raise DatasetError("x and t must be non-negative", row=n)
        if p <= 0:
            raise DatasetError(f"p={p!r} must be positive", row=n)
        for c, v in zip(cols, vals):
            c.append(v)
    if not cols[0]:
        raise DatasetError("empty dataset")
    return Dataset(*cols)
