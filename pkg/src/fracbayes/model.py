"""Priors, LogNormal likelihood and unnormalized posterior for theta = (alpha, sigma2).

All functions accept scalars or equal-length arrays for ``alpha`` and
``sigma2`` and return matching shapes. Points outside the support get -inf
rather than raising.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .series import DEFAULT_SERIES, SeriesConfig, log_series_factor

LOG_2PI = float(np.log(2 * np.pi))


@dataclass(frozen=True)
class Theta:
    alpha: float
    sigma2: float

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))


@dataclass(frozen=True)
class PriorSpec:
    """Beta(alpha_star, beta_star) on alpha and chi-square(df) on sigma2.

    ``sigma2_prior=False`` drops the chi-square kernel, i.e. a flat
    improper prior on sigma2.
    """

    alpha_star: float = 3.0
    beta_star: float = 3.0
    df: float = 1.0
    sigma2_prior: bool = True

    def __post_init__(self):
        for name in ("alpha_star", "beta_star", "df"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def ordered_sum(a):
    """Row sums accumulated strictly in column order.

    np.sum's pairwise blocking depends on the array shape, so the same row
    can round differently in batches of different sizes; a running sum does not.
    """
    return np.cumsum(a, axis=-1)[..., -1]


def _in_support(alpha, sigma2):
    return (alpha > 0) & (alpha < 1) & (sigma2 > 0) & np.isfinite(sigma2)


def log_prior(alpha, sigma2, prior: PriorSpec = PriorSpec()):
    """Log Beta and chi-square kernels, normalizing constants dropped."""
    a = np.asarray(alpha, dtype=float)
    s2 = np.asarray(sigma2, dtype=float)
    ok = _in_support(a, s2)
    a_ = np.where(ok, a, 0.5)
    s2_ = np.where(ok, s2, 1.0)
    out = (prior.alpha_star - 1) * np.log(a_) + (prior.beta_star - 1) * np.log1p(-a_)
    if prior.sigma2_prior:
        out = out + (prior.df / 2 - 1) * np.log(s2_) - s2_ / 2
    out = np.where(ok, out, -np.inf)
    return float(out) if out.ndim == 0 else out


def log_mu(alpha, dataset: Dataset, cfg: SeriesConfig = DEFAULT_SERIES, on_nonconvergence="raise"):
    """ln mu_i for each alpha (rows) and observation (columns).

    The series is evaluated once per distinct t and broadcast across x.
    """
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    t_unique, t_index = np.unique(dataset.t, return_inverse=True)
    log_s = log_series_factor(a, t_unique, cfg, on_nonconvergence)
    return log_s[:, t_index] - dataset.x[None, :]


def log_likelihood(alpha, sigma2, dataset: Dataset, cfg: SeriesConfig = DEFAULT_SERIES,
                   on_nonconvergence="raise"):
    """Sum over observations of the LogNormal(ln mu_i, sigma2) log density of p_i.

    With ``on_nonconvergence="nan"`` an alpha whose series fails to converge
    gets -inf instead of raising.
    """
    a = np.asarray(alpha, dtype=float)
    s2 = np.asarray(sigma2, dtype=float)
    shape = np.broadcast(a, s2).shape
    a, s2 = (np.broadcast_to(v, shape).ravel() for v in (a, s2))

    ok = (a > 0) & (a <= 1) & (s2 > 0) & np.isfinite(s2)
    out = np.full(a.shape, -np.inf)
    if ok.any():
        log_p = np.log(dataset.p)
        lm = log_mu(a[ok], dataset, cfg, on_nonconvergence)
        resid2 = ordered_sum((log_p[None, :] - lm) ** 2)
        n = dataset.p.size
        s2ok = s2[ok]
        ll = -resid2 / (2 * s2ok) - ordered_sum(log_p) - 0.5 * n * (np.log(s2ok) + LOG_2PI)
        out[ok] = np.where(np.isnan(ll), -np.inf, ll)
    out = out.reshape(shape)
    return float(out) if out.ndim == 0 else out


def log_unnorm_posterior(alpha, sigma2, dataset: Dataset, prior: PriorSpec = PriorSpec(),
                         cfg: SeriesConfig = DEFAULT_SERIES, on_nonconvergence="raise"):
    lp = np.asarray(log_prior(alpha, sigma2, prior))
    out = np.full(lp.shape, -np.inf)
    finite = np.isfinite(lp)
    if finite.any():
        a = np.broadcast_to(np.asarray(alpha, dtype=float), lp.shape)[finite]
        s2 = np.broadcast_to(np.asarray(sigma2, dtype=float), lp.shape)[finite]
        out[finite] = lp[finite] + log_likelihood(a, s2, dataset, cfg, on_nonconvergence)
    return float(out) if out.ndim == 0 else out


def profile_sigma2(alpha, dataset: Dataset, prior: PriorSpec = PriorSpec(),
                   cfg: SeriesConfig = DEFAULT_SERIES):
    """sigma2 maximizing the posterior kernel for each fixed alpha (closed form).

    With the chi-square kernel the stationarity condition is
    s^2 - 2 c s - RSS = 0 with c = df/2 - 1 - n/2; without it, s = RSS / n.
    Unconverged series give NaN.
    """
    lm = log_mu(alpha, dataset, cfg, on_nonconvergence="nan")
    rss = ordered_sum((np.log(dataset.p)[None, :] - lm) ** 2)
    n = dataset.p.size
    if not prior.sigma2_prior:
        return rss / n
    c = prior.df / 2 - 1 - n / 2
    root = np.sqrt(c * c + rss)
    # pick the cancellation-free form of c + sqrt(c^2 + RSS)
    return np.where(c < 0, rss / (root - c), c + root)
