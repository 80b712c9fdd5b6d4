"""Closed-form pressure solution of the time-fractional advection-diffusion model.

    p(x, t; alpha) = exp(-x) * S(t; alpha),
    S(t; alpha)    = sum_k 2 t^(alpha k) / Gamma(alpha k + 1)

S is twice the one-parameter Mittag-Leffler function evaluated at t^alpha.
Terms are formed in log space so neither t^(alpha k) nor Gamma(alpha k + 1)
is ever materialized.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import zeta

EULER_GAMMA = 0.57721566490153286060651209008240243
HALF_LOG_2PI = 0.91893853320467274178032973640561764

# Taylor coefficients of lnGamma(1 + e) = -gamma*e + sum_{k>=2} (-1)^k zeta(k)/k e^k
_TAYLOR_ORDER = 60
_TAYLOR = np.array(
    [0.0, -EULER_GAMMA]
    + [(-1) ** k * float(zeta(k, 1)) / k for k in range(2, _TAYLOR_ORDER + 1)]
)
# B_2k / (2k (2k - 1)) for the Stirling tail
_STIRLING = np.array([
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
])
_STIRLING_MIN = 10.0

CHUNK = 64


class SeriesNonConvergence(ArithmeticError):
    """Raised when the series has not met the truncation rule by ``k_max``."""

    def __init__(self, message, partial_sum=None, last_term=None):
        super().__init__(message)
        self.partial_sum = partial_sum
        self.last_term = last_term


@dataclass(frozen=True)
class SeriesConfig:
    rel_tol: float = 1e-14
    k_min: int = 20
    k_max: int = 10000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if not 0 < self.k_min < self.k_max:
            raise ValueError(
                f"need 0 < k_min < k_max, got k_min={self.k_min}, k_max={self.k_max}"
            )


DEFAULT_SERIES = SeriesConfig()


def _taylor_near_one(e):
    # Horner evaluation of lnGamma(1 + e), |e| <= 0.5
    acc = np.zeros_like(e)
    for c in _TAYLOR[:0:-1]:
        acc = (acc + c) * e
    return acc


def _stirling(z):
    inv = 1.0 / z
    inv2 = inv * inv
    tail = np.zeros_like(z)
    for c in _STIRLING[::-1]:
        tail = tail * inv2 + c
    return (z - 0.5) * np.log(z) - z + HALF_LOG_2PI + tail * inv


def log_gamma(z):
    """Natural log of the gamma function for real ``z > 0``.

    Accepts a scalar or an array. Relative accuracy is about 1e-14 on
    (0, 5000], including the neighbourhoods of the zeros at 1 and 2, which
    are handled with a Taylor expansion about 1 rather than by subtraction.

    Raises
    ------
    ValueError
        If any ``z <= 0`` (or is NaN).
    """
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    if not np.all(z > 0):
        raise ValueError("log_gamma is defined here only for z > 0")
    out = np.empty_like(z)

    small = z < 0.5
    near1 = (z >= 0.5) & (z < 1.5)
    near2 = (z >= 1.5) & (z < 2.5)
    mid = (z >= 2.5) & (z < _STIRLING_MIN)
    big = z >= _STIRLING_MIN

    if small.any():
        zs = z[small]
        # lnGamma(z) = lnGamma(1 + z) - ln z
        out[small] = _taylor_near_one(zs) - np.log(zs)
    if near1.any():
        out[near1] = _taylor_near_one(z[near1] - 1.0)
    if near2.any():
        e = z[near2] - 2.0
        out[near2] = np.log1p(e) + _taylor_near_one(e)
    if mid.any():
        zm = z[mid]
        n = np.ceil(_STIRLING_MIN - zm)
        prod = np.ones_like(zm)
        shift = zm.copy()
        for _ in range(int(n.max())):
            step = n > 0
            prod = np.where(step, prod * shift, prod)
            shift = np.where(step, shift + 1.0, shift)
            n = n - 1
        out[mid] = _stirling(shift) - np.log(prod)
    if big.any():
        out[big] = _stirling(z[big])

    return float(out) if scalar else out


def _check_alpha(alpha):
    a = np.asarray(alpha, dtype=float)
    if not np.all((a > 0) & (a <= 1)):
        raise ValueError("alpha must lie in (0, 1]")
    return a


def series_factor_grid(alphas, ts, cfg: SeriesConfig = DEFAULT_SERIES, on_nonconvergence="raise"):
    """S(t; alpha) for every pair in ``alphas`` x ``ts``; returns shape (len(alphas), len(ts)).

    The truncation rule is applied per pair: stop at the first k >= k_min
    whose term is below ``rel_tol`` times the sum of the preceding terms;
    that term is still added. Summation is strictly sequential in k, so a
    pair's value does not depend on what else is in the batch.

    ``on_nonconvergence="nan"`` marks unconverged pairs with NaN instead of
    raising :class:`SeriesNonConvergence`.
    """
    a = _check_alpha(np.atleast_1d(alphas)).ravel()
    t = np.asarray(ts, dtype=float).ravel()
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ValueError("t must be finite and non-negative")
    na, nt = a.size, t.size

    with np.errstate(divide="ignore"):
        log_t = np.log(t)
    tzero = t == 0
    log_t_safe = np.where(tzero, 0.0, log_t)

    total = np.full((na, nt), 2.0)  # k = 0 term
    done = np.zeros((na, nt), dtype=bool)
    done[:, tzero] = True  # 0**0 = 1, every later term vanishes
    last_term = np.full((na, nt), 2.0)

    k0 = 1
    while k0 <= cfg.k_max and not done.all():
        k1 = min(k0 + CHUNK, cfg.k_max + 1)
        ks = np.arange(k0, k1, dtype=float)
        rows = np.flatnonzero(~done.all(axis=1))
        ar = a[rows]
        ak = ar[:, None] * ks[None, :]
        lg = log_gamma(ak + 1.0)
        terms = 2.0 * np.exp(ak[:, None, :] * log_t_safe[None, :, None] - lg[:, None, :])

        carry = total[rows]
        csum = np.cumsum(np.concatenate([carry[..., None], terms], axis=-1), axis=-1)
        before = csum[..., :-1]
        hit = (ks >= cfg.k_min)[None, None, :] & (terms < cfg.rel_tol * before)
        any_hit = hit.any(axis=-1)
        first = np.argmax(hit, axis=-1)

        active = ~done[rows]
        stop_now = active & any_hit
        keep_going = active & ~any_hit
        sub_total = total[rows]
        sub_last = last_term[rows]
        sub_total[stop_now] = np.take_along_axis(csum, first[..., None] + 1, axis=-1)[..., 0][stop_now]
        sub_total[keep_going] = csum[..., -1][keep_going]
        sub_last[active] = np.where(
            any_hit, np.take_along_axis(terms, first[..., None], axis=-1)[..., 0], terms[..., -1]
        )[active]
        total[rows] = sub_total
        last_term[rows] = sub_last
        d = done[rows]
        d[stop_now] = True
        done[rows] = d
        k0 = k1

    if not done.all():
        if on_nonconvergence == "raise":
            i, j = np.argwhere(~done)[0]
            raise SeriesNonConvergence(
                f"series did not converge within k_max={cfg.k_max} "
                f"(alpha={a[i]!r}, t={t[j]!r})",
                partial_sum=float(total[i, j]),
                last_term=float(last_term[i, j]),
            )
        total = np.where(done, total, np.nan)
    return total


def series_factor(alpha: float, t: float, cfg: SeriesConfig = DEFAULT_SERIES) -> float:
    """S(t; alpha) = sum_k 2 t^(alpha k) / Gamma(alpha k + 1)."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    return float(series_factor_grid([alpha], [t], cfg)[0, 0])


def evaluate_pressure(x: float, t: float, alpha: float, cfg: SeriesConfig = DEFAULT_SERIES) -> float:
    """Noise-free pressure mu(x, t; alpha) = exp(-x) S(t; alpha)."""
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    return float(np.exp(-np.float64(x)) * series_factor(alpha, t, cfg))


def evaluate_surface(xs, ts, alpha: float, cfg: SeriesConfig = DEFAULT_SERIES) -> np.ndarray:
    """Grid of mu values with shape (len(xs), len(ts)).

    The series is evaluated once per t and the spatial decay once per x.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    ts = np.asarray(ts, dtype=float).ravel()
    if xs.size == 0 or ts.size == 0:
        raise ValueError("xs and ts must be nonempty")
    if np.any(xs < 0):
        raise ValueError("x must be non-negative")
    s = series_factor_grid([alpha], ts, cfg)[0]
    return np.exp(-xs)[:, None] * s[None, :]


def log_series_factor(alphas, ts, cfg: SeriesConfig = DEFAULT_SERIES, on_nonconvergence="raise"):
    """ln S for every (alpha, t) pair; NaN marks unconverged pairs when requested."""
    return np.log(series_factor_grid(alphas, ts, cfg, on_nonconvergence))


__all__ = [
    "SeriesConfig",
    "SeriesNonConvergence",
    "DEFAULT_SERIES",
    "log_gamma",
    "series_factor",
    "series_factor_grid",
    "log_series_factor",
    "evaluate_pressure",
    "evaluate_surface",
]
