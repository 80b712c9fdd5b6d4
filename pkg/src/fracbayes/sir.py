"""Sampling importance resampling for theta = (alpha, sigma2).

Steps: draw candidates from a proposal, weight them by posterior/proposal
in log space, normalize with log-sum-exp, resample with replacement.

The default proposal is adaptive and lives in (logit alpha, ln sigma2)
coordinates. A prior pilot seeds a profile-likelihood search for the mode,
a finite-difference Laplace fit gives the starting covariance, and a few
importance rounds refit mean and covariance (tempered until the untempered
pilot has enough effective samples). Final candidates come from that normal
with its covariance inflated.
"""
from __future__ import annotations

import csv
import math
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize, stats
from scipy.special import expit, logit

from . import rng as _rng
from .data import Dataset
from .model import PriorSpec, log_unnorm_posterior, profile_sigma2
from .series import DEFAULT_SERIES, SeriesConfig

PROPOSAL_KINDS = ("Prior", "UniformBox", "AdaptivePilot")
MIN_PILOT_FINITE = 10


class DegenerateWeightsError(RuntimeError):
    """No usable importance weights; ``diagnostics`` carries what is known."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class DegeneratePilotError(DegenerateWeightsError):
    pass


@dataclass(frozen=True)
class Box:
    alpha_lo: float
    alpha_hi: float
    sigma2_lo: float
    sigma2_hi: float

    def __post_init__(self):
        if not 0 <= self.alpha_lo < self.alpha_hi <= 1:
            raise ValueError("box needs 0 <= alpha_lo < alpha_hi <= 1")
        if not 0 <= self.sigma2_lo < self.sigma2_hi:
            raise ValueError("box needs 0 <= sigma2_lo < sigma2_hi")


@dataclass(frozen=True)
class ProposalSpec:
    kind: str = "AdaptivePilot"
    box: Optional[Box] = None
    pilot_size: int = 2000
    inflation: float = 2.0
    max_rounds: int = 20
    target_ess_fraction: float = 0.5

    def __post_init__(self):
        if self.kind not in PROPOSAL_KINDS:
            raise ValueError(f"kind must be one of {PROPOSAL_KINDS}, got {self.kind!r}")
        if isinstance(self.box, dict):
            object.__setattr__(self, "box", Box(**self.box))
        if (self.box is not None) != (self.kind == "UniformBox"):
            raise ValueError("box is required for UniformBox and only for UniformBox")
        if self.pilot_size < 100:
            raise ValueError("pilot_size must be >= 100")
        if self.inflation < 1:
            raise ValueError("inflation must be >= 1")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if not 0 < self.target_ess_fraction <= 1:
            raise ValueError("target_ess_fraction must be in (0, 1]")


@dataclass(frozen=True)
class SirConfig:
    n_c: int = 10000
    n_s: int = 1000
    seed: int = 0
    proposal: ProposalSpec = field(default_factory=ProposalSpec)

    def __post_init__(self):
        if isinstance(self.proposal, dict):
            object.__setattr__(self, "proposal", ProposalSpec(**self.proposal))
        if self.n_s < 1 or self.n_c < 1:
            raise ValueError("n_c and n_s must be >= 1")
        if self.n_s > self.n_c:
            raise ValueError("n_s must not exceed n_c")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class Candidates:
    alpha: np.ndarray
    sigma2: np.ndarray
    log_q: np.ndarray

    def __len__(self):
        return self.alpha.size


@dataclass
class SirDiagnostics:
    unique_fraction: float
    ess: float
    max_weight: float
    n_finite_weights: int
    n_candidates: int
    proposal: str
    pilot_rounds: int = 0
    pilot_converged: Optional[bool] = None
    pilot_alpha_mean: Optional[float] = None

    def to_dict(self):
        return asdict(self)


@dataclass
class PosteriorSampleSet:
    alpha: np.ndarray
    sigma2: np.ndarray
    index: Optional[np.ndarray]
    diagnostics: Optional[SirDiagnostics] = None
    # full weighted candidate set, kept for importance-weighted summaries
    candidates: Optional[Candidates] = field(default=None, repr=False)
    weights: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self):
        return self.alpha.size

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(self.sigma2)


# -- proposals ---------------------------------------------------------------

class _PriorProposal:
    def __init__(self, prior: PriorSpec):
        self.prior = prior

    def draw(self, gen, n):
        a = gen.beta(self.prior.alpha_star, self.prior.beta_star, size=n)
        s2 = gen.chisquare(self.prior.df, size=n)
        return Candidates(a, s2, self.log_density(a, s2))

    def log_density(self, a, s2):
        with np.errstate(divide="ignore"):
            return (stats.beta.logpdf(a, self.prior.alpha_star, self.prior.beta_star)
                    + stats.chi2.logpdf(s2, self.prior.df))


class _BoxProposal:
    def __init__(self, box: Box):
        self.box = box
        self.log_area = float(np.log((box.alpha_hi - box.alpha_lo) * (box.sigma2_hi - box.sigma2_lo)))

    def draw(self, gen, n):
        b = self.box
        u = gen.random((n, 2))
        a = b.alpha_lo + (b.alpha_hi - b.alpha_lo) * u[:, 0]
        s2 = b.sigma2_lo + (b.sigma2_hi - b.sigma2_lo) * u[:, 1]
        return Candidates(a, s2, np.full(n, -self.log_area))


class _LogitNormalProposal:
    """Bivariate normal on (logit alpha, ln sigma2), densities mapped back to theta."""

    def __init__(self, mean, cov):
        self.mean = np.asarray(mean, dtype=float)
        self.cov = np.asarray(cov, dtype=float)
        self.chol = np.linalg.cholesky(self.cov)
        self.log_det_half = float(np.sum(np.log(np.diag(self.chol))))

    def draw(self, gen, n):
        z = gen.standard_normal((n, 2))
        u = self.mean + z @ self.chol.T
        a = expit(u[:, 0])
        s2 = np.exp(u[:, 1])
        log_q = -0.5 * np.sum(z * z, axis=1) - self.log_det_half - np.log(2 * np.pi)
        with np.errstate(divide="ignore"):
            log_q = log_q - np.log(a) - np.log1p(-a) - u[:, 1]
        return Candidates(a, s2, log_q)


def _to_plane(a, s2):
    return np.column_stack([logit(a), np.log(s2)])


def _weighted_fit(c: Candidates, w):
    u = _to_plane(c.alpha, c.sigma2)
    keep = w > 0
    u, w = u[keep], w[keep]
    mean = w @ u
    d = u - mean
    cov = (w[:, None] * d).T @ d
    # guard a rank-deficient fit (e.g. all mass on one duplicated point)
    floor = 1e-12 * max(np.trace(cov), 1e-12)
    cov = cov + floor * np.eye(2)
    return mean, cov


def _ess(w):
    return float(1.0 / np.sum(w * w))


def _temper(log_w, target_ess):
    """Largest beta in (0, 1] with ESS(w**beta) >= target_ess."""
    if _ess(normalize_weights(log_w)) >= target_ess:
        return 1.0
    fin = np.isfinite(log_w)
    lw = np.where(fin, log_w - log_w[fin].max(), -np.inf)
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _ess(normalize_weights(mid * lw)) >= target_ess:
            lo = mid
        else:
            hi = mid
    return max(lo, 1e-300)


def _log_post_plane(u, dataset, prior, series):
    a = expit(u[..., 0])
    s2 = np.exp(u[..., 1])
    return log_unnorm_posterior(a, s2, dataset, prior, series, on_nonconvergence="nan")


def _locate_mode(pilot: Candidates, dataset, prior, series):
    """Posterior mode in the plane, from a profile scan over the pilot's alphas.

    sigma2 is profiled out in closed form, the best pilot alpha brackets a
    bounded Brent search, and the result is mapped to (logit alpha, ln sigma2).
    """
    a = np.unique(pilot.alpha[(pilot.alpha > 0) & (pilot.alpha < 1)])
    if a.size == 0:
        return None
    s2 = profile_sigma2(a, dataset, prior, series)
    lp = np.asarray(log_unnorm_posterior(a, s2, dataset, prior, series, on_nonconvergence="nan"))
    lp = np.where(np.isfinite(lp), lp, -np.inf)
    if not np.isfinite(lp).any():
        return None
    i = int(np.argmax(lp))
    lo = logit(a[i - 1]) if i > 0 else logit(a[i]) - 1.0
    hi = logit(a[i + 1]) if i + 1 < a.size else logit(a[i]) + 1.0

    def neg_profile(v):
        al = np.array([expit(v)])
        val = log_unnorm_posterior(al, profile_sigma2(al, dataset, prior, series),
                                   dataset, prior, series, on_nonconvergence="nan")
        val = float(np.asarray(val).ravel()[0])
        return -val if np.isfinite(val) else np.inf

    res = optimize.minimize_scalar(neg_profile, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    v = res.x if res.fun <= -lp[i] else logit(a[i])
    s2_hat = float(profile_sigma2(np.array([expit(v)]), dataset, prior, series)[0])
    if not (np.isfinite(s2_hat) and s2_hat > 0):
        return None
    return np.array([v, np.log(s2_hat)])


def _laplace_cov(mode, dataset, prior, series):
    """Inverse negative Hessian of the log posterior in the plane, or None."""
    f0 = float(_log_post_plane(mode, dataset, prior, series))
    h = np.empty(2)
    for j in range(2):
        step = 1e-2
        for _ in range(60):
            e = np.zeros(2)
            e[j] = step
            drop = f0 - 0.5 * float(_log_post_plane(mode + e, dataset, prior, series)) \
                - 0.5 * float(_log_post_plane(mode - e, dataset, prior, series))
            if not np.isfinite(drop) or drop > 2.0:
                step *= 0.5
            elif drop < 0.02:
                step *= 2.0
            else:
                break
        h[j] = step
    pts = {}
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            pts[di, dj] = mode + np.array([di * h[0], dj * h[1]])
    grid = np.array(list(pts.values()))
    vals = dict(zip(pts, np.asarray(_log_post_plane(grid, dataset, prior, series))))
    hess = np.empty((2, 2))
    hess[0, 0] = (vals[1, 0] - 2 * vals[0, 0] + vals[-1, 0]) / h[0] ** 2
    hess[1, 1] = (vals[0, 1] - 2 * vals[0, 0] + vals[0, -1]) / h[1] ** 2
    hess[0, 1] = hess[1, 0] = (vals[1, 1] - vals[1, -1] - vals[-1, 1] + vals[-1, -1]) / (4 * h[0] * h[1])
    if not np.all(np.isfinite(hess)):
        return None
    try:
        cov = np.linalg.inv(-hess)
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return None
    return cov


def _adapt(cfg: SirConfig, prior, dataset, series, threads):
    """Build the AdaptivePilot proposal; returns (proposal, info)."""
    spec = cfg.proposal
    target = spec.target_ess_fraction * spec.pilot_size
    pilot = _PriorProposal(prior).draw(_rng.stream(cfg.seed, _rng.PILOT, 0), spec.pilot_size)
    log_w = compute_log_weights(pilot, dataset, prior, series, threads, raise_on_degenerate=False)
    n_fin = int(np.isfinite(log_w).sum())
    if n_fin < MIN_PILOT_FINITE:
        raise DegeneratePilotError(
            f"prior pilot has only {n_fin} candidates with nonzero weight; "
            "use a wider prior or a UniformBox proposal"
        )

    mode = _locate_mode(pilot, dataset, prior, series)
    cov = None if mode is None else _laplace_cov(mode, dataset, prior, series)
    if cov is None:
        w = normalize_weights(_temper(log_w, target) * log_w)
        mode, cov = _weighted_fit(pilot, w)
    q = _LogitNormalProposal(mode, spec.inflation * cov)

    info = {"pilot_rounds": 1, "pilot_converged": False,
            "pilot_alpha_mean": float(normalize_weights(log_w) @ pilot.alpha)}
    for r in range(1, spec.max_rounds + 1):
        pilot = q.draw(_rng.stream(cfg.seed, _rng.PILOT, r), spec.pilot_size)
        log_w = compute_log_weights(pilot, dataset, prior, series, threads,
                                    raise_on_degenerate=False)
        if np.isfinite(log_w).sum() < MIN_PILOT_FINITE:
            raise DegeneratePilotError(f"pilot round {r} lost all weight")
        beta = _temper(log_w, target)
        w = normalize_weights(beta * log_w)
        mean, cov = _weighted_fit(pilot, w)
        info["pilot_rounds"] = r + 1
        info["pilot_alpha_mean"] = float(w @ pilot.alpha)
        q = _LogitNormalProposal(mean, spec.inflation * cov)
        if beta == 1.0:
            info["pilot_converged"] = True
            break
    return q, info


# -- the four steps ----------------------------------------------------------

def compute_log_weights(cands: Candidates, dataset: Dataset, prior: PriorSpec,
                        series: SeriesConfig = DEFAULT_SERIES, threads: int = 1,
                        raise_on_degenerate: bool = True):
    """log w_i = log posterior kernel(theta_i) - log proposal density(theta_i).

    Candidates outside the support, or whose series does not converge, get
    -inf. Work is split across ``threads`` in contiguous index blocks; each
    candidate's value is independent of the split.
    """
    n = len(cands)
    if n == 0:
        raise ValueError("no candidates")

    def block(sl):
        lp = log_unnorm_posterior(cands.alpha[sl], cands.sigma2[sl], dataset, prior, series,
                                  on_nonconvergence="nan")
        with np.errstate(invalid="ignore"):
            out = np.asarray(lp) - cands.log_q[sl]
        return np.where(np.isfinite(out), out, -np.inf)

    threads = max(1, int(threads))
    if threads == 1 or n < 2 * threads:
        log_w = block(slice(0, n))
    else:
        edges = np.linspace(0, n, threads + 1).astype(int)
        slices = [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]
        with ThreadPoolExecutor(threads) as ex:
            log_w = np.concatenate(list(ex.map(block, slices)))
    if raise_on_degenerate and not np.isfinite(log_w).any():
        raise DegenerateWeightsError("all candidate weights are zero")
    return log_w


def normalize_weights(log_w) -> np.ndarray:
    """w*_i = exp(log w_i - M) / sum_j exp(log w_j - M) with M the max log weight.

    The denominator is a correctly rounded sum, so the result does not depend
    on summation order (or thread layout) at all.
    """
    log_w = np.asarray(log_w, dtype=float)
    fin = np.isfinite(log_w)
    if not fin.any():
        raise DegenerateWeightsError("no finite log weights to normalize")
    m = log_w[fin].max()
    e = np.exp(np.where(fin, log_w - m, -np.inf))
    return e / math.fsum(e)


def draw_candidates(cfg: SirConfig, prior: PriorSpec, dataset: Dataset,
                    series: SeriesConfig = DEFAULT_SERIES, threads: int = 1):
    """Draw ``cfg.n_c`` candidates; returns (Candidates, pilot info dict)."""
    spec = cfg.proposal
    info = {"pilot_rounds": 0, "pilot_converged": None, "pilot_alpha_mean": None}
    if spec.kind == "Prior":
        q = _PriorProposal(prior)
    elif spec.kind == "UniformBox":
        q = _BoxProposal(spec.box)
    else:
        q, info = _adapt(cfg, prior, dataset, series, threads)
    cands = q.draw(_rng.stream(cfg.seed, _rng.CANDIDATES), cfg.n_c)
    return cands, info


def resample(cands: Candidates, weights, n_s: int, seed: int) -> PosteriorSampleSet:
    """Multinomial resampling: ``n_s`` draws with replacement proportional to ``weights``."""
    w = np.asarray(weights, dtype=float)
    if n_s < 1:
        raise ValueError("n_s must be >= 1")
    idx = _rng.stream(seed, _rng.RESAMPLE).choice(w.size, size=n_s, replace=True, p=w)
    diag = SirDiagnostics(
        unique_fraction=np.unique(idx).size / n_s,
        ess=_ess(w),
        max_weight=float(w.max()),
        n_finite_weights=int(np.count_nonzero(w > 0)),
        n_candidates=int(w.size),
        proposal="",
    )
    return PosteriorSampleSet(cands.alpha[idx], cands.sigma2[idx], idx, diag)


def run_sir(dataset: Dataset, prior: PriorSpec = PriorSpec(), cfg: SirConfig = SirConfig(),
            series: SeriesConfig = DEFAULT_SERIES, threads: int = 1) -> PosteriorSampleSet:
    cands, info = draw_candidates(cfg, prior, dataset, series, threads)
    log_w = compute_log_weights(cands, dataset, prior, series, threads, raise_on_degenerate=False)
    n_fin = int(np.isfinite(log_w).sum())
    if n_fin == 0:
        diag = SirDiagnostics(0.0, 0.0, 0.0, 0, len(cands), cfg.proposal.kind, **info)
        raise DegenerateWeightsError("all candidate weights are zero", diag)
    w = normalize_weights(log_w)
    out = resample(cands, w, cfg.n_s, cfg.seed)
    out.diagnostics.n_finite_weights = n_fin
    out.diagnostics.proposal = cfg.proposal.kind
    for k, v in info.items():
        setattr(out.diagnostics, k, v)
    out.candidates = cands
    out.weights = w
    return out


# -- files -------------------------------------------------------------------

def write_samples(samples: PosteriorSampleSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["alpha", "sigma2"])
        for a, s2 in zip(samples.alpha, samples.sigma2):
            wr.writerow([format(a, ".17g"), format(s2, ".17g")])


def read_samples(path) -> PosteriorSampleSet:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["alpha", "sigma2"]:
        raise ValueError(f"{path}: expected header 'alpha,sigma2'")
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValueError(f"{path}: no posterior samples")
    try:
        arr = np.array([[float(v) for v in r] for r in body])
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from None
    if arr.shape[1] != 2:
        raise ValueError(f"{path}: expected 2 columns")
    return PosteriorSampleSet(arr[:, 0], arr[:, 1], None)


def write_diagnostics(diag: SirDiagnostics, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(diag.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
