import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.special import logit

from fracbayes import rng
from fracbayes.data import Dataset, GridSpec, simulate_dataset
from fracbayes.model import PriorSpec, log_likelihood
from fracbayes.series import SeriesConfig, evaluate_pressure
from fracbayes.sir import (
    Box,
    Candidates,
    DegeneratePilotError,
    DegenerateWeightsError,
    PosteriorSampleSet,
    ProposalSpec,
    SirConfig,
    _LogitNormalProposal,
    compute_log_weights,
    draw_candidates,
    normalize_weights,
    read_samples,
    resample,
    run_sir,
    write_diagnostics,
    write_samples,
)

PRIOR_PROPOSAL = ProposalSpec(kind="Prior")


# -- configuration -----------------------------------------------------------

def test_box_validation():
    with pytest.raises(ValueError):
        ProposalSpec(kind="UniformBox", box=Box(0.5, 0.9, 0.1, 0.1))
    with pytest.raises(ValueError):
        ProposalSpec(kind="UniformBox")
    with pytest.raises(ValueError):
        ProposalSpec(kind="Prior", box=Box(0.5, 0.9, 0.0, 0.1))
    assert ProposalSpec(kind="UniformBox", box={"alpha_lo": 0.5, "alpha_hi": 0.9,
                                                "sigma2_lo": 0, "sigma2_hi": 0.1}).box.alpha_hi == 0.9


@pytest.mark.parametrize("kw", [dict(pilot_size=99), dict(inflation=0.5), dict(kind="Gibbs")])
def test_proposal_validation(kw):
    with pytest.raises(ValueError):
        ProposalSpec(**kw)


@pytest.mark.parametrize("kw", [dict(n_c=10, n_s=11), dict(n_c=0, n_s=0), dict(n_s=0)])
def test_sir_config_validation(kw):
    with pytest.raises(ValueError):
        SirConfig(**kw)


# -- candidates --------------------------------------------------------------

def test_prior_proposal_uniform_moments(example_data):
    cfg = SirConfig(n_c=10000, n_s=10, seed=4, proposal=PRIOR_PROPOSAL)
    cands, _ = draw_candidates(cfg, PriorSpec(1, 1, 2), example_data)
    assert len(cands) == 10000
    assert abs(cands.alpha.mean() - 0.5) < 3 / math.sqrt(12 * 10000)
    # the chi-square(2) marginal has mean 2 and sd 2
    assert abs(cands.sigma2.mean() - 2) < 3 * 2 / 100


def test_box_proposal_stays_in_box(example_data):
    box = Box(0.7, 0.9, 0.005, 0.02)
    cfg = SirConfig(n_c=2000, n_s=100, proposal=ProposalSpec(kind="UniformBox", box=box))
    cands, _ = draw_candidates(cfg, PriorSpec(), example_data)
    assert cands.alpha.min() >= 0.7 and cands.alpha.max() <= 0.9
    assert cands.sigma2.min() >= 0.005 and cands.sigma2.max() <= 0.02
    np.testing.assert_allclose(cands.log_q, -math.log(0.2 * 0.015))


def test_pilot_mean_near_truth(example_data):
    _, info = draw_candidates(SirConfig(seed=1), PriorSpec(), example_data)
    assert 0.7 < info["pilot_alpha_mean"] < 0.9
    assert info["pilot_converged"]


def test_logit_normal_density_against_scipy():
    mean = np.array([1.2, -4.0])
    cov = np.array([[0.04, 0.01], [0.01, 0.09]])
    q = _LogitNormalProposal(mean, cov)
    c = q.draw(rng.stream(3, rng.CANDIDATES), 200)
    u = np.column_stack([logit(c.alpha), np.log(c.sigma2)])
    ref = (stats.multivariate_normal(mean, cov).logpdf(u)
           - np.log(c.alpha) - np.log(1 - c.alpha) - np.log(c.sigma2))
    np.testing.assert_allclose(c.log_q, ref, rtol=0, atol=1e-10)


def test_degenerate_pilot():
    # a prior piled near alpha = 0 with a short series: no pilot draw converges
    d = simulate_dataset(GridSpec(n_x=3, n_t=3), 0.8, 0.1, 0)
    with pytest.raises(DegeneratePilotError, match="UniformBox"):
        run_sir(d, PriorSpec(1, 50, 1), SirConfig(n_c=200, n_s=10),
                series=SeriesConfig(k_min=20, k_max=30))


# -- weights -----------------------------------------------------------------

def test_prior_proposal_weights_are_likelihood(example_data):
    prior = PriorSpec()
    cands, _ = draw_candidates(SirConfig(n_c=50, n_s=5, proposal=PRIOR_PROPOSAL), prior, example_data)
    lw = compute_log_weights(cands, example_data, prior)
    ll = log_likelihood(cands.alpha, cands.sigma2, example_data)
    fin = np.isfinite(lw)
    assert fin.sum() > 40
    d_w = lw[fin] - lw[fin][0]
    d_l = ll[fin] - ll[fin][0]
    np.testing.assert_allclose(d_w, d_l, rtol=1e-10, atol=1e-6)


def brute_log_weight(a, s2, log_q, d: Dataset, prior: PriorSpec):
    s = math.sqrt(s2)
    ll = sum(stats.lognorm.logpdf(p, s=s, scale=evaluate_pressure(x, t, a)) for x, t, p in d.observations)
    kernel = ((prior.alpha_star - 1) * math.log(a) + (prior.beta_star - 1) * math.log1p(-a)
              + (prior.df / 2 - 1) * math.log(s2) - s2 / 2)
    return ll + kernel - log_q


def test_weights_match_brute_force_oracle():
    d = simulate_dataset(GridSpec(n_x=6, n_t=4), 0.6, 0.2, 8)
    prior = PriorSpec(2, 5, 3)
    q = _LogitNormalProposal([0.3, -3.0], [[0.3, 0.0], [0.0, 0.5]])
    c = q.draw(rng.stream(12, rng.CANDIDATES), 25)
    lw = compute_log_weights(c, d, prior)
    ref = [brute_log_weight(a, s2, lq, d, prior) for a, s2, lq in zip(c.alpha, c.sigma2, c.log_q)]
    np.testing.assert_allclose(lw, ref, rtol=0, atol=1e-10 * max(1, np.abs(ref).max()))


def test_out_of_support_is_minus_inf(example_data):
    c = Candidates(np.array([0.8, 1.5, 0.8]), np.array([0.01, 0.01, -1.0]), np.zeros(3))
    lw = compute_log_weights(c, example_data, PriorSpec())
    assert np.isfinite(lw[0]) and lw[1] == -np.inf and lw[2] == -np.inf


def test_all_out_of_support_raises(example_data):
    c = Candidates(np.array([1.5]), np.array([0.01]), np.zeros(1))
    with pytest.raises(DegenerateWeightsError):
        compute_log_weights(c, example_data, PriorSpec())


def test_single_candidate_weight_one(example_data):
    c = Candidates(np.array([0.8]), np.array([0.01]), np.zeros(1))
    assert normalize_weights(compute_log_weights(c, example_data, PriorSpec())).tolist() == [1.0]


def test_weights_independent_of_thread_count(example_data):
    cands, _ = draw_candidates(SirConfig(n_c=1003, n_s=5, seed=2), PriorSpec(), example_data)
    one = compute_log_weights(cands, example_data, PriorSpec(), threads=1)
    four = compute_log_weights(cands, example_data, PriorSpec(), threads=4)
    assert one.tobytes() == four.tobytes()


# -- normalization -----------------------------------------------------------

def test_equal_weights():
    assert np.all(normalize_weights(np.full(8, -3.7)) == 1 / 8)


def test_zero_and_minus_inf():
    assert normalize_weights([0.0, -np.inf]).tolist() == [1.0, 0.0]


def test_no_finite_weights():
    with pytest.raises(DegenerateWeightsError):
        normalize_weights([-np.inf, -np.inf])


def test_shift_by_1000():
    lw = np.array([-2.0, 0.0, -0.5, -40.0, -np.inf])
    np.testing.assert_allclose(normalize_weights(lw + 1000), normalize_weights(lw), rtol=0, atol=1e-15)


log_weight_lists = st.lists(st.floats(-700, 700), min_size=1, max_size=50)


@settings(max_examples=200, deadline=None)
@given(log_weight_lists)
def test_normalized_weights_sum_to_one(lw):
    w = normalize_weights(lw)
    assert abs(w.sum() - 1) <= 1e-12
    assert np.all((w >= 0) & (w <= 1))


# Shift invariance is exact only when adding the shift is itself exact in
# floating point, so draw log weights on a 2^-20 lattice and integer shifts.
lattice = st.integers(-2**29, 2**29).map(lambda k: k / 2**20)


@settings(max_examples=200, deadline=None)
@given(st.lists(lattice, min_size=1, max_size=50), st.integers(-10**6, 10**6))
def test_log_sum_exp_shift_invariance(lw, c):
    lw = np.array(lw)
    assert np.all((lw + c) - c == lw)
    np.testing.assert_allclose(normalize_weights(lw + c), normalize_weights(lw), rtol=0, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=40))
def test_ess_bounds(lw):
    w = normalize_weights(lw)
    c = Candidates(np.arange(len(lw), dtype=float), np.ones(len(lw)), np.zeros(len(lw)))
    ess = resample(c, w, 5, 0).diagnostics.ess
    assert 0 < ess <= len(lw) * (1 + 1e-12)


def test_ess_equals_n_iff_equal():
    c = Candidates(np.arange(4.0), np.ones(4), np.zeros(4))
    assert resample(c, np.full(4, 0.25), 3, 0).diagnostics.ess == pytest.approx(4, rel=1e-15)
    assert resample(c, [0.25, 0.25, 0.3, 0.2], 3, 0).diagnostics.ess < 4 - 1e-3


# -- resampling --------------------------------------------------------------

def test_single_candidate_resample():
    c = Candidates(np.array([0.5]), np.array([0.1]), np.zeros(1))
    out = resample(c, [1.0], 50, 1)
    assert np.all(out.alpha == 0.5) and len(out) == 50
    assert out.diagnostics.unique_fraction == 1 / 50


def test_equal_weight_occupancy():
    n_c, n_s = 10000, 1000
    expected = n_c * (1 - (1 - 1 / n_c) ** n_s) / n_s
    assert expected == pytest.approx(0.9516, abs=1e-4)
    c = Candidates(np.linspace(0.01, 0.99, n_c), np.ones(n_c), np.zeros(n_c))
    w = np.full(n_c, 1 / n_c)
    for seed in range(10):
        assert abs(resample(c, w, n_s, seed).diagnostics.unique_fraction - expected) < 0.02


def test_two_candidate_frequencies():
    w = normalize_weights([0.0, math.log(3)])
    assert w[1] == pytest.approx(0.75, rel=1e-15)
    c = Candidates(np.array([0.2, 0.7]), np.ones(2), np.zeros(2))
    n = 10**5
    freq = np.mean(resample(c, w, n, 5).index == 1)
    assert abs(freq - 0.75) < 3 * math.sqrt(0.75 * 0.25 / n)


def test_resampling_unbiased(example_fit):
    c, w = example_fit.candidates, example_fit.weights
    m_w = w @ c.alpha
    sd = math.sqrt(w @ (c.alpha - m_w) ** 2)
    assert abs(example_fit.alpha.mean() - m_w) < 3 * sd / math.sqrt(len(example_fit))


def test_samples_are_candidates(example_fit):
    c = example_fit.candidates
    assert len(example_fit) == 1000
    assert np.array_equal(example_fit.alpha, c.alpha[example_fit.index])
    assert np.array_equal(example_fit.sigma2, c.sigma2[example_fit.index])
    pairs = set(zip(c.alpha.tolist(), c.sigma2.tolist()))
    assert all(p in pairs for p in zip(example_fit.alpha.tolist(), example_fit.sigma2.tolist()))


def test_diagnostics_consistent(example_fit):
    d = example_fit.diagnostics
    assert d.unique_fraction == np.unique(example_fit.index).size / 1000
    assert d.ess == pytest.approx(1 / np.sum(example_fit.weights ** 2), rel=1e-12)
    assert 0 < d.max_weight <= 1
    assert d.n_candidates == 10000 and d.proposal == "AdaptivePilot"


# -- end to end ---------------------------------------------------------------

def test_run_sir_deterministic(example_data, example_fit):
    again = run_sir(example_data, PriorSpec(), SirConfig(seed=11))
    assert again.alpha.tobytes() == example_fit.alpha.tobytes()
    assert again.sigma2.tobytes() == example_fit.sigma2.tobytes()
    assert again.diagnostics == example_fit.diagnostics


def test_run_sir_thread_count_irrelevant(example_data):
    cfg = SirConfig(n_c=3000, n_s=300, seed=21)
    a = run_sir(example_data, PriorSpec(), cfg, threads=1)
    b = run_sir(example_data, PriorSpec(), cfg, threads=3)
    assert a.alpha.tobytes() == b.alpha.tobytes()
    assert a.weights.tobytes() == b.weights.tobytes()


def test_other_proposals_run(example_data):
    box = Box(0.78, 0.86, 0.005, 0.02)
    out = run_sir(example_data, PriorSpec(),
                  SirConfig(n_c=4000, n_s=400, proposal=ProposalSpec(kind="UniformBox", box=box)))
    assert 0.8 < np.median(out.alpha) < 0.84
    # the prior proposal works but collapses onto a few candidates
    out = run_sir(example_data, PriorSpec(), SirConfig(n_c=4000, n_s=400, proposal=PRIOR_PROPOSAL))
    assert out.diagnostics.unique_fraction < 0.1


# -- files -------------------------------------------------------------------

def test_sample_file_round_trip(tmp_path, example_fit):
    path = tmp_path / "s.csv"
    write_samples(example_fit, path)
    back = read_samples(path)
    assert back.alpha.tobytes() == example_fit.alpha.tobytes()
    assert back.sigma2.tobytes() == example_fit.sigma2.tobytes()
    assert path.read_text().startswith("alpha,sigma2\n")


def test_empty_sample_file(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("alpha,sigma2\n")
    with pytest.raises(ValueError, match="no posterior samples"):
        read_samples(path)


def test_diagnostics_json(tmp_path, example_fit):
    path = tmp_path / "d.json"
    write_diagnostics(example_fit.diagnostics, path)
    data = json.loads(path.read_text())
    for key in ("unique_fraction", "ess", "max_weight", "n_finite_weights"):
        assert key in data
    assert isinstance(PosteriorSampleSet(np.ones(2), np.ones(2), None).sigma, np.ndarray)
