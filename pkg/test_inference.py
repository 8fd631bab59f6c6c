#!/usr/bin/env python3
"""
Tests for marginals, mixture queries and the checkpoint-backed predictor.
"""
import sys

import numpy as np
import pytest
from scipy.integrate import quad

from rlstate.errors import InvalidInputError
from rlstate.inference import (GameStatePredictor, ScalarMixture, StatePredictor, bernoulli_mean, continuous_means,
                               marginal_cdf, marginal_continuous, marginal_score_diff, mixture_cdf, mixture_interval,
                               mixture_mean, mixture_mode, mixture_pdf, mixture_quantile, percentile_of, sample,
                               state_summary, summarize, title_probability)
from rlstate.decision_model import LogisticWeights, feature_width
from rlstate.features import encode_events
from rlstate.mdn import MixtureParams, forward

STANDARD = ScalarMixture([1.0], [0.0], [1.0])


def _mix(weights, mu, sigma, p=None) -> MixtureParams:
    weights = np.asarray(weights, dtype=float)
    k = len(weights)
    return MixtureParams(weights=weights, mu=np.asarray(mu, dtype=float), sigma=np.asarray(sigma, dtype=float),
                         p=np.full((k, 3), 0.5) if p is None else np.asarray(p, dtype=float))


def test_marginal_continuous_picks_dimension():
    mix = _mix([0.4, 0.6], [[1, 2, 3], [4, 5, 6]], [[1, 1, 1], [2, 2, 2]])
    m = marginal_continuous(mix, "score_for")
    assert m.weights.tolist() == [0.4, 0.6]
    assert m.means.tolist() == [2.0, 5.0]
    assert marginal_continuous(mix, 0).means.tolist() == [1.0, 4.0]
    with pytest.raises(InvalidInputError):
        marginal_continuous(mix, "penalties")


def test_score_diff_single_component():
    m = marginal_score_diff(_mix([1.0], [[0, 20, 10]], [[1, 3, 4]]))
    assert m.means.tolist() == [10.0]
    assert m.stds.tolist() == pytest.approx([5.0])


def test_score_diff_antisymmetry_and_symmetry():
    mix = _mix([0.5, 0.5], [[0, 14, 6], [0, 6, 14]], [[1, 2, 3], [1, 3, 2]])
    assert mixture_mean(marginal_score_diff(mix)) == pytest.approx(0.0)
    swapped = _mix([0.5, 0.5], [[0, 6, 14], [0, 14, 6]], [[1, 3, 2], [1, 2, 3]])
    assert sorted(marginal_score_diff(swapped).means) == sorted(-marginal_score_diff(mix).means)


def test_continuous_means_match_marginal_means():
    mix = _mix([0.25, 0.75], [[2, 10, 6], [6, 18, 14]], [[1, 2, 3], [2, 3, 4]])
    assert continuous_means(mix).tolist() == pytest.approx([5.0, 16.0, 12.0])
    batched = MixtureParams(weights=np.stack([mix.weights] * 2), mu=np.stack([mix.mu] * 2),
                            sigma=np.stack([mix.sigma] * 2), p=np.stack([mix.p] * 2))
    means = continuous_means(batched)
    assert means.shape == (2, 3)
    for d, name in enumerate(("meters", "score_for", "score_against")):
        assert means[1, d] == pytest.approx(mixture_mean(marginal_continuous(mix, name)))


def test_bernoulli_mean():
    p = np.tile(np.array([0.1, 0.2, 0.3, 0.4, 0.5])[:, None], (1, 3))
    assert bernoulli_mean(_mix([0.2] * 5, np.zeros((5, 3)), np.ones((5, 3)), p), "try_set") == pytest.approx(0.3)
    assert bernoulli_mean(_mix([0.3, 0.7], np.zeros((2, 3)), np.ones((2, 3)), np.full((2, 3), 0.42)),
                          "win") == pytest.approx(0.42)


def test_bernoulli_mean_matches_sampling():
    rng = np.random.default_rng(3)
    mix = _mix([0.25, 0.75], np.zeros((2, 3)), np.ones((2, 3)), [[0.1, 0.2, 0.3], [0.6, 0.5, 0.4]])
    n = 100_000
    components = rng.choice(2, size=n, p=mix.weights)
    draws = rng.uniform(size=n) < mix.p[components, 0]
    expected = bernoulli_mean(mix, "try_tackle")
    assert abs(draws.mean() - expected) < 3 * np.sqrt(expected * (1 - expected) / n)


def test_cdf_and_limits():
    assert mixture_cdf(STANDARD, 0.0) == 0.5
    assert mixture_cdf(STANDARD, -1e6) == pytest.approx(0.0)
    assert mixture_cdf(STANDARD, 1e6) == pytest.approx(1.0)
    assert percentile_of(ScalarMixture([1.0], [7.0], [2.0]), 7.0) == 0.5


def test_cdf_matches_empirical_samples():
    m = ScalarMixture([0.3, 0.7], [-2.0, 3.0], [1.0, 0.5])
    draws = np.sort(sample(m, np.random.default_rng(4), 1_000_000))
    grid = np.linspace(-5, 5, 101)
    empirical = np.searchsorted(draws, grid) / len(draws)
    assert np.max(np.abs(empirical - mixture_cdf(m, grid))) < 0.005


def test_quantiles():
    assert mixture_quantile(STANDARD, 0.5) == pytest.approx(0.0, abs=1e-9)
    assert mixture_quantile(STANDARD, 0.9) == pytest.approx(1.281552, abs=1e-6)
    m = ScalarMixture([0.2, 0.5, 0.3], [-4.0, 1.0, 9.0], [1.0, 2.0, 0.5])
    for v in np.random.default_rng(5).uniform(-6, 10, size=20):
        assert mixture_quantile(m, mixture_cdf(m, v)) == pytest.approx(v, abs=1e-6)
    with pytest.raises(InvalidInputError):
        mixture_quantile(m, 1.0)


def test_interval_ordering():
    q10, q50, q90 = mixture_interval(ScalarMixture([0.5, 0.5], [-3.0, 4.0], [1.0, 2.0]))
    assert q10 <= q50 <= q90


def test_marginal_density_integrates_to_one(small_model, small_league):
    mix = forward(encode_events(small_league[:5], small_model.config), small_model)
    for i in range(5):
        for dim in ("meters", "score_for", "score_against"):
            m = marginal_continuous(mix.row(i), dim)
            lo, hi = m.bracket
            mass, _ = quad(lambda v: mixture_pdf(m, v), lo, hi, limit=200)
            assert mass == pytest.approx(1.0, abs=1e-3)


def test_marginal_cdf_is_batched(small_model, small_league):
    events = small_league[:10]
    mix = forward(encode_events(events, small_model.config), small_model)
    observed = np.array([e.meters_gained for e in events])
    batched = marginal_cdf(mix, "meters", observed)
    for i in range(10):
        assert batched[i] == pytest.approx(mixture_cdf(marginal_continuous(mix.row(i), "meters"), observed[i]))


def test_mean_sample_and_degenerate_component():
    m = ScalarMixture([0.5, 0.5], [-1.0, 1.0], [0.5, 0.5])
    assert mixture_mean(m) == 0.0
    n = 1_000_000
    draws = sample(m, np.random.default_rng(6), n)
    assert abs(draws.mean()) < 4 * draws.std() / np.sqrt(n)
    narrow = sample(ScalarMixture([1.0], [12.0], [1e-3]), np.random.default_rng(7), 1000)
    assert np.all(np.abs(narrow - 12.0) < 0.01)


def test_mode_differs_from_mean_for_bimodal_mixture():
    m = ScalarMixture([0.7, 0.3], [0.0, 20.0], [1.0, 1.0])
    assert mixture_mode(m) == pytest.approx(0.0, abs=0.1)
    assert mixture_mean(m) == pytest.approx(6.0)


def test_title_probability():
    assert title_probability(ScalarMixture([1.0], [27.0], [5.0]), 27.0) == pytest.approx(0.5)


def test_scalar_mixture_validation():
    with pytest.raises(InvalidInputError):
        ScalarMixture([0.5, 0.4], [0.0, 1.0], [1.0, 1.0])
    with pytest.raises(InvalidInputError):
        ScalarMixture([1.0], [0.0], [0.0])


def test_state_summary_payload():
    mix = _mix([1.0], [[5.0, 20.0, 10.0]], [[2.0, 3.0, 4.0]], [[0.1, 0.3, 0.8]])
    summary = state_summary(mix, np.array([0.2, 0.3, 0.5]))
    assert summary.score_diff.mean == pytest.approx(10.0)
    assert summary.meters.q50 == pytest.approx(5.0, abs=1e-6)
    assert summary.ex_try_set == pytest.approx(0.3)
    assert summary.play_selection == {"run": 0.2, "offensive_kick": 0.3, "defensive_kick": 0.5}
    assert summarize(STANDARD).q90 == pytest.approx(1.281552, abs=1e-6)


def test_predictor_adds_play_selection_only_on_last_tackle(small_model, make_event):
    predictor = GameStatePredictor(small_model, LogisticWeights.zeros(feature_width(small_model.config)))
    assert isinstance(predictor, StatePredictor)
    assert predictor.predict(make_event(tackle_number=3)).play_selection is None
    last = predictor.predict(make_event(tackle_number=6, last_tackle_play="offensive_kick"))
    assert last.play_selection == pytest.approx({"run": 1 / 3, "offensive_kick": 1 / 3, "defensive_kick": 1 / 3})


def test_predictor_without_play_model(small_model, make_event):
    predictor = GameStatePredictor(small_model)
    assert predictor.predict(make_event(tackle_number=6)).play_selection is None
    with pytest.raises(InvalidInputError):
        predictor.play_probabilities([make_event(tackle_number=6)])


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
