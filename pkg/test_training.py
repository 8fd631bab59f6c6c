#!/usr/bin/env python3
"""
Tests for splitting, the training loop and the evaluation report.
"""
import sys

import numpy as np
import pytest

from conftest import SMALL_ARCH
from rlstate.errors import InvalidInputError
from rlstate.features import build_vocab, encode_events
from rlstate.inference import GameStatePredictor, bernoulli_mean, continuous_means
from rlstate.mdn import batch_loss, forward, init_model, mean_nll
from rlstate.models import LeagueSpec, TeamStrength, TrainConfig
from rlstate.synthdata import SetValueModel, simulate_league
from rlstate.training import (calibration_table, evaluate, expected_calibration_error, head_metrics,
                              history_frame, split_dataset, train, train_models)


def _quick_config(**overrides) -> TrainConfig:
    values = {"epochs": 3, "batch_size": 128, "learning_rate": 1e-2, "architecture": SMALL_ARCH, "seed": 5}
    values.update(overrides)
    return TrainConfig(**values)


def test_split_is_by_match(make_event):
    events = [make_event(match_id=f"m{i}", tackle_number=t) for i in range(10) for t in range(1, 4)]
    train_events, test_events = split_dataset(events, 0.8, seed=1)
    train_ids = {e.match_id for e in train_events}
    test_ids = {e.match_id for e in test_events}
    assert (len(train_ids), len(test_ids)) == (8, 2)
    assert not train_ids & test_ids
    assert len(train_events) + len(test_events) == len(events)

    again, _ = split_dataset(events, 0.8, seed=1)
    assert [e.match_id for e in again] == [e.match_id for e in train_events]


def test_split_rejects_bad_input(make_event):
    with pytest.raises(InvalidInputError):
        split_dataset([make_event()], 0.8, seed=1)
    with pytest.raises(InvalidInputError):
        split_dataset([make_event(match_id="a"), make_event(match_id="b")], 1.0, seed=1)


def test_training_lowers_nll(small_league):
    result = train(small_league, _quick_config())
    first, last = result.history[0], result.history[-1]
    assert first.epoch == 0
    assert last.train_nll < first.train_nll
    assert min(r.val_nll for r in result.history) == pytest.approx(last.best_val_nll)
    assert list(history_frame(result.history).columns) == ["epoch", "train_nll", "val_nll"]


def test_zero_learning_rate_leaves_parameters(small_league):
    config = _quick_config(learning_rate=0.0)
    result = train(small_league, config)
    initial = init_model(SMALL_ARCH, build_vocab(small_league), config.seed)
    for name, p in initial.params.items():
        assert np.array_equal(result.model.params[name].values, p.values)
    assert len({round(r.train_nll, 12) for r in result.history}) == 1


def test_single_example_overfits(make_event):
    event = make_event(tackle_number=2, meters_gained=9.0)
    config = _quick_config(epochs=300, learning_rate=1e-2, patience=300)
    result = train([event], config)
    assert result.history[-1].train_nll < result.history[0].train_nll - 3.0


def test_constant_half_predictor_brier():
    outcomes = np.array([0, 1] * 50)
    metrics = head_metrics(np.full(100, 0.5), outcomes)
    assert metrics.brier == pytest.approx(0.25)
    assert metrics.calibration_error == pytest.approx(0.0)
    assert [b.count for b in metrics.calibration if b.count] == [100]


def test_calibration_table_bins():
    probs = np.array([0.05, 0.15, 0.15, 1.0])
    table = calibration_table(probs, np.array([0, 1, 0, 1]), n_bins=10)
    assert len(table) == 10
    assert table[1].count == 2 and table[1].empirical_rate == 0.5
    assert table[9].count == 1 and table[9].mean_predicted == 1.0
    assert table[5].mean_predicted is None
    assert expected_calibration_error(table) == pytest.approx((0.05 + 2 * 0.35 + 0.0) / 4)


def test_oracle_probabilities_are_calibrated():
    rng = np.random.default_rng(9)
    probs = rng.uniform(size=20_000)
    outcomes = rng.uniform(size=20_000) < probs
    for b in calibration_table(probs, outcomes):
        assert abs(b.mean_predicted - b.empirical_rate) <= 0.05


def test_evaluate_report_matches_batch_loss(small_model, small_league):
    events = small_league[:300]
    report = evaluate(small_model, events)
    batch = encode_events(events, small_model.config)
    assert report.n_events == 300
    assert report.test_nll == pytest.approx(float(batch_loss(batch, small_model).value), abs=1e-12)
    assert set(report.heads) == {"try_tackle", "try_set", "win"}
    assert report.test_nll == pytest.approx(mean_nll(batch, small_model), abs=1e-12)
    means = continuous_means(forward(batch, small_model))
    y = batch.continuous_targets
    assert report.rmse_meters == pytest.approx(float(np.sqrt(np.mean((means[:, 0] - y[:, 0]) ** 2))))
    assert report.rmse_meters > 0


def test_train_models_is_reproducible(small_league):
    config = _quick_config(epochs=2)
    a = train_models(small_league, config)
    b = train_models(small_league, config)
    for name, p in a.checkpoint.params.items():
        assert np.array_equal(p.values, b.checkpoint.params[name].values)
    assert np.array_equal(a.checkpoint.logistic.weights, b.checkpoint.logistic.weights)
    assert a.checkpoint.metadata["seed"] == 5
    assert a.checkpoint.metadata["n_train_events"] + a.checkpoint.metadata["n_test_events"] == len(small_league)
    assert a.report.test_nll == b.report.test_nll


@pytest.mark.slow
def test_training_penalizes_a_win_with_fewer_points():
    train_events = simulate_league(LeagueSpec(n_teams=4, games_per_team=12, seed=31))
    held_out = simulate_league(LeagueSpec(n_teams=4, games_per_team=6, seed=32))
    model = train(train_events, _quick_config(epochs=10)).model

    lost = [e for e in held_out if e.final_score_for < e.final_score_against]
    batch = encode_events(lost, model.config)
    inconsistent = encode_events(lost, model.config)
    inconsistent.binary_targets[:, 2] = 1.0
    assert mean_nll(inconsistent, model) > mean_nll(batch, model)


@pytest.mark.slow
def test_trained_model_recovers_generator_try_probabilities():
    rng = np.random.default_rng(2018)
    teams = [TeamStrength(offense=float(o), defense=float(d))
             for o, d in zip(rng.normal(0, 0.3, 16), rng.normal(0, 0.3, 16))]
    spec = LeagueSpec(n_teams=16, games_per_team=24, teams=teams, seed=2018)
    events = simulate_league(spec)
    config = TrainConfig(epochs=30, seed=2018)
    run = train_models(events, config)

    _, test_events = split_dataset(events, 1.0 - config.test_ratio, config.seed)
    # sets that full time may cut are outside the oracle's domain
    in_domain = [e for e in test_events if e.time_remaining > 6 * spec.seconds_per_tackle[1]]
    predicted = bernoulli_mean(GameStatePredictor.from_checkpoint(run.checkpoint).mixtures(in_domain), "try_set")
    _, truth = SetValueModel(spec).values(in_domain)
    assert float(np.mean(np.abs(predicted - truth))) <= 0.05
    assert run.report.heads["try_set"].calibration_error <= 0.05
    assert run.report.heads["win"].calibration_error <= 0.05


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
