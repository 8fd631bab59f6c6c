#!/usr/bin/env python3
"""
Tests for the last-tackle play-selection model.
"""
import sys

import numpy as np
import pytest

from conftest import event_dict
from rlstate.decision_model import (LogisticWeights, feature_width, flatten_features, predict_play,
                                    train_logistic)
from rlstate.errors import InvalidInputError, ShapeError
from rlstate.features import encode_event, encode_events
from rlstate.models import PLAY_CLASSES, EncodingConfig, LeagueSpec, LogisticConfig, TackleEvent, TeamStrength
from rlstate.synthdata import policy_probabilities

CONFIG = EncodingConfig(n_seasons=1, n_teams=4)


def _decision(pos_x: float, play: str, team: int = 0, points_for: int = 0, points_against: int = 0,
              time_remaining: float = 2400.0, match_id: str = "m") -> TackleEvent:
    return TackleEvent(**event_dict(
        match_id=match_id, team_idx=team, opponent_idx=(team + 1) % 4, tackle_number=6, pos_x=pos_x,
        last_tackle_play=play, points_for=points_for, points_against=points_against,
        score_diff=points_for - points_against, time_remaining=time_remaining,
        final_score_for=points_for + 10, final_score_against=points_against + 4,
        possessing_team_won=points_for + 10 > points_against + 4,
    ))


def test_feature_width(make_event):
    assert feature_width(CONFIG) == 2 * 5 + 7 + 4
    assert flatten_features(encode_event(make_event(), CONFIG)).shape == (1, 21)
    assert flatten_features(encode_events([make_event()] * 3, CONFIG)).shape == (3, 21)


def test_zero_weights_are_uniform(make_event):
    probs = predict_play(encode_event(make_event(tackle_number=6), CONFIG), LogisticWeights.zeros(21))
    assert probs.tolist() == pytest.approx([1 / 3] * 3)


def test_shift_invariance_and_normalization(make_event):
    rng = np.random.default_rng(0)
    w = LogisticWeights(weights=rng.normal(size=(3, 21)), bias=rng.normal(size=3))
    shifted = LogisticWeights(weights=w.weights, bias=w.bias + 7.5)
    batch = encode_events([make_event(pos_x=x) for x in (5.0, 50.0, 95.0)], CONFIG)
    probs = predict_play(batch, w)
    assert probs.shape == (3, 3)
    assert np.allclose(predict_play(batch, shifted), probs, atol=1e-12)
    assert probs.sum(axis=1) == pytest.approx(np.ones(3), abs=1e-12)


def test_width_mismatch_is_rejected(make_event):
    with pytest.raises(ShapeError):
        predict_play(encode_event(make_event(), CONFIG), LogisticWeights.zeros(20))


def test_training_needs_labels(make_event):
    with pytest.raises(InvalidInputError):
        train_logistic([make_event(tackle_number=2)], CONFIG)


def test_separable_data_reaches_low_loss():
    events = [_decision(float(x), "defensive_kick") for x in np.linspace(10, 30, 40)]
    events += [_decision(float(x), "run") for x in np.linspace(70, 90, 40)]
    weights = train_logistic(events, CONFIG, LogisticConfig(epochs=1500, learning_rate=0.1, l2=0.0))
    assert weights.train_loss < 0.1
    assert weights.test_loss is None


def test_label_independent_features_give_marginal_entropy():
    rng = np.random.default_rng(1)
    marginal = np.array([0.5, 0.3, 0.2])

    def draw(n):
        labels = rng.choice(3, size=n, p=marginal)
        return [_decision(float(rng.uniform(0, 99)), PLAY_CLASSES[k], team=int(rng.integers(4))) for k in labels]

    weights = train_logistic(draw(5000), CONFIG, test_events=draw(5000))
    entropy = float(-np.sum(marginal * np.log(marginal)))
    assert weights.test_loss == pytest.approx(entropy, abs=0.03)


def test_training_is_deterministic():
    events = [_decision(float(x), play) for x, play in zip(np.linspace(5, 95, 30), PLAY_CLASSES * 10)]
    a = train_logistic(events, CONFIG, LogisticConfig(epochs=50))
    b = train_logistic(events, CONFIG, LogisticConfig(epochs=50))
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.bias, b.bias)


def test_recovers_generator_policy():
    rng = np.random.default_rng(2)
    spec = LeagueSpec(n_teams=4, teams=[TeamStrength(run_bias=b) for b in (-1.0, 0.0, 0.5, 1.0)])

    def contexts(n):
        out = []
        for _ in range(n):
            team = int(rng.integers(4))
            pf, pa = int(rng.integers(0, 30)), int(rng.integers(0, 30))
            x, t = float(rng.uniform(0, 99)), float(rng.uniform(0, 4800))
            probs = policy_probabilities(spec, x, pf - pa, t, spec.teams[team].run_bias)
            play = PLAY_CLASSES[int(rng.choice(3, p=probs))]
            out.append(_decision(x, play, team, pf, pa, t))
        return out

    train_events, held_out = contexts(20_000), contexts(2_000)
    weights = train_logistic(train_events, CONFIG)
    predicted = predict_play(encode_events(held_out, CONFIG), weights)
    truth = np.array([policy_probabilities(spec, e.pos_x, e.score_diff, e.time_remaining,
                                           spec.teams[e.team_idx].run_bias) for e in held_out])
    assert float(np.mean(np.abs(predicted - truth))) <= 0.05


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
