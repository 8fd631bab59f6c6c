#!/usr/bin/env python3
"""
Tests for the synthetic league: scheduling, match simulation and the exact
ground-truth try probabilities.
"""
import sys
from collections import Counter

import numpy as np
import pytest

from rlstate.errors import InvalidInputError
from rlstate.models import GAME_SECONDS, KickModel, LeagueSpec, TeamStrength, TryModel
from rlstate.synthdata import (POINTS_PER_TEAM, SCORE_VARIANCE_FLOOR, SCORE_VARIANCE_PER_POINT, GroundTruthPredictor,
                               SetValueModel, ground_truth, policy_probabilities,
                               round_robin_rounds, season_schedule, simulate_league, simulate_match,
                               simulate_set, try_probability)


def test_default_schedule_size():
    spec = LeagueSpec()
    matches = [pair for pairs in season_schedule(spec) for pair in pairs]
    assert len(matches) == 192
    games = Counter(team for pair in matches for team in pair)
    assert set(games.values()) == {24}


def test_round_robin_meets_everyone_home_and_away():
    rounds = round_robin_rounds(6)
    assert len(rounds) == 10
    fixtures = Counter(pair for pairs in rounds for pair in pairs)
    assert len(fixtures) == 30
    assert set(fixtures.values()) == {1}
    for pairs in rounds:
        assert sorted(t for pair in pairs for t in pair) == list(range(6))


def test_two_team_league():
    events = simulate_league(LeagueSpec(n_teams=2, games_per_team=2, seed=3))
    assert len({e.match_id for e in events}) == 2
    assert {e.round for e in events} == {1, 2}


@pytest.mark.parametrize("n_teams", [3, 5])
def test_odd_team_count_is_rejected(n_teams):
    with pytest.raises(InvalidInputError):
        round_robin_rounds(n_teams)
    with pytest.raises(InvalidInputError):
        simulate_league(LeagueSpec(n_teams=n_teams, games_per_team=2))


def test_spec_rejects_wrong_team_list():
    with pytest.raises(ValueError):
        LeagueSpec(n_teams=4, teams=[TeamStrength()] * 3)


def test_simulation_is_deterministic_per_seed():
    spec = LeagueSpec(n_teams=2, games_per_team=1, seed=11)
    a = [e.model_dump() for e in simulate_league(spec)]
    b = [e.model_dump() for e in simulate_league(spec)]
    assert a == b
    c = [e.model_dump() for e in simulate_league(spec.model_copy(update={"seed": 12}))]
    assert a != c


def test_simulate_match_rejects_self_play():
    with pytest.raises(InvalidInputError):
        simulate_match(LeagueSpec(n_teams=2), 1, 1, np.random.default_rng(0))


def test_match_events_are_consistent(small_league):
    by_match = {}
    for e in small_league:
        by_match.setdefault(e.match_id, []).append(e)
    for events in by_match.values():
        times = [e.time_remaining for e in events]
        assert times == sorted(times, reverse=True)
        finals = {e.team_idx: e.final_score_for for e in events}
        for e in events:
            assert e.final_score_against == finals[e.opponent_idx]
        sets = {}
        for e in events:
            sets.setdefault(e.set_id, []).append(e)
        for tackles in sets.values():
            assert [t.tackle_number for t in tackles] == list(range(1, len(tackles) + 1))
            assert len({t.try_this_set for t in tackles}) == 1
            assert len({t.team_idx for t in tackles}) == 1
            assert sum(t.try_this_tackle for t in tackles) == int(tackles[-1].try_this_set)
            assert tackles[-1].try_this_tackle == tackles[-1].try_this_set


def test_no_tries_means_nil_all():
    spec = LeagueSpec(n_teams=2, games_per_team=2, seed=5, try_model=TryModel(intercept=-50.0),
                      kicks=KickModel(offensive_try_intercept=-50.0))
    events = simulate_league(spec)
    assert not any(e.try_this_set for e in events)
    assert all(e.final_score_for == e.final_score_against == 0 for e in events)
    assert not any(e.possessing_team_won for e in events)


def test_stronger_attack_scores_more():
    spec = LeagueSpec(n_teams=2, games_per_team=10, seed=9, teams=[TeamStrength(offense=1.0), TeamStrength()])
    tries = Counter(e.team_idx for e in simulate_league(spec) if e.try_this_tackle)
    assert tries[0] > tries[1]


# ================================
# Ground truth
# ================================

def test_last_tackle_set_value_equals_tackle_value(small_spec, make_event):
    truth = ground_truth(small_spec, make_event(tackle_number=6, pos_x=70.0))
    assert truth.ex_try_set == pytest.approx(truth.ex_try_tackle, abs=1e-15)
    assert sum(truth.play_probabilities) == pytest.approx(1.0)


def test_first_tackle_value_is_the_try_model(small_spec, make_event):
    event = make_event(tackle_number=2, pos_x=55.0)
    truth = ground_truth(small_spec, event)
    team, opponent = small_spec.teams[event.team_idx], small_spec.teams[event.opponent_idx]
    expected = try_probability(small_spec, 55.0, 2, team.offense, opponent.defense, opponent.redzone_defense)
    assert truth.ex_try_tackle == pytest.approx(float(expected))
    assert truth.ex_try_tackle < truth.ex_try_set < 1.0


def test_hopeless_attack_has_no_set_value(make_event):
    spec = LeagueSpec(n_teams=2, try_model=TryModel(intercept=-50.0), kicks=KickModel(offensive_try_intercept=-50.0))
    truth = ground_truth(spec, make_event(tackle_number=1, pos_x=90.0))
    assert truth.ex_try_set == pytest.approx(0.0, abs=1e-12)


def test_set_value_grows_toward_the_line(small_spec, make_event):
    _, ex_set = SetValueModel(small_spec).values([make_event(pos_x=x) for x in (10.0, 40.0, 70.0, 95.0)])
    assert np.all(np.diff(ex_set) > 0)


def test_neutral_values_ignore_team_identity(small_spec, make_event):
    model = SetValueModel(small_spec)
    events = [make_event(team_idx=0, opponent_idx=1), make_event(team_idx=2, opponent_idx=3)]
    _, own = model.values(events)
    _, neutral = model.values(events, neutral=True)
    assert own[0] > own[1]
    assert neutral[0] == pytest.approx(neutral[1])


def test_predictor_matches_ground_truth(small_spec, make_event):
    event = make_event(tackle_number=6, pos_x=80.0, last_tackle_play="offensive_kick")
    predictor = GroundTruthPredictor(small_spec)
    mix = predictor.mixtures([event])
    truth = ground_truth(small_spec, event)
    assert mix.p[0, 0, 1] == pytest.approx(truth.ex_try_set)
    assert predictor.play_probabilities([event])[0] == pytest.approx(np.array(truth.play_probabilities))
    team = small_spec.teams[event.team_idx]
    assert truth.play_probabilities == pytest.approx(
        tuple(policy_probabilities(small_spec, 80.0, event.score_diff, event.time_remaining, team.run_bias)))


def test_predictor_score_spread(small_spec, make_event):
    predictor = GroundTruthPredictor(small_spec)
    kickoff = make_event(time_remaining=GAME_SECONDS, points_for=0, points_against=0, score_diff=0)
    full_time = make_event(time_remaining=0.0)
    mix = predictor.mixtures([kickoff, full_time])
    assert mix.mu[0, 0, 1:] == pytest.approx([POINTS_PER_TEAM, POINTS_PER_TEAM])
    assert mix.sigma[0, 0, 1] == pytest.approx(np.sqrt(SCORE_VARIANCE_PER_POINT * POINTS_PER_TEAM
                                                       + SCORE_VARIANCE_FLOOR))
    assert mix.mu[1, 0, 1:] == pytest.approx([full_time.points_for, full_time.points_against])
    assert mix.sigma[1, 0, 1:] == pytest.approx([1.0, 1.0])


@pytest.mark.slow
@pytest.mark.parametrize("tackle,pos_x", [(1, 20.0), (3, 60.0), (5, 85.0)])
def test_dynamic_program_matches_monte_carlo(tackle, pos_x, make_event):
    spec = LeagueSpec(n_teams=2, teams=[TeamStrength(offense=0.3), TeamStrength(defense=-0.2)])
    event = make_event(tackle_number=tackle, pos_x=pos_x)
    truth = ground_truth(spec, event)
    rng = np.random.default_rng(17)
    n = 20_000
    tries = [simulate_set(spec, rng, pos_x, tackle, spec.teams[0], spec.teams[1], event.score_diff,
                          event.time_remaining)[1] for _ in range(n)]
    rate = float(np.mean(tries))
    assert abs(rate - truth.ex_try_set) <= 4 * np.sqrt(truth.ex_try_set * (1 - truth.ex_try_set) / n) + 2e-3


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
