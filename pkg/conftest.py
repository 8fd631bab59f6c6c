"""
Shared fixtures: hand-built tackle events, a small synthetic league and a
tiny untrained model.
"""

import pytest

from rlstate.features import build_vocab
from rlstate.mdn import init_model
from rlstate.models import LeagueSpec, ModelArchitecture, TackleEvent, TeamStrength
from rlstate.synthdata import simulate_league

BASE_EVENT = {
    "match_id": "m1",
    "season_idx": 0,
    "round": 1,
    "team_idx": 0,
    "opponent_idx": 1,
    "tackle_number": 1,
    "back_to_back": False,
    "pos_x": 30.0,
    "pos_y": 35.0,
    "time_remaining": 3000.0,
    "points_for": 6,
    "points_against": 4,
    "score_diff": 2,
    "meters_gained": 8.0,
    "try_this_tackle": False,
    "try_this_set": False,
    "possessing_team_won": True,
    "final_score_for": 18,
    "final_score_against": 10,
    "set_id": 3,
}

SMALL_ARCH = ModelArchitecture(embedding_dim_team=3, embedding_dim_tackle=2, spatial_hidden=6, trunk_hidden=8,
                               n_mixtures=2)


def event_dict(**overrides) -> dict:
    data = dict(BASE_EVENT)
    data.update(overrides)
    if data["tackle_number"] == 6 and "last_tackle_play" not in overrides:
        data["last_tackle_play"] = "run"
    return data


@pytest.fixture
def make_event():
    def factory(**overrides) -> TackleEvent:
        return TackleEvent(**event_dict(**overrides))
    return factory


@pytest.fixture(scope="session")
def small_spec() -> LeagueSpec:
    teams = [TeamStrength(offense=0.3 if i == 0 else 0.0) for i in range(4)]
    return LeagueSpec(n_teams=4, n_seasons=1, games_per_team=6, teams=teams, seed=7)


@pytest.fixture(scope="session")
def small_league(small_spec):
    return simulate_league(small_spec)


@pytest.fixture(scope="session")
def small_model(small_league):
    return init_model(SMALL_ARCH, build_vocab(small_league), seed=3)
