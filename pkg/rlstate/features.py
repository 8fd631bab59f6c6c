# rlstate/features.py
"""
Wide-and-deep input encoding of tackle events.

Season and team one-hots are concatenated into one indicator (and the same
for the opponent), tackle number and the back-to-back flag share another, and
field position travels twice: raw for the dense path and into the spatial
stack of the network.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from rlstate.errors import InvalidInputError, VocabMismatchError
from rlstate.models import EncodingConfig, GameStateTarget, TackleEvent, parse_event

TACKLE_INDICATOR_WIDTH = 7

Array = np.ndarray


@dataclass
class EncodedExample:
    team_indicator: Array
    opponent_indicator: Array
    tackle_indicator: Array
    position_raw: Array
    dense_context: Array
    # (0, points_for, points_against): live score added to final-score means
    score_anchor: Array
    target: GameStateTarget


@dataclass
class EncodedBatch:
    """Row-stacked encoded examples, ready for the network."""
    team_indicator: Array
    opponent_indicator: Array
    tackle_indicator: Array
    position_raw: Array
    dense_context: Array
    score_anchor: Array
    continuous_targets: Array  # meters, final_score_for, final_score_against
    binary_targets: Array      # try_this_tackle, try_this_set, possessing_team_won

    def __len__(self) -> int:
        return int(self.position_raw.shape[0])

    def take(self, index: Union[Array, Sequence[int], slice]) -> "EncodedBatch":
        return EncodedBatch(**{name: getattr(self, name)[index] for name in self.__dataclass_fields__})

    @classmethod
    def from_examples(cls, examples: Sequence[EncodedExample]) -> "EncodedBatch":
        if not examples:
            raise InvalidInputError("cannot stack an empty list of examples")
        return cls(
            team_indicator=np.stack([e.team_indicator for e in examples]),
            opponent_indicator=np.stack([e.opponent_indicator for e in examples]),
            tackle_indicator=np.stack([e.tackle_indicator for e in examples]),
            position_raw=np.stack([e.position_raw for e in examples]),
            dense_context=np.stack([e.dense_context for e in examples]),
            score_anchor=np.stack([e.score_anchor for e in examples]),
            continuous_targets=np.array([[e.target.y_m, e.target.y_s_for, e.target.y_s_against] for e in examples]),
            binary_targets=np.array([[e.target.y_tt, e.target.y_ts, e.target.y_w] for e in examples], dtype=np.float64),
        )


# ================================
# Indicator construction
# ================================

def season_team_onehot(season_idx: int, team_idx: int, config: EncodingConfig) -> Array:
    """Season one-hot followed by team one-hot."""
    if not 0 <= season_idx < config.n_seasons:
        raise VocabMismatchError(f"season index {season_idx} outside vocabulary of {config.n_seasons}",
                                 data={"season_idx": season_idx})
    if not 0 <= team_idx < config.n_teams:
        raise VocabMismatchError(f"team index {team_idx} outside vocabulary of {config.n_teams}",
                                 data={"team_idx": team_idx})
    out = np.zeros(config.indicator_width)
    out[season_idx] = 1.0
    out[config.n_seasons + team_idx] = 1.0
    return out


def neutral_team_indicator(season_idx: int, config: EncodingConfig) -> Array:
    """The league-average team of a season: every team slot weighted 1/n_teams."""
    if not 0 <= season_idx < config.n_seasons:
        raise VocabMismatchError(f"season index {season_idx} outside vocabulary of {config.n_seasons}",
                                 data={"season_idx": season_idx})
    out = np.zeros(config.indicator_width)
    out[season_idx] = 1.0
    out[config.n_seasons:] = 1.0 / config.n_teams
    return out


def tackle_flag_onehot(tackle_number: int, back_to_back: bool) -> Array:
    if not 1 <= tackle_number <= 6:
        raise InvalidInputError(f"tackle number {tackle_number} outside 1..6", data={"tackle_number": tackle_number})
    out = np.zeros(TACKLE_INDICATOR_WIDTH)
    out[tackle_number - 1] = 1.0
    out[6] = 1.0 if back_to_back else 0.0
    return out


# ================================
# Events
# ================================

def _as_event(event: Union[TackleEvent, Mapping[str, Any]]) -> TackleEvent:
    if isinstance(event, TackleEvent):
        return event
    return parse_event(dict(event))


def encode_event(event: Union[TackleEvent, Mapping[str, Any]], config: EncodingConfig) -> EncodedExample:
    event = _as_event(event)
    return EncodedExample(
        team_indicator=season_team_onehot(event.season_idx, event.team_idx, config),
        opponent_indicator=season_team_onehot(event.season_idx, event.opponent_idx, config),
        tackle_indicator=tackle_flag_onehot(event.tackle_number, event.back_to_back),
        position_raw=np.array([event.pos_x / config.field_length, event.pos_y / config.field_width]),
        dense_context=np.array([event.time_remaining / config.game_seconds, event.score_diff / config.score_scale]),
        score_anchor=np.array([0.0, float(event.points_for), float(event.points_against)]),
        target=GameStateTarget.from_event(event),
    )


def encode_events(events: Sequence[TackleEvent], config: EncodingConfig, neutral_teams: bool = False) -> EncodedBatch:
    """Vectorized encode_event over a dataset.

    With neutral_teams both sides are replaced by the league-average team.
    """
    if not events:
        raise InvalidInputError("cannot encode an empty event list")
    is_valid, error = validate_vocab(events, config)
    if not is_valid:
        raise VocabMismatchError(error)

    n = len(events)
    rows = np.arange(n)
    season = np.fromiter((e.season_idx for e in events), dtype=np.int64, count=n)
    team = np.fromiter((e.team_idx for e in events), dtype=np.int64, count=n)
    opponent = np.fromiter((e.opponent_idx for e in events), dtype=np.int64, count=n)
    tackle = np.fromiter((e.tackle_number for e in events), dtype=np.int64, count=n)

    width = config.indicator_width
    team_ind = np.zeros((n, width))
    opp_ind = np.zeros((n, width))
    team_ind[rows, season] = 1.0
    opp_ind[rows, season] = 1.0
    if neutral_teams:
        team_ind[:, config.n_seasons:] = 1.0 / config.n_teams
        opp_ind[:, config.n_seasons:] = 1.0 / config.n_teams
    else:
        team_ind[rows, config.n_seasons + team] = 1.0
        opp_ind[rows, config.n_seasons + opponent] = 1.0

    tackle_ind = np.zeros((n, TACKLE_INDICATOR_WIDTH))
    tackle_ind[rows, tackle - 1] = 1.0
    tackle_ind[:, 6] = [1.0 if e.back_to_back else 0.0 for e in events]

    return EncodedBatch(
        team_indicator=team_ind,
        opponent_indicator=opp_ind,
        tackle_indicator=tackle_ind,
        position_raw=np.array([[e.pos_x / config.field_length, e.pos_y / config.field_width] for e in events]),
        dense_context=np.array([[e.time_remaining / config.game_seconds, e.score_diff / config.score_scale]
                                for e in events]),
        score_anchor=np.array([[0.0, e.points_for, e.points_against] for e in events], dtype=np.float64),
        continuous_targets=np.array([[e.meters_gained, e.final_score_for, e.final_score_against] for e in events],
                                    dtype=np.float64),
        binary_targets=np.array([[e.try_this_tackle, e.try_this_set, e.possessing_team_won] for e in events],
                                dtype=np.float64),
    )


def decode_context(example: EncodedExample, config: EncodingConfig) -> Dict[str, Any]:
    """Recover the context fields an EncodedExample was built from."""
    n_s = config.n_seasons
    season_idx = int(np.argmax(example.team_indicator[:n_s]))
    return {
        "season_idx": season_idx,
        "team_idx": int(np.argmax(example.team_indicator[n_s:])),
        "opponent_idx": int(np.argmax(example.opponent_indicator[n_s:])),
        "tackle_number": int(np.argmax(example.tackle_indicator[:6])) + 1,
        "back_to_back": bool(example.tackle_indicator[6] > 0.5),
        "pos_x": float(example.position_raw[0] * config.field_length),
        "pos_y": float(example.position_raw[1] * config.field_width),
        "time_remaining": float(example.dense_context[0] * config.game_seconds),
        "score_diff": float(example.dense_context[1] * config.score_scale),
        "points_for": float(example.score_anchor[1]),
        "points_against": float(example.score_anchor[2]),
    }


def build_vocab(events: Sequence[TackleEvent]) -> EncodingConfig:
    """Vocabulary sizes are the largest observed index plus one."""
    if not events:
        raise InvalidInputError("cannot build a vocabulary from an empty dataset")
    n_seasons = max(e.season_idx for e in events) + 1
    n_teams = max(max(e.team_idx, e.opponent_idx) for e in events) + 1
    return EncodingConfig(n_seasons=n_seasons, n_teams=n_teams)


def validate_vocab(events: Sequence[TackleEvent], config: EncodingConfig) -> Tuple[bool, Optional[str]]:
    """
    Check that every event indexes inside the vocabulary.
    Returns (is_valid, error_message) tuple.
    """
    for i, e in enumerate(events):
        if e.season_idx >= config.n_seasons:
            return False, f"event {i} ({e.match_id}): season_idx {e.season_idx} >= n_seasons {config.n_seasons}"
        if e.team_idx >= config.n_teams:
            return False, f"event {i} ({e.match_id}): team_idx {e.team_idx} >= n_teams {config.n_teams}"
        if e.opponent_idx >= config.n_teams:
            return False, f"event {i} ({e.match_id}): opponent_idx {e.opponent_idx} >= n_teams {config.n_teams}"
    return True, None
