# rlstate/models.py
import math
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from typing import Any, Dict, List, Literal, Optional, Tuple

from rlstate.errors import EventValidationError

PlayChoice = Literal["run", "offensive_kick", "defensive_kick"]
PLAY_CLASSES: Tuple[str, ...] = ("run", "offensive_kick", "defensive_kick")

FIELD_LENGTH = 100.0
FIELD_WIDTH = 70.0
GAME_SECONDS = 4800.0
SCORE_SCALE = 50.0


# ================================
# Play-by-play records
# ================================

class TackleEvent(BaseModel):
    """One tackle seen from the possessing team; attack always runs toward x=100."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    match_id: str
    season_idx: int = Field(ge=0)
    round: int = Field(ge=1)
    team_idx: int = Field(ge=0)
    opponent_idx: int = Field(ge=0)
    tackle_number: int = Field(ge=1, le=6)
    back_to_back: bool = False
    pos_x: float = Field(ge=0.0, le=FIELD_LENGTH)
    pos_y: float = Field(ge=0.0, le=FIELD_WIDTH)
    time_remaining: float = Field(ge=0.0, le=GAME_SECONDS)
    score_diff: int
    meters_gained: float
    try_this_tackle: bool
    try_this_set: bool
    possessing_team_won: bool
    final_score_for: int = Field(ge=0)
    final_score_against: int = Field(ge=0)
    last_tackle_play: Optional[PlayChoice] = None
    points_for: int = Field(ge=0)
    points_against: int = Field(ge=0)
    set_id: Optional[int] = Field(default=None, ge=0)

    @model_validator(mode="before")
    @classmethod
    def fill_live_score(cls, data: Any) -> Any:
        if isinstance(data, dict):
            return derive_live_score(data)
        return data

    @model_validator(mode="after")
    def check_consistency(self) -> "TackleEvent":
        if self.team_idx == self.opponent_idx:
            raise ValueError("opponent_idx: a team cannot play itself")
        if self.try_this_tackle and not self.try_this_set:
            raise ValueError("try_this_set: a try this tackle implies a try this set")
        if self.possessing_team_won != (self.final_score_for > self.final_score_against):
            raise ValueError("possessing_team_won: disagrees with the final scoreline")
        if self.score_diff != self.points_for - self.points_against:
            raise ValueError("score_diff: must equal points_for - points_against")
        if self.final_score_for < self.points_for:
            raise ValueError("final_score_for: below the live score")
        if self.final_score_against < self.points_against:
            raise ValueError("final_score_against: below the live score")
        if self.tackle_number == 6 and self.last_tackle_play is None:
            raise ValueError("last_tackle_play: required on the last tackle")
        if self.tackle_number < 6 and self.last_tackle_play == "run":
            raise ValueError("last_tackle_play: only kicks can end a set before the last tackle")
        return self


def _as_int(value: Any) -> Optional[int]:
    if isinstance(value, bool) or not isinstance(value, int):
        return None
    return value


def derive_live_score(data: Dict[str, Any]) -> Dict[str, Any]:
    """Fill a missing points_for / points_against from score_diff.

    With neither given the trailing side is anchored at zero. Values that are
    not integers are left for field validation to report.
    """
    has_for = data.get("points_for") is not None
    has_against = data.get("points_against") is not None
    diff = _as_int(data.get("score_diff"))
    if (has_for and has_against) or diff is None:
        return data
    filled = dict(data)
    if has_for:
        points_for = _as_int(data["points_for"])
        if points_for is not None:
            filled["points_against"] = points_for - diff
    elif has_against:
        points_against = _as_int(data["points_against"])
        if points_against is not None:
            filled["points_for"] = points_against + diff
    else:
        filled["points_for"], filled["points_against"] = max(diff, 0), max(-diff, 0)
    return filled


def validation_error_to_event_error(exc: ValidationError, line: Optional[int] = None) -> EventValidationError:
    """Turn a pydantic error into an EventValidationError naming the offending field."""
    first = exc.errors()[0]
    message = first.get("msg", str(exc)).removeprefix("Value error, ")
    if first.get("loc"):
        field = str(first["loc"][0])
    else:
        field = message.split(":", 1)[0]
    return EventValidationError(f"{field}: {message}" if not message.startswith(field) else message,
                                field=field, line=line)


def parse_event(data: Dict[str, Any], line: Optional[int] = None) -> TackleEvent:
    try:
        return TackleEvent.model_validate(data)
    except ValidationError as e:
        raise validation_error_to_event_error(e, line) from None


def parse_context(data: Dict[str, Any]) -> TackleEvent:
    """A TackleEvent from context fields only; outcome fields get neutral placeholders.

    Outcome fields never reach the model inputs, so predictions do not depend on them.
    """
    filled = dict(data)
    if filled.get("score_diff") is None:
        filled["score_diff"] = (_as_int(filled.get("points_for")) or 0) - (_as_int(filled.get("points_against")) or 0)
    filled = derive_live_score(filled)
    filled.setdefault("match_id", "context")
    filled.setdefault("meters_gained", 0.0)
    filled.setdefault("try_this_tackle", False)
    filled.setdefault("try_this_set", False)
    points_for, points_against = _as_int(filled.get("points_for")), _as_int(filled.get("points_against"))
    if points_for is not None and points_against is not None:
        filled.setdefault("final_score_for", points_for)
        filled.setdefault("final_score_against", points_against)
    final_for, final_against = _as_int(filled.get("final_score_for")), _as_int(filled.get("final_score_against"))
    if final_for is not None and final_against is not None:
        filled.setdefault("possessing_team_won", final_for > final_against)
    if filled.get("tackle_number") == 6:
        filled.setdefault("last_tackle_play", "run")
    return parse_event(filled)


# ================================
# Encoding / architecture
# ================================

class EncodingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_seasons: int = Field(ge=1)
    n_teams: int = Field(ge=1)
    field_length: float = Field(default=FIELD_LENGTH, gt=0)
    field_width: float = Field(default=FIELD_WIDTH, gt=0)
    game_seconds: float = Field(default=GAME_SECONDS, gt=0)
    score_scale: float = Field(default=SCORE_SCALE, gt=0)

    @property
    def indicator_width(self) -> int:
        return self.n_seasons + self.n_teams


class ModelArchitecture(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    embedding_dim_team: int = Field(default=8, ge=1)
    embedding_dim_tackle: int = Field(default=4, ge=1)
    spatial_hidden: int = Field(default=50, ge=1)
    spatial_layers: int = Field(default=2, ge=1)
    trunk_hidden: int = Field(default=64, ge=1)
    trunk_layers: Literal[2] = 2
    n_mixtures: int = Field(default=5, ge=1)
    continuous_dims: Literal[3] = 3
    binary_dims: Literal[3] = 3
    sigma_floor: float = Field(default=1e-3, gt=0)
    # meters, final_score_for, final_score_against
    output_scale: Tuple[float, float, float] = (10.0, 10.0, 10.0)
    output_offset: Tuple[float, float, float] = (4.0, 8.0, 8.0)

    @property
    def outputs_per_component(self) -> int:
        # pi, mu and sigma per continuous dim, p per binary dim
        return 1 + 2 * self.continuous_dims + self.binary_dims

    @property
    def output_width(self) -> int:
        return self.n_mixtures * self.outputs_per_component

    @property
    def trunk_input_width(self) -> int:
        return 2 * self.embedding_dim_team + self.embedding_dim_tackle + self.spatial_hidden + 2 + 2


class GameStateTarget(BaseModel):
    """Observed outcomes the MDN is scored against."""
    model_config = ConfigDict(frozen=True)

    y_m: float
    y_s_for: float
    y_s_against: float
    y_tt: bool
    y_ts: bool
    y_w: bool

    @model_validator(mode="after")
    def check_try_implication(self) -> "GameStateTarget":
        if self.y_tt and not self.y_ts:
            raise ValueError("y_ts: a try this tackle implies a try this set")
        return self

    @classmethod
    def from_event(cls, event: TackleEvent) -> "GameStateTarget":
        return cls(
            y_m=event.meters_gained,
            y_s_for=event.final_score_for,
            y_s_against=event.final_score_against,
            y_tt=event.try_this_tackle,
            y_ts=event.try_this_set,
            y_w=event.possessing_team_won,
        )


# ================================
# Training configuration and reports
# ================================

class LogisticConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(default=600, ge=1)
    learning_rate: float = Field(default=0.05, ge=0)
    l2: float = Field(default=1e-4, ge=0)
    test_ratio: float = Field(default=0.2, gt=0, lt=1)
    seed: int = 2018


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(default=30, ge=1)
    batch_size: int = Field(default=256, ge=1)
    learning_rate: float = Field(default=1e-3, ge=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    seed: int = 2018
    patience: int = Field(default=10, ge=1)
    validation_ratio: float = Field(default=0.1, gt=0, lt=1)
    test_ratio: float = Field(default=0.2, gt=0, lt=1)
    architecture: ModelArchitecture = Field(default_factory=ModelArchitecture)
    logistic: LogisticConfig = Field(default_factory=LogisticConfig)


class CalibrationBin(BaseModel):
    lower: float
    upper: float
    count: int
    mean_predicted: Optional[float] = None
    empirical_rate: Optional[float] = None


class HeadMetrics(BaseModel):
    brier: float = Field(ge=0, le=1)
    calibration_error: float
    calibration: List[CalibrationBin]


class EvalReport(BaseModel):
    n_events: int
    test_nll: float
    rmse_meters: float
    rmse_score_for: float
    rmse_score_against: float
    rmse_score_diff: float
    heads: Dict[str, HeadMetrics]


class PointsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    try_points: float = Field(default=4.0, ge=0)
    conversion_points: float = Field(default=2.0, ge=0)
    conversion_rate: float = Field(default=1.0, ge=0, le=1)

    @property
    def points_per_try(self) -> float:
        return self.try_points + self.conversion_points * self.conversion_rate


# ================================
# Synthetic league generator
# ================================

class TeamStrength(BaseModel):
    model_config = ConfigDict(extra="forbid")

    offense: float = 0.0
    defense: float = 0.0
    # only counts inside the opponent's final quarter (pos_x >= 75)
    redzone_defense: float = 0.0
    run_bias: float = 0.0


class TryModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    intercept: float = -6.5
    x: float = 2.5
    redzone: float = 3.0
    tackle: float = 0.1
    strength: float = 1.0


class GainModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    intercept: float = 9.0
    x: float = -4.0
    tackle: float = -0.2
    strength: float = 2.0
    sigma: float = Field(default=4.0, gt=0)


class PolicyModel(BaseModel):
    """Shared last-tackle slopes; the run intercept is shifted per team by run_bias."""
    model_config = ConfigDict(extra="forbid")

    run_intercept: float = -1.5
    run_x: float = 1.5
    run_score: float = -1.0
    run_time: float = -0.5
    offensive_kick_intercept: float = -2.0
    offensive_kick_x: float = 2.5
    offensive_kick_score: float = 0.0
    offensive_kick_time: float = 0.0


class KickModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    offensive_try_intercept: float = -5.0
    offensive_try_x: float = 3.0
    regain_probability: float = Field(default=0.2, ge=0, le=1)
    turnover_restart_x: float = Field(default=10.0, ge=0, le=100)
    defensive_kick_distance: float = Field(default=35.0, ge=0)


class LeagueSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_teams: int = Field(default=16, ge=2)
    n_seasons: int = Field(default=1, ge=1)
    games_per_team: int = Field(default=24, ge=1)
    teams: List[TeamStrength] = Field(default_factory=list)
    try_model: TryModel = Field(default_factory=TryModel)
    gain_model: GainModel = Field(default_factory=GainModel)
    policy: PolicyModel = Field(default_factory=PolicyModel)
    kicks: KickModel = Field(default_factory=KickModel)
    handling_error_probability: float = Field(default=0.02, ge=0, lt=1)
    conversion_probability: float = Field(default=0.75, ge=0, le=1)
    seconds_per_tackle: Tuple[float, float] = (12.0, 18.0)
    kickoff_x: float = Field(default=20.0, ge=0, le=100)
    seed: int = 2018

    @model_validator(mode="after")
    def fill_teams(self) -> "LeagueSpec":
        if not self.teams:
            self.teams = [TeamStrength() for _ in range(self.n_teams)]
        if len(self.teams) != self.n_teams:
            raise ValueError(f"teams: expected {self.n_teams} entries, got {len(self.teams)}")
        for i, team in enumerate(self.teams):
            if not all(math.isfinite(v) for v in team.model_dump().values()):
                raise ValueError(f"teams: strengths of team {i} must be finite")
        low, high = self.seconds_per_tackle
        if not 0 < low <= high:
            raise ValueError("seconds_per_tackle: need 0 < low <= high")
        return self


# ================================
# Prediction payloads
# ================================

class DistributionSummary(BaseModel):
    mean: float
    q10: float
    q50: float
    q90: float


class StateSummary(BaseModel):
    meters: DistributionSummary
    score_for: DistributionSummary
    score_against: DistributionSummary
    score_diff: DistributionSummary
    ex_try_tackle: float
    ex_try_set: float
    win_probability: float
    play_selection: Optional[Dict[str, float]] = None
