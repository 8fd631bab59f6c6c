# rlstate/analytics.py
"""
Team and play analytics on top of a StatePredictor: value-over-average
tables, set momentum and big plays, expected meters across the field,
scoreline traces and last-tackle decision valuation.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel

from rlstate.errors import InvalidInputError
from rlstate.inference import (StatePredictor, bernoulli_mean, marginal_cdf, marginal_continuous, marginal_score_diff,
                               mixture_interval, mixture_mean, summarize)
from rlstate.log import get_logger
from rlstate.models import FIELD_LENGTH, FIELD_WIDTH, PLAY_CLASSES, PointsConfig, TackleEvent
from rlstate.settings import get_settings

logger = get_logger(__name__)

Array = np.ndarray

N_ZONES = 10
ZONE_WIDTH = 10.0
MIN_SUPPORT = 30


def zone_of(x: Array) -> Array:
    """10 m bins along the attack direction, 0..9."""
    return np.minimum((np.asarray(x, dtype=np.float64) // ZONE_WIDTH).astype(np.int64), N_ZONES - 1)


def _ex_try_set(events: Sequence[TackleEvent], model: StatePredictor, neutral_teams: bool = False) -> Array:
    return np.atleast_1d(bernoulli_mean(model.mixtures(events, neutral_teams=neutral_teams), "try_set"))


# ================================
# DVOA
# ================================

def play_residual(event: TackleEvent, predicted_ex_try_set: float) -> float:
    """Actual minus expected try-in-set; charged to the attack and, with the same sign, to the defence."""
    if not 0.0 < predicted_ex_try_set < 1.0:
        raise InvalidInputError(f"exTrySet must lie in (0, 1), got {predicted_ex_try_set}")
    return float(event.try_this_set) - predicted_ex_try_set


@dataclass
class DvoaTable:
    """Per-team offensive/defensive value over average, centered on the league."""
    teams: pd.DataFrame
    league_mean_offense: float
    league_mean_defense: float
    excluded: List[int] = field(default_factory=list)

    def row(self, team_idx: int) -> pd.Series:
        return self.teams.set_index("team_idx").loc[team_idx]

    def best_offense(self) -> int:
        return int(self.teams.loc[self.teams["off_dvoa"].idxmax(), "team_idx"])

    def best_defense(self) -> int:
        return int(self.teams.loc[self.teams["def_dvoa"].idxmin(), "team_idx"])


def residual_frame(events: Sequence[TackleEvent], model: StatePredictor, neutral_teams: bool = True) -> pd.DataFrame:
    """One row per play with its exTrySet and residual."""
    if not events:
        raise InvalidInputError("no plays to evaluate")
    expected = _ex_try_set(events, model, neutral_teams)
    return pd.DataFrame({
        "match_id": [e.match_id for e in events],
        "season_idx": [e.season_idx for e in events],
        "round": [e.round for e in events],
        "team_idx": [e.team_idx for e in events],
        "opponent_idx": [e.opponent_idx for e in events],
        "tackle_number": [e.tackle_number for e in events],
        "pos_x": [e.pos_x for e in events],
        "ex_try_set": expected,
        "residual": np.array([float(e.try_this_set) for e in events]) - expected,
    })


def dvoa_from_residuals(frame: pd.DataFrame, n_teams: Optional[int] = None) -> DvoaTable:
    """Aggregate play residuals into a centered DvoaTable.

    Teams without both offensive and defensive plays are excluded with a warning.
    """
    offense = frame.groupby("team_idx")["residual"].agg(off_raw="mean", off_plays="count")
    defense = frame.groupby("opponent_idx")["residual"].agg(def_raw="mean", def_plays="count")
    defense.index.name = "team_idx"
    teams = offense.join(defense, how="outer")

    excluded = sorted(int(t) for t in teams.index[teams.isna().any(axis=1)])
    if n_teams is not None:
        excluded += [t for t in range(n_teams) if t not in teams.index]
    for team in excluded:
        logger.warning(f"Team {team} has no offensive or no defensive plays; excluded from DVOA")
    teams = teams.dropna().copy()
    if teams.empty:
        raise InvalidInputError("no team has both offensive and defensive plays")

    included = teams.index
    off_mean = float(frame.loc[frame["team_idx"].isin(included), "residual"].mean())
    def_mean = float(frame.loc[frame["opponent_idx"].isin(included), "residual"].mean())
    teams["off_dvoa"] = teams["off_raw"] - off_mean
    teams["def_dvoa"] = teams["def_raw"] - def_mean
    teams["diff_dvoa"] = teams["off_dvoa"] - teams["def_dvoa"]
    teams["off_plays"] = teams["off_plays"].astype(int)
    teams["def_plays"] = teams["def_plays"].astype(int)
    teams = teams.reset_index()[["team_idx", "off_plays", "off_dvoa", "def_plays", "def_dvoa", "diff_dvoa"]]
    return DvoaTable(teams=teams, league_mean_offense=off_mean, league_mean_defense=def_mean,
                     excluded=sorted(set(excluded)))


def compute_dvoa(events: Sequence[TackleEvent], model: StatePredictor, neutral_teams: bool = True,
                 n_teams: Optional[int] = None) -> DvoaTable:
    """Team DVOA from try-in-set residuals.

    With neutral_teams the expectation of every play is taken for a
    league-average attack against a league-average defence.
    """
    return dvoa_from_residuals(residual_frame(events, model, neutral_teams), n_teams)


def cumulative_dvoa(events: Sequence[TackleEvent], model: StatePredictor, by_round: bool = True,
                    neutral_teams: bool = True) -> pd.DataFrame:
    """Running DVOA per team through each (season, round), long format."""
    frame = residual_frame(events, model, neutral_teams)
    keys = ["season_idx", "round"] if by_round else ["season_idx"]
    checkpoints = frame[keys].drop_duplicates().sort_values(keys).itertuples(index=False)
    order = frame["season_idx"] * 10_000 + (frame["round"] if by_round else 0)
    parts = []
    for point in checkpoints:
        limit = point.season_idx * 10_000 + (point.round if by_round else 0)
        table = dvoa_from_residuals(frame[order <= limit]).teams
        for key in keys:
            table.insert(0, key, getattr(point, key))
        parts.append(table)
    return pd.concat(parts, ignore_index=True)


def spatial_split_dvoa(events: Sequence[TackleEvent], model: StatePredictor, x_threshold: float = 75.0,
                       neutral_teams: bool = True) -> Dict[str, DvoaTable]:
    """DVOA for plays short of the threshold ('normal') and at or beyond it ('final_quarter')."""
    if not 0.0 <= x_threshold <= 100.0:
        raise InvalidInputError(f"x_threshold must lie in [0, 100], got {x_threshold}")
    frame = residual_frame(events, model, neutral_teams)
    zones = {"normal": frame[frame["pos_x"] < x_threshold], "final_quarter": frame[frame["pos_x"] >= x_threshold]}
    out = {}
    for name, part in zones.items():
        if part.empty:
            logger.warning(f"No plays in the {name} zone (threshold {x_threshold})")
            continue
        out[name] = dvoa_from_residuals(part)
    return out


# ================================
# Momentum, play value and big plays
# ================================

@dataclass
class BaselineTable:
    """Average exTrySet by tackle number (rows) and 10 m zone (columns)."""
    values: Array  # (6, 10)
    counts: Array  # (6, 10)

    def lookup(self, tackle_number: int, x: float) -> float:
        return float(self.values[tackle_number - 1, int(zone_of(x))])

    def to_frame(self) -> pd.DataFrame:
        rows = [{"tackle_number": t + 1, "zone": z, "x_low": z * ZONE_WIDTH, "count": int(self.counts[t, z]),
                 "ex_try_set": float(self.values[t, z])}
                for t in range(6) for z in range(N_ZONES)]
        return pd.DataFrame(rows)


def baseline_table(events: Sequence[TackleEvent], model: StatePredictor) -> BaselineTable:
    """Per-bin mean exTrySet; empty bins take the nearest non-empty zone of the same tackle."""
    if not events:
        raise InvalidInputError("baseline_table: empty dataset")
    expected = _ex_try_set(events, model)
    tackle = np.array([e.tackle_number for e in events]) - 1
    zone = zone_of([e.pos_x for e in events])
    sums = np.zeros((6, N_ZONES))
    counts = np.zeros((6, N_ZONES), dtype=np.int64)
    np.add.at(sums, (tackle, zone), expected)
    np.add.at(counts, (tackle, zone), 1)

    values = np.full((6, N_ZONES), float(expected.mean()))
    for t in range(6):
        filled = np.flatnonzero(counts[t])
        if filled.size == 0:
            continue
        for z in range(N_ZONES):
            nearest = filled[np.argmin(np.abs(filled - z))]
            values[t, z] = sums[t, nearest] / counts[t, nearest]
    return BaselineTable(values=values, counts=counts)


def meters_percentiles(events: Sequence[TackleEvent], model: StatePredictor) -> Array:
    """Where each observed gain falls in its predicted meters distribution."""
    mix = model.mixtures(events)
    return marginal_cdf(mix, "meters", np.array([e.meters_gained for e in events]))


class TraceTackle(BaseModel):
    tackle_number: int
    pos_x: float
    pos_y: float
    meters_gained: float
    ex_try_set: float
    baseline: float
    momentum: float
    play_value: float
    meters_percentile: float
    big_play: bool


class SetTrace(BaseModel):
    match_id: str
    team_idx: int
    set_id: Optional[int]
    try_this_set: bool
    tackles: List[TraceTackle]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([t.model_dump() for t in self.tackles])


def _check_single_set(set_events: Sequence[TackleEvent]) -> None:
    if not set_events:
        raise InvalidInputError("set_trace: no tackles given")
    if len(set_events) > 6:
        raise InvalidInputError(f"set_trace: a set has at most 6 tackles, got {len(set_events)}")
    first = set_events[0]
    for e in set_events[1:]:
        if (e.match_id, e.team_idx, e.set_id) != (first.match_id, first.team_idx, first.set_id):
            raise InvalidInputError(f"set_trace: tackles from different sets "
                                    f"({first.match_id}/{first.set_id} and {e.match_id}/{e.set_id})")
    numbers = [e.tackle_number for e in set_events]
    if len(set(numbers)) != len(numbers):
        raise InvalidInputError(f"set_trace: repeated tackle numbers {numbers}")


def set_trace(set_events: Sequence[TackleEvent], model: StatePredictor, baseline: BaselineTable,
              percentile: Optional[float] = None) -> SetTrace:
    """exTrySet, momentum against the baseline, play values and big-play flags for one set."""
    _check_single_set(set_events)
    percentile = get_settings().big_play_percentile if percentile is None else percentile
    ordered = sorted(set_events, key=lambda e: e.tackle_number)
    expected = _ex_try_set(ordered, model)
    ranks = meters_percentiles(ordered, model)
    outcome = float(ordered[-1].try_this_set)

    tackles = []
    for i, e in enumerate(ordered):
        following = expected[i + 1] if i + 1 < len(ordered) else outcome
        base = baseline.lookup(e.tackle_number, e.pos_x)
        tackles.append(TraceTackle(
            tackle_number=e.tackle_number, pos_x=e.pos_x, pos_y=e.pos_y, meters_gained=e.meters_gained,
            ex_try_set=float(expected[i]), baseline=base, momentum=float(expected[i]) - base,
            play_value=float(following - expected[i]),
            meters_percentile=float(ranks[i]), big_play=bool(ranks[i] >= percentile),
        ))
    first = ordered[0]
    return SetTrace(match_id=first.match_id, team_idx=first.team_idx, set_id=first.set_id,
                    try_this_set=bool(outcome), tackles=tackles)


def play_values(trace: SetTrace) -> Array:
    return np.array([t.play_value for t in trace.tackles])


def big_plays(events: Sequence[TackleEvent], model: StatePredictor, percentile: Optional[float] = None) -> pd.DataFrame:
    """Every play whose gain reaches the given percentile of its predicted meters distribution."""
    percentile = get_settings().big_play_percentile if percentile is None else percentile
    if not events:
        raise InvalidInputError("big_plays: empty dataset")
    ranks = meters_percentiles(events, model)
    rows = [{
        "match_id": e.match_id, "round": e.round, "set_id": e.set_id, "team_idx": e.team_idx,
        "opponent_idx": e.opponent_idx, "tackle_number": e.tackle_number, "pos_x": e.pos_x,
        "meters_gained": e.meters_gained, "meters_percentile": float(r),
    } for e, r in zip(events, ranks) if r >= percentile]
    return pd.DataFrame(rows, columns=["match_id", "round", "set_id", "team_idx", "opponent_idx", "tackle_number",
                                       "pos_x", "meters_gained", "meters_percentile"])


def spatial_meters_grid(context: TackleEvent, model: StatePredictor, x_step: float = 10.0,
                        y_step: float = 10.0) -> pd.DataFrame:
    """Predicted meters gained with the context replayed at every cell centre of the field."""
    if not 0.0 < x_step <= FIELD_LENGTH:
        raise InvalidInputError(f"x_step must lie in (0, {FIELD_LENGTH}], got {x_step}")
    if not 0.0 < y_step <= FIELD_WIDTH:
        raise InvalidInputError(f"y_step must lie in (0, {FIELD_WIDTH}], got {y_step}")
    xs = np.arange(x_step / 2, FIELD_LENGTH, x_step)
    ys = np.arange(y_step / 2, FIELD_WIDTH, y_step)
    cells = [context.model_copy(update={"pos_x": float(x), "pos_y": float(y)}) for x in xs for y in ys]
    mixes = model.mixtures(cells)
    rows = []
    for i, cell in enumerate(cells):
        meters = summarize(marginal_continuous(mixes.row(i), "meters"))
        rows.append({"pos_x": cell.pos_x, "pos_y": cell.pos_y, **meters.model_dump()})
    return pd.DataFrame(rows, columns=["pos_x", "pos_y", "mean", "q10", "q50", "q90"])


# ================================
# Scoreline
# ================================

class ScorelinePoint(BaseModel):
    time_remaining: float
    actual_diff: int
    mean_diff: float
    q10: float
    q50: float
    q90: float


class ScorelineTrace(BaseModel):
    match_id: str
    team_idx: int
    final_diff: int
    points: List[ScorelinePoint]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([p.model_dump() for p in self.points])


def scoreline_trace(match_events: Sequence[TackleEvent], model: StatePredictor,
                    team_idx: Optional[int] = None) -> ScorelineTrace:
    """Predicted final differential with its 90-10 band at every tackle, from one team's side."""
    if not match_events:
        raise InvalidInputError("scoreline_trace: no tackles given")
    first = match_events[0]
    team = first.team_idx if team_idx is None else team_idx
    for prev, e in zip(match_events, match_events[1:]):
        if e.match_id != first.match_id:
            raise InvalidInputError(f"scoreline_trace: tackles from matches {first.match_id} and {e.match_id}")
        if e.time_remaining > prev.time_remaining:
            raise InvalidInputError("scoreline_trace: tackles must be ordered by the game clock")
    if team not in (first.team_idx, first.opponent_idx):
        raise InvalidInputError(f"team {team} did not play in {first.match_id}")

    mixes = model.mixtures(match_events)
    points = []
    for i, e in enumerate(match_events):
        diff = marginal_score_diff(mixes.row(i))
        q10, q50, q90 = mixture_interval(diff)
        mean = mixture_mean(diff)
        actual = e.score_diff
        if e.team_idx != team:
            mean, q10, q50, q90, actual = -mean, -q90, -q50, -q10, -actual
        points.append(ScorelinePoint(time_remaining=e.time_remaining, actual_diff=actual,
                                     mean_diff=mean, q10=q10, q50=q50, q90=q90))
    final = first.final_score_for - first.final_score_against
    return ScorelineTrace(match_id=first.match_id, team_idx=team,
                          final_diff=final if first.team_idx == team else -final, points=points)


def game_over_point(trace: ScorelineTrace, safe_margin: float = 0.0) -> Optional[float]:
    """Clock time from which the 90-10 band excludes zero on one side for the rest of the match.

    A positive safe_margin also needs the live margin to stay beyond it on
    the same side.
    """
    if not trace.points:
        return None

    def side(p: ScorelinePoint) -> int:
        lo, hi = np.sign(p.q10), np.sign(p.q90)
        if lo != hi or lo == 0:
            return 0
        if safe_margin > 0 and (abs(p.actual_diff) <= safe_margin or np.sign(p.actual_diff) != lo):
            return 0
        return int(lo)

    final_side = side(trace.points[-1])
    if final_side == 0:
        return None
    start = len(trace.points) - 1
    while start > 0 and side(trace.points[start - 1]) == final_side:
        start -= 1
    return trace.points[start].time_remaining


# ================================
# Last-tackle decisions
# ================================

class DecisionOption(BaseModel):
    frequency: float
    expected_points: float
    source: str


class DecisionValuation(BaseModel):
    match_id: str
    team_idx: int
    pos_x: float
    chosen: Optional[str]
    actual_points: float
    expected_points: float
    options: Dict[str, DecisionOption]


def default_points() -> PointsConfig:
    """Points per try from RLSTATE_POINTS_PER_TRY; a try is worth at most 4, the rest is the conversion."""
    total = get_settings().points_per_try
    try_points = min(4.0, total)
    return PointsConfig(try_points=try_points, conversion_points=total - try_points)


@dataclass
class DecisionSupport:
    """Observed immediate points per decision, league-wide and by 10 m zone."""
    zone_sums: Array    # (10, 3)
    zone_counts: Array  # (10, 3)
    points: PointsConfig
    min_support: int = MIN_SUPPORT

    @classmethod
    def from_events(cls, events: Sequence[TackleEvent], points: Optional[PointsConfig] = None,
                    min_support: int = MIN_SUPPORT) -> "DecisionSupport":
        points = points or default_points()
        sums = np.zeros((N_ZONES, 3))
        counts = np.zeros((N_ZONES, 3), dtype=np.int64)
        for e in events:
            if e.last_tackle_play is None:
                continue
            z, d = int(zone_of(e.pos_x)), PLAY_CLASSES.index(e.last_tackle_play)
            sums[z, d] += immediate_points(e, points)
            counts[z, d] += 1
        return cls(zone_sums=sums, zone_counts=counts, points=points, min_support=min_support)

    def expected_points(self, decision: str, x: float, fallback: float) -> Tuple[float, str]:
        """Zone mean smoothed toward the decision's league mean; the model fallback without league support."""
        d = PLAY_CLASSES.index(decision)
        league_n = int(self.zone_counts[:, d].sum())
        if league_n < self.min_support:
            return fallback, "model"
        league_mean = self.zone_sums[:, d].sum() / league_n
        z = int(zone_of(x))
        n = int(self.zone_counts[z, d])
        value = (self.zone_sums[z, d] + self.min_support * league_mean) / (n + self.min_support)
        return float(value), "zone" if n >= self.min_support else "league"


def immediate_points(event: TackleEvent, points: PointsConfig) -> float:
    return points.points_per_try if event.try_this_tackle else 0.0


def _check_decision_context(event: TackleEvent) -> None:
    if event.tackle_number != 6 and event.last_tackle_play is None:
        raise InvalidInputError(f"{event.match_id}: tackle {event.tackle_number} is not a last-tackle state")


def _valuations(events: Sequence[TackleEvent], model: StatePredictor,
                support: DecisionSupport) -> List[DecisionValuation]:
    for e in events:
        _check_decision_context(e)
    freqs = model.play_probabilities(events)
    fallback = np.atleast_1d(bernoulli_mean(model.mixtures(events), "try_tackle")) * support.points.points_per_try
    out = []
    for i, e in enumerate(events):
        options = {}
        for d, name in enumerate(PLAY_CLASSES):
            value, source = support.expected_points(name, e.pos_x, float(fallback[i]))
            options[name] = DecisionOption(frequency=float(freqs[i, d]), expected_points=value, source=source)
        out.append(DecisionValuation(
            match_id=e.match_id, team_idx=e.team_idx, pos_x=e.pos_x, chosen=e.last_tackle_play,
            actual_points=immediate_points(e, support.points),
            expected_points=float(sum(o.frequency * o.expected_points for o in options.values())),
            options=options,
        ))
    return out


def decision_value(context: TackleEvent, model: StatePredictor, support: DecisionSupport) -> DecisionValuation:
    """Model play frequencies and expected points of each option for one last-tackle state."""
    return _valuations([context], model, support)[0]


def decision_frame(events: Sequence[TackleEvent], model: StatePredictor, points: Optional[PointsConfig] = None,
                   min_support: int = MIN_SUPPORT) -> pd.DataFrame:
    """One row per decision-labeled play with frequencies, option values and their sources."""
    decisions = [e for e in events if e.last_tackle_play is not None]
    if not decisions:
        raise InvalidInputError("no decision-labeled plays")
    support = DecisionSupport.from_events(decisions, points, min_support)
    rows = []
    for v in _valuations(decisions, model, support):
        row = {"match_id": v.match_id, "team_idx": v.team_idx, "pos_x": v.pos_x, "chosen": v.chosen,
               "actual_points": v.actual_points, "expected_points": v.expected_points}
        for name, option in v.options.items():
            row[f"p_{name}"] = option.frequency
            row[f"ep_{name}"] = option.expected_points
            row[f"source_{name}"] = option.source
        rows.append(row)
    return pd.DataFrame(rows)


def decision_table(events: Sequence[TackleEvent], model: StatePredictor, points: Optional[PointsConfig] = None,
                   min_support: int = MIN_SUPPORT) -> pd.DataFrame:
    """Per team: last-tackle run share, expected vs actual points per decision, ranked by points over expected."""
    frame = decision_frame(events, model, points, min_support)
    frame["ran"] = (frame["chosen"] == "run").astype(float)
    table = frame.groupby("team_idx").agg(
        decisions=("chosen", "size"),
        run_pct=("ran", "mean"),
        expected_points=("expected_points", "mean"),
        actual_points=("actual_points", "mean"),
    ).reset_index()
    table["over_expected"] = table["actual_points"] - table["expected_points"]
    table = table.sort_values(["over_expected", "team_idx"], ascending=[False, True]).reset_index(drop=True)
    table.insert(0, "rank", np.arange(1, len(table) + 1))
    return table


def decision_zone_summary(events: Sequence[TackleEvent], model: StatePredictor, x_min: float = 80.0,
                          points: Optional[PointsConfig] = None, min_support: int = MIN_SUPPORT) -> pd.DataFrame:
    """Model frequency and expected points of each option for last-tackle plays at or beyond x_min."""
    frame = decision_frame(events, model, points, min_support)
    zone = frame[frame["pos_x"] >= x_min]
    if zone.empty:
        raise InvalidInputError(f"no decision-labeled plays at or beyond x={x_min}")
    rows = []
    for name in PLAY_CLASSES:
        rows.append({"decision": name, "frequency": float(zone[f"p_{name}"].mean()),
                     "expected_points": float(zone[f"ep_{name}"].mean()), "plays": int((zone["chosen"] == name).sum())})
    kicks = rows[1:]
    kick_freq = sum(r["frequency"] for r in kicks)
    rows.append({
        "decision": "kick",
        "frequency": kick_freq,
        "expected_points": sum(r["frequency"] * r["expected_points"] for r in kicks) / kick_freq,
        "plays": sum(r["plays"] for r in kicks),
    })
    return pd.DataFrame(rows)


# ================================
# League table
# ================================

def league_table(events: Sequence[TackleEvent], dvoa: Optional[DvoaTable] = None) -> pd.DataFrame:
    """Standings with meters and, when given, DVOA columns; 2 points a win, 1 a draw."""
    if not events:
        raise InvalidInputError("league_table: empty dataset")
    results: Dict[str, Dict[int, Tuple[int, int]]] = {}
    meters: Dict[int, List[float]] = {}
    for e in events:
        results.setdefault(e.match_id, {})
        results[e.match_id][e.team_idx] = (e.final_score_for, e.final_score_against)
        results[e.match_id][e.opponent_idx] = (e.final_score_against, e.final_score_for)
        meters.setdefault(e.team_idx, [0.0, 0.0])[0] += e.meters_gained
        meters.setdefault(e.opponent_idx, [0.0, 0.0])[1] += e.meters_gained

    rows: Dict[int, Dict[str, float]] = {}
    for match in results.values():
        for team, (scored, conceded) in match.items():
            r = rows.setdefault(team, {"played": 0, "wins": 0, "draws": 0, "losses": 0,
                                       "points_for": 0, "points_against": 0})
            r["played"] += 1
            r["wins"] += scored > conceded
            r["draws"] += scored == conceded
            r["losses"] += scored < conceded
            r["points_for"] += scored
            r["points_against"] += conceded

    table = pd.DataFrame.from_dict(rows, orient="index").rename_axis("team_idx").reset_index()
    table["competition_points"] = 2 * table["wins"] + table["draws"]
    table["points_diff"] = table["points_for"] - table["points_against"]
    table["meters_for"] = table["team_idx"].map(lambda t: meters[t][0])
    table["meters_against"] = table["team_idx"].map(lambda t: meters[t][1])
    table["meter_diff"] = table["meters_for"] - table["meters_against"]
    if dvoa is not None:
        table = table.merge(dvoa.teams[["team_idx", "off_dvoa", "def_dvoa", "diff_dvoa"]], on="team_idx", how="left")
    table = table.sort_values(["competition_points", "points_diff", "team_idx"],
                              ascending=[False, False, True]).reset_index(drop=True)
    columns = ["team_idx", "played", "wins", "draws", "losses", "competition_points", "points_for",
               "points_against", "points_diff", "meters_for", "meters_against", "meter_diff"]
    if dvoa is not None:
        columns += ["off_dvoa", "def_dvoa", "diff_dvoa"]
    return table[columns]
