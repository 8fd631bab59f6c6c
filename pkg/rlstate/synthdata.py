# rlstate/synthdata.py
"""
Synthetic rugby league with fully known dynamics.

Every tackle draws a try from a logistic try model, otherwise a handling
error or a Gaussian carry. Tackle six is a run, an offensive kick or a
defensive kick chosen by a softmax policy that is linear in the encoded
context. Ground truth for exTryTackle / exTrySet is computed exactly from
the same formulas by a dynamic program over a 0.25 m grid.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, softmax
from scipy.stats import norm

from rlstate.errors import InvalidInputError
from rlstate.log import get_logger
from rlstate.mdn import PROB_CLIP, MixtureParams
from rlstate.models import (FIELD_LENGTH, GAME_SECONDS, PLAY_CLASSES, SCORE_SCALE, LeagueSpec, TackleEvent,
                            TeamStrength)

logger = get_logger(__name__)

Array = np.ndarray

REDZONE_X = 75.0
MAX_X = 99.5
GRID_STEP = 0.25
GRID = np.arange(0.0, MAX_X + GRID_STEP / 2, GRID_STEP)
TRY_POINTS = 4
CONVERSION_POINTS = 2
# average points of one side over a match, accrued evenly on the clock
POINTS_PER_TEAM = 16.0
# variance of the remaining score grows by one converted try per expected point
SCORE_VARIANCE_PER_POINT = float(TRY_POINTS + CONVERSION_POINTS)
# remaining-score variance at full time
SCORE_VARIANCE_FLOOR = 1.0


# ================================
# Generator formulas
# ================================

def try_probability(spec: LeagueSpec, x: Array, tackle: Array, offense: Array, defense: Array,
                    redzone_defense: Array) -> Array:
    """Chance a carry from x scores on this tackle."""
    tm = spec.try_model
    x = np.asarray(x, dtype=np.float64)
    in_redzone = (x >= REDZONE_X).astype(np.float64)
    logit = (tm.intercept + tm.x * x / FIELD_LENGTH
             + tm.redzone * np.maximum(0.0, x - REDZONE_X) / (FIELD_LENGTH - REDZONE_X)
             + tm.tackle * (np.asarray(tackle) - 1)
             + tm.strength * (offense - defense - redzone_defense * in_redzone))
    return expit(logit)


def gain_mean(spec: LeagueSpec, x: Array, tackle: Array, offense: Array, defense: Array) -> Array:
    gm = spec.gain_model
    return gm.intercept + gm.x * np.asarray(x) / FIELD_LENGTH + gm.tackle * (np.asarray(tackle) - 1) \
        + gm.strength * (offense - defense)


def kick_try_probability(spec: LeagueSpec, x: Array, offense: Array, defense: Array) -> Array:
    k = spec.kicks
    return expit(k.offensive_try_intercept + k.offensive_try_x * np.asarray(x) / FIELD_LENGTH
                 + spec.try_model.strength * (offense - defense))


def policy_probabilities(spec: LeagueSpec, x: Array, score_diff: Array, time_remaining: Array,
                         run_bias: Array) -> Array:
    """(..., 3) probabilities of run / offensive kick / defensive kick; defensive kick is the reference."""
    pm = spec.policy
    x = np.asarray(x, dtype=np.float64) / FIELD_LENGTH
    s = np.asarray(score_diff, dtype=np.float64) / SCORE_SCALE
    t = np.asarray(time_remaining, dtype=np.float64) / GAME_SECONDS
    run = pm.run_intercept + run_bias + pm.run_x * x + pm.run_score * s + pm.run_time * t
    kick = pm.offensive_kick_intercept + pm.offensive_kick_x * x + pm.offensive_kick_score * s \
        + pm.offensive_kick_time * t
    run, kick = np.broadcast_arrays(run, kick)
    return softmax(np.stack([run, kick, np.zeros_like(run)], axis=-1), axis=-1)


def mean_seconds_per_tackle(spec: LeagueSpec) -> float:
    return 0.5 * (spec.seconds_per_tackle[0] + spec.seconds_per_tackle[1])


def neutral_strength(spec: LeagueSpec) -> TeamStrength:
    """League-average team."""
    return TeamStrength(
        offense=float(np.mean([t.offense for t in spec.teams])),
        defense=float(np.mean([t.defense for t in spec.teams])),
        redzone_defense=float(np.mean([t.redzone_defense for t in spec.teams])),
        run_bias=float(np.mean([t.run_bias for t in spec.teams])),
    )


# ================================
# Match simulation
# ================================

@dataclass
class TackleOutcome:
    play: Optional[str]
    meters: float
    try_scored: bool
    # who has the ball next and where; None while the set continues
    same_team_x: Optional[float] = None
    opponent_x: Optional[float] = None
    back_to_back: bool = False

    @property
    def set_over(self) -> bool:
        return self.try_scored or self.same_team_x is not None or self.opponent_x is not None


def _carry(spec: LeagueSpec, rng: np.random.Generator, x: float, tackle: int, attack: TeamStrength,
           defence: TeamStrength) -> Tuple[float, bool]:
    """(meters, handling_error) of a regular carry that did not score."""
    handling_error = rng.random() < spec.handling_error_probability
    mean = float(gain_mean(spec, x, tackle, attack.offense, defence.defense))
    gain = float(np.clip(rng.normal(mean, spec.gain_model.sigma), -x, MAX_X - x))
    return gain, handling_error


def play_tackle(spec: LeagueSpec, rng: np.random.Generator, x: float, tackle: int, attack: TeamStrength,
                defence: TeamStrength, score_diff: int, time_remaining: float) -> TackleOutcome:
    """One tackle of the generator dynamics."""
    play = None
    if tackle == 6:
        probs = policy_probabilities(spec, x, score_diff, time_remaining, attack.run_bias)
        play = PLAY_CLASSES[int(rng.choice(3, p=probs))]

    if play is None or play == "run":
        p_try = float(try_probability(spec, x, tackle, attack.offense, defence.defense, defence.redzone_defense))
        if rng.random() < p_try:
            return TackleOutcome(play, FIELD_LENGTH - x, True)
        gain, handling_error = _carry(spec, rng, x, tackle, attack, defence)
        if handling_error or tackle == 6:
            return TackleOutcome(play, gain, False, opponent_x=min(FIELD_LENGTH - (x + gain), MAX_X))
        return TackleOutcome(play, gain, False)

    kicks = spec.kicks
    if play == "offensive_kick":
        if rng.random() < float(kick_try_probability(spec, x, attack.offense, defence.defense)):
            return TackleOutcome(play, FIELD_LENGTH - x, True)
        if rng.random() < kicks.regain_probability:
            return TackleOutcome(play, 0.0, False, same_team_x=min(x + 10.0, 90.0), back_to_back=True)
        return TackleOutcome(play, 0.0, False, opponent_x=kicks.turnover_restart_x)

    # defensive kick: the opponent takes over deep in its own half
    landing = FIELD_LENGTH - x - kicks.defensive_kick_distance
    return TackleOutcome(play, 0.0, False, opponent_x=float(np.clip(landing, 5.0, 45.0)))


def simulate_set(spec: LeagueSpec, rng: np.random.Generator, x: float, tackle: int, attack: TeamStrength,
                 defence: TeamStrength, score_diff: int = 0, time_remaining: float = GAME_SECONDS
                 ) -> Tuple[bool, bool]:
    """(try on this tackle, try in this set) for one set played out from a context, ignoring full time."""
    step = mean_seconds_per_tackle(spec)
    first = None
    while True:
        outcome = play_tackle(spec, rng, x, tackle, attack, defence, score_diff, time_remaining)
        if first is None:
            first = outcome.try_scored
        if outcome.set_over:
            return first, outcome.try_scored
        x += outcome.meters
        tackle += 1
        time_remaining = max(time_remaining - step, 0.0)


def simulate_match(spec: LeagueSpec, home: int, away: int, rng: np.random.Generator,
                   match_id: Optional[str] = None, season_idx: int = 0, round_number: int = 1
                   ) -> List[TackleEvent]:
    """Play a match from kick-off to full time and back-fill set and match labels."""
    if home == away:
        raise InvalidInputError("a team cannot play itself")
    match_id = match_id or f"s{season_idx}-r{round_number:02d}-{home}v{away}"
    teams = {home: spec.teams[home], away: spec.teams[away]}
    score = {home: 0, away: 0}
    low, high = spec.seconds_per_tackle

    rows: List[Dict] = []
    possession, x, tackle, back_to_back = home, spec.kickoff_x, 1, False
    time_remaining = GAME_SECONDS
    set_id, set_start = 0, 0
    while time_remaining > 0:
        opponent = away if possession == home else home
        outcome = play_tackle(spec, rng, x, tackle, teams[possession], teams[opponent],
                              score[possession] - score[opponent], time_remaining)
        rows.append({
            "match_id": match_id, "season_idx": season_idx, "round": round_number,
            "team_idx": possession, "opponent_idx": opponent,
            "tackle_number": tackle, "back_to_back": back_to_back,
            "pos_x": float(x), "pos_y": float(rng.uniform(5.0, 65.0)),
            "time_remaining": float(time_remaining),
            "points_for": score[possession], "points_against": score[opponent],
            "meters_gained": float(outcome.meters), "try_this_tackle": outcome.try_scored,
            "last_tackle_play": outcome.play, "set_id": set_id,
        })
        time_remaining = max(time_remaining - float(rng.uniform(low, high)), 0.0)

        if not outcome.set_over:
            x, tackle = x + outcome.meters, tackle + 1
            continue

        set_try = outcome.try_scored
        for row in rows[set_start:]:
            row["try_this_set"] = set_try
        set_id, set_start = set_id + 1, len(rows)
        tackle = 1
        if outcome.try_scored:
            score[possession] += TRY_POINTS
            if rng.random() < spec.conversion_probability:
                score[possession] += CONVERSION_POINTS
            possession, x, back_to_back = opponent, spec.kickoff_x, False
        elif outcome.same_team_x is not None:
            x, back_to_back = outcome.same_team_x, True
        else:
            possession, x, back_to_back = opponent, outcome.opponent_x, False

    # a set cut by full time ends without a try
    for row in rows[set_start:]:
        row["try_this_set"] = False

    events = []
    for row in rows:
        final_for, final_against = score[row["team_idx"]], score[row["opponent_idx"]]
        events.append(TackleEvent(
            **row,
            score_diff=row["points_for"] - row["points_against"],
            final_score_for=final_for,
            final_score_against=final_against,
            possessing_team_won=final_for > final_against,
        ))
    logger.debug(f"{match_id}: {score[home]}-{score[away]} over {len(events)} tackles")
    return events


# ================================
# Seasons
# ================================

def round_robin_rounds(n_teams: int) -> List[List[Tuple[int, int]]]:
    """Double round robin by the circle method: 2 (n - 1) rounds of n / 2 (home, away) pairs."""
    if n_teams < 2 or n_teams % 2:
        raise InvalidInputError(f"round robin needs an even number of teams, got {n_teams}")
    ring = list(range(n_teams))
    first_half = []
    for r in range(n_teams - 1):
        pairs = []
        for i in range(n_teams // 2):
            a, b = ring[i], ring[n_teams - 1 - i]
            pairs.append((a, b) if (r + i) % 2 == 0 else (b, a))
        first_half.append(pairs)
        ring = [ring[0], ring[-1]] + ring[1:-1]
    second_half = [[(b, a) for a, b in pairs] for pairs in first_half]
    return first_half + second_half


def season_schedule(spec: LeagueSpec) -> List[List[Tuple[int, int]]]:
    """games_per_team rounds, cycling the double round robin when a season is longer."""
    rounds = round_robin_rounds(spec.n_teams)
    return [rounds[r % len(rounds)] for r in range(spec.games_per_team)]


def _match_rng(seed_root: int, season_idx: int, round_number: int, slot: int) -> np.random.Generator:
    return np.random.default_rng([seed_root, season_idx, round_number, slot])


def simulate_season(spec: LeagueSpec, rng: Optional[np.random.Generator] = None,
                    season_idx: int = 0) -> List[TackleEvent]:
    """Play one season. Every match draws from its own generator derived from (seed, season, round, slot)."""
    if spec.n_teams % 2:
        raise InvalidInputError(f"n_teams must be even to schedule a season, got {spec.n_teams}")
    seed_root = spec.seed if rng is None else int(rng.integers(2 ** 32))
    events: List[TackleEvent] = []
    for r, pairs in enumerate(season_schedule(spec), start=1):
        for slot, (home, away) in enumerate(pairs):
            events.extend(simulate_match(spec, home, away, _match_rng(seed_root, season_idx, r, slot),
                                         match_id=f"s{season_idx}-r{r:02d}-m{slot}",
                                         season_idx=season_idx, round_number=r))
    logger.info(f"Season {season_idx}: {len(events)} tackles over {spec.games_per_team} rounds")
    return events


def simulate_league(spec: LeagueSpec) -> List[TackleEvent]:
    events: List[TackleEvent] = []
    for season_idx in range(spec.n_seasons):
        events.extend(simulate_season(spec, season_idx=season_idx))
    return events


# ================================
# Ground truth
# ================================

@dataclass
class GroundTruth:
    ex_try_tackle: float
    ex_try_set: float
    play_probabilities: Tuple[float, float, float]


def _bin_edges() -> Array:
    mid = (GRID[:-1] + GRID[1:]) / 2
    return np.concatenate([[-np.inf], mid, [np.inf]])


def _transition_rows(spec: LeagueSpec, x: Array, tackle: int, offense: float, defense: float) -> Array:
    """P(next position in grid bin j | carry from x); clipping piles mass on the field ends."""
    loc = np.asarray(x, dtype=np.float64) + gain_mean(spec, x, tackle, offense, defense)
    cdf = norm.cdf((_bin_edges()[None, :] - loc[:, None]) / spec.gain_model.sigma)
    return np.diff(cdf, axis=1)


class SetValueModel:
    """Exact exTryTackle / exTrySet under the generator, by dynamic programming over tackles."""

    def __init__(self, spec: LeagueSpec, chunk_size: int = 2048):
        self.spec = spec
        self.chunk_size = chunk_size
        self._transitions = lru_cache(maxsize=64)(self._transition_matrix)

    def _transition_matrix(self, tackle: int, offense: float, defense: float) -> Array:
        return _transition_rows(self.spec, GRID, tackle, offense, defense)

    def _strengths(self, events: Sequence[TackleEvent], neutral: bool) -> Tuple[Array, Array, Array, Array]:
        spec = self.spec
        if neutral:
            avg = neutral_strength(spec)
            n = len(events)
            return (np.full(n, avg.offense), np.full(n, avg.defense),
                    np.full(n, avg.redzone_defense), np.full(n, avg.run_bias))
        return (np.array([spec.teams[e.team_idx].offense for e in events]),
                np.array([spec.teams[e.opponent_idx].defense for e in events]),
                np.array([spec.teams[e.opponent_idx].redzone_defense for e in events]),
                np.array([spec.teams[e.team_idx].run_bias for e in events]))

    def values(self, events: Sequence[TackleEvent], neutral: bool = False) -> Tuple[Array, Array]:
        """(exTryTackle, exTrySet) per event; with neutral both sides are the league-average team."""
        n = len(events)
        ex_tackle, ex_set = np.zeros(n), np.zeros(n)
        off, dfn, rz, bias = self._strengths(events, neutral)
        groups: Dict[Tuple[float, float, float], List[int]] = {}
        for i in range(n):
            groups.setdefault((off[i], dfn[i], rz[i]), []).append(i)
        for (o, d, r), members in groups.items():
            for start in range(0, len(members), self.chunk_size):
                idx = np.array(members[start:start + self.chunk_size])
                t, s = self._group_values([events[i] for i in idx], o, d, r, bias[idx])
                ex_tackle[idx], ex_set[idx] = t, s
        return ex_tackle, ex_set

    def _group_values(self, events: Sequence[TackleEvent], offense: float, defense: float,
                      redzone_defense: float, run_bias: Array) -> Tuple[Array, Array]:
        spec = self.spec
        m = len(events)
        x0 = np.array([e.pos_x for e in events])
        t0 = np.array([e.tackle_number for e in events])
        score = np.array([e.score_diff for e in events], dtype=np.float64)
        # policy evaluated at the expected clock on tackle six
        time6 = np.maximum(np.array([e.time_remaining for e in events])
                           - (6 - t0) * mean_seconds_per_tackle(spec), 0.0)

        def last_tackle_value(x: Array, cols: Array) -> Array:
            probs = policy_probabilities(spec, x, score[cols], time6[cols], run_bias[cols])
            run = try_probability(spec, x, 6, offense, defense, redzone_defense)
            kick = kick_try_probability(spec, x, offense, defense)
            return probs[..., 0] * run + probs[..., 1] * kick

        survive = 1.0 - spec.handling_error_probability
        ex_tackle = np.zeros(m)
        ex_set = np.zeros(m)
        reach = np.zeros((len(GRID), m))  # position distribution at tackle k, mass = P(set alive)
        cols = np.arange(m)
        for k in range(1, 7):
            starting = cols[t0 == k]
            if k < 6:
                p_grid = try_probability(spec, GRID, k, offense, defense, redzone_defense)
                ex_set += p_grid @ reach
                p_start = try_probability(spec, x0[starting], k, offense, defense, redzone_defense)
                ex_tackle[starting] = p_start
                ex_set[starting] += p_start
                moved = self._transitions(k, offense, defense).T @ (reach * ((1.0 - p_grid) * survive)[:, None])
                if len(starting):
                    rows = _transition_rows(spec, x0[starting], k, offense, defense)
                    moved[:, starting] += (rows * ((1.0 - p_start) * survive)[:, None]).T
                reach = moved
            else:
                ex_set += np.sum(reach * last_tackle_value(GRID[:, None], cols[None, :]), axis=0)
                v_start = last_tackle_value(x0[starting], starting)
                ex_tackle[starting] = v_start
                ex_set[starting] += v_start
        return ex_tackle, ex_set


def ground_truth(spec: LeagueSpec, context: TackleEvent) -> GroundTruth:
    """True try probabilities and last-tackle policy for one context."""
    ex_tackle, ex_set = SetValueModel(spec).values([context])
    team = spec.teams[context.team_idx]
    probs = policy_probabilities(spec, context.pos_x, context.score_diff, context.time_remaining, team.run_bias)
    return GroundTruth(ex_try_tackle=float(ex_tackle[0]), ex_try_set=float(ex_set[0]),
                       play_probabilities=tuple(float(p) for p in probs))


class GroundTruthPredictor:
    """Single-component predictor built from the generator formulas.

    Try probabilities and play selection are exact; meters and final
    scores are moment-matched Gaussians.
    """

    def __init__(self, spec: LeagueSpec, points_per_team: float = POINTS_PER_TEAM):
        self.spec = spec
        self.score_rate = points_per_team / GAME_SECONDS
        self.set_values = SetValueModel(spec)

    def mixtures(self, events: Sequence[TackleEvent], neutral_teams: bool = False) -> MixtureParams:
        spec = self.spec
        n = len(events)
        ex_tackle, ex_set = self.set_values.values(events, neutral=neutral_teams)
        off, dfn, _, _ = self.set_values._strengths(events, neutral_teams)
        x = np.array([e.pos_x for e in events])
        tackle = np.array([e.tackle_number for e in events])
        carry = np.clip(gain_mean(spec, x, tackle, off, dfn), -x, MAX_X - x)
        meters = ex_tackle * (FIELD_LENGTH - x) + (1.0 - ex_tackle) * carry

        time_left = np.array([e.time_remaining for e in events])
        expected_more = self.score_rate * time_left
        spread = np.sqrt(SCORE_VARIANCE_PER_POINT * expected_more + SCORE_VARIANCE_FLOOR)
        score_for = np.array([e.points_for for e in events]) + expected_more
        score_against = np.array([e.points_against for e in events]) + expected_more
        win = norm.cdf((score_for - score_against) / np.sqrt(2.0) / spread)

        mu = np.stack([meters, score_for, score_against], axis=-1)[:, None, :]
        sigma = np.stack([np.full(n, spec.gain_model.sigma), spread, spread], axis=-1)[:, None, :]
        p = np.clip(np.stack([ex_tackle, ex_set, win], axis=-1), PROB_CLIP, 1.0 - PROB_CLIP)[:, None, :]
        return MixtureParams(weights=np.ones((n, 1)), mu=mu, sigma=sigma, p=p)

    def play_probabilities(self, events: Sequence[TackleEvent]) -> Array:
        spec = self.spec
        return policy_probabilities(
            spec,
            np.array([e.pos_x for e in events]),
            np.array([e.score_diff for e in events]),
            np.array([e.time_remaining for e in events]),
            np.array([spec.teams[e.team_idx].run_bias for e in events]),
        )
