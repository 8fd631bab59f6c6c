# rlstate/inference.py
"""
Queries on predicted distributions: marginals, CDF, quantiles, intervals,
samples, and the predictor objects the analytics run against.
"""

from dataclasses import dataclass
from typing import Optional, Protocol, Sequence, Tuple, Union, runtime_checkable

import numpy as np
from scipy.optimize import bisect
from scipy.special import ndtr
from scipy.stats import norm

from rlstate.decision_model import LogisticWeights, predict_play
from rlstate.errors import InvalidInputError
from rlstate.features import encode_events
from rlstate.io import Checkpoint
from rlstate.mdn import BINARY_DIMS, CONTINUOUS_DIMS, MdnModel, MixtureParams, forward_batched
from rlstate.models import PLAY_CLASSES, DistributionSummary, StateSummary, TackleEvent

Array = np.ndarray
FloatOrArray = Union[float, Array]

BRACKET_SIGMAS = 10.0
BISECT_MAXITER = 200


@dataclass(frozen=True)
class ScalarMixture:
    """One-dimensional Gaussian mixture."""
    weights: Array
    means: Array
    stds: Array

    def __post_init__(self):
        for name in ("weights", "means", "stds"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=np.float64)))
        if not (self.weights.shape == self.means.shape == self.stds.shape):
            raise InvalidInputError(f"mixture arrays disagree: {self.weights.shape}, {self.means.shape}, "
                                    f"{self.stds.shape}")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise InvalidInputError(f"mixture weights sum to {self.weights.sum()}, not 1")
        if np.any(self.stds <= 0):
            raise InvalidInputError("mixture standard deviations must be positive")

    @property
    def bracket(self) -> Tuple[float, float]:
        spread = BRACKET_SIGMAS * float(self.stds.max())
        return float(self.means.min()) - spread, float(self.means.max()) + spread


def _dim_index(dim: Union[str, int], names: Tuple[str, ...]) -> int:
    if isinstance(dim, int) and 0 <= dim < len(names):
        return dim
    if dim in names:
        return names.index(dim)
    raise InvalidInputError(f"unknown dimension '{dim}'. Supported: {', '.join(names)}")


# ================================
# Marginals
# ================================

def marginal_continuous(mix: MixtureParams, dim: Union[str, int]) -> ScalarMixture:
    d = _dim_index(dim, CONTINUOUS_DIMS)
    return ScalarMixture(mix.weights, mix.mu[..., d], mix.sigma[..., d])


def marginal_score_diff(mix: MixtureParams) -> ScalarMixture:
    """Final score differential; component-wise difference of independent Gaussians."""
    return ScalarMixture(
        mix.weights,
        mix.mu[..., 1] - mix.mu[..., 2],
        np.sqrt(mix.sigma[..., 1] ** 2 + mix.sigma[..., 2] ** 2),
    )


def bernoulli_mean(mix: MixtureParams, dim: Union[str, int]) -> FloatOrArray:
    """Mixture-weighted success probability; vectorized over leading batch axes."""
    d = _dim_index(dim, BINARY_DIMS)
    out = np.sum(mix.weights * mix.p[..., d], axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def continuous_means(mix: MixtureParams) -> Array:
    """(..., 3) mixture means of meters, score_for and score_against."""
    return np.sum(mix.weights[..., None] * mix.mu, axis=-2)


def marginal_cdf(mix: MixtureParams, dim: Union[str, int], v: FloatOrArray) -> Array:
    """CDF of a continuous marginal at v, one value per batch row."""
    d = _dim_index(dim, CONTINUOUS_DIMS)
    v = np.asarray(v, dtype=np.float64)
    return np.sum(mix.weights * ndtr((v[..., None] - mix.mu[..., d]) / mix.sigma[..., d]), axis=-1)


# ================================
# Scalar mixture queries
# ================================

def mixture_cdf(m: ScalarMixture, v: FloatOrArray) -> FloatOrArray:
    v = np.asarray(v, dtype=np.float64)
    out = np.sum(m.weights * ndtr((v[..., None] - m.means) / m.stds), axis=-1)
    return float(out) if out.ndim == 0 else out


def percentile_of(m: ScalarMixture, observed: FloatOrArray) -> FloatOrArray:
    return mixture_cdf(m, observed)


def mixture_pdf(m: ScalarMixture, v: FloatOrArray) -> FloatOrArray:
    v = np.asarray(v, dtype=np.float64)
    out = np.sum(m.weights * norm.pdf(v[..., None], loc=m.means, scale=m.stds), axis=-1)
    return float(out) if out.ndim == 0 else out


def mixture_quantile(m: ScalarMixture, q: float) -> float:
    """Invert the CDF by bisection over the +-10 sigma bracket."""
    if not 0.0 < q < 1.0:
        raise InvalidInputError(f"quantile level must lie in (0, 1), got {q}")
    lo, hi = m.bracket

    def f(v: float) -> float:
        return mixture_cdf(m, v) - q

    if f(lo) >= 0:
        return lo
    if f(hi) <= 0:
        return hi
    return float(bisect(f, lo, hi, xtol=1e-12, maxiter=BISECT_MAXITER, disp=False))


def mixture_interval(m: ScalarMixture, lo: float = 0.1, hi: float = 0.9) -> Tuple[float, float, float]:
    """(q_lo, median, q_hi)."""
    return mixture_quantile(m, lo), mixture_quantile(m, 0.5), mixture_quantile(m, hi)


def mixture_mean(m: ScalarMixture) -> float:
    return float(np.sum(m.weights * m.means))


def mixture_mode(m: ScalarMixture, n_grid: int = 4001) -> float:
    """Most likely value on a grid over the bracket; may differ from the mean for multimodal mixtures."""
    lo, hi = m.bracket
    grid = np.linspace(lo, hi, n_grid)
    return float(grid[np.argmax(mixture_pdf(m, grid))])


def sample(m: ScalarMixture, rng: np.random.Generator, n: int) -> Array:
    if n < 1:
        raise InvalidInputError(f"sample size must be >= 1, got {n}")
    components = rng.choice(len(m.weights), size=n, p=m.weights)
    return rng.normal(m.means[components], m.stds[components])


def title_probability(m: ScalarMixture, margin: float) -> float:
    """Chance the final differential exceeds `margin`."""
    return 1.0 - mixture_cdf(m, margin)


# ================================
# Summaries
# ================================

def summarize(m: ScalarMixture) -> DistributionSummary:
    q10, q50, q90 = mixture_interval(m)
    return DistributionSummary(mean=mixture_mean(m), q10=q10, q50=q50, q90=q90)


def state_summary(mix: MixtureParams, play_probs: Optional[Array] = None) -> StateSummary:
    """Distribution summary of the full game-state vector for one tackle."""
    return StateSummary(
        meters=summarize(marginal_continuous(mix, "meters")),
        score_for=summarize(marginal_continuous(mix, "score_for")),
        score_against=summarize(marginal_continuous(mix, "score_against")),
        score_diff=summarize(marginal_score_diff(mix)),
        ex_try_tackle=bernoulli_mean(mix, "try_tackle"),
        ex_try_set=bernoulli_mean(mix, "try_set"),
        win_probability=bernoulli_mean(mix, "win"),
        play_selection=None if play_probs is None else {
            name: float(p) for name, p in zip(PLAY_CLASSES, play_probs)
        },
    )


# ================================
# Predictors
# ================================

@runtime_checkable
class StatePredictor(Protocol):
    """Anything that maps tackle contexts to game-state mixtures."""

    def mixtures(self, events: Sequence[TackleEvent], neutral_teams: bool = False) -> MixtureParams:
        ...

    def play_probabilities(self, events: Sequence[TackleEvent]) -> Array:
        ...


class GameStatePredictor:
    """The trained MDN plus the play-selection model."""

    def __init__(self, model: MdnModel, logistic: Optional[LogisticWeights] = None):
        self.model = model
        self.logistic = logistic

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> "GameStatePredictor":
        return cls(checkpoint.model, checkpoint.logistic)

    @property
    def encoding(self):
        return self.model.config

    def mixtures(self, events: Sequence[TackleEvent], neutral_teams: bool = False) -> MixtureParams:
        return forward_batched(encode_events(events, self.encoding, neutral_teams=neutral_teams), self.model)

    def play_probabilities(self, events: Sequence[TackleEvent]) -> Array:
        if self.logistic is None:
            raise InvalidInputError("checkpoint carries no play-selection model")
        return predict_play(encode_events(events, self.encoding), self.logistic)

    def predict(self, event: TackleEvent) -> StateSummary:
        """Summary for one tackle; play selection only on the last tackle."""
        mix = self.mixtures([event]).row(0)
        play_probs = None
        if event.tackle_number == 6 and self.logistic is not None:
            play_probs = self.play_probabilities([event])[0]
        return state_summary(mix, play_probs)
