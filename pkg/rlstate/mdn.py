# rlstate/mdn.py
"""
Wide-and-deep mixture density network over the game-state vector.

Inputs: team / opponent / tackle indicators through embedding tables, field
position through a 2 -> 50 -> 50 rectifier stack and again raw, plus dense
context. Two rectifier layers form the trunk; the output layer emits, per
mixture component, a weight logit, (mu, sigma) for meters and both final
scores, and a Bernoulli logit for try-this-tackle, try-this-set and win.
"""

from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Tuple, Union

import numpy as np
from scipy.special import expit

from rlstate import nn_core as nn
from rlstate.errors import InvalidInputError, VocabMismatchError
from rlstate.features import TACKLE_INDICATOR_WIDTH, EncodedBatch, EncodedExample
from rlstate.log import get_logger
from rlstate.models import EncodingConfig, GameStateTarget, ModelArchitecture

logger = get_logger(__name__)

Array = np.ndarray
HALF_LOG_TWO_PI = 0.5 * np.log(2.0 * np.pi)
# probabilities and mixture weights stay inside (0, 1) after saturation
PROB_CLIP = 1e-6

CONTINUOUS_DIMS = ("meters", "score_for", "score_against")
BINARY_DIMS = ("try_tackle", "try_set", "win")


@dataclass
class MixtureParams:
    """Mixture over the game-state vector. Leading batch axes are allowed."""
    weights: Array  # (..., K)
    mu: Array       # (..., K, 3)
    sigma: Array    # (..., K, 3)
    p: Array        # (..., K, 3)

    @property
    def n_components(self) -> int:
        return int(self.weights.shape[-1])

    def __len__(self) -> int:
        if self.weights.ndim == 1:
            raise TypeError("single mixture has no length")
        return int(self.weights.shape[0])

    def row(self, i: int) -> "MixtureParams":
        return MixtureParams(self.weights[i], self.mu[i], self.sigma[i], self.p[i])

    def check(self, sigma_floor: float = 1e-3, tol: float = 1e-9) -> None:
        if np.any(np.abs(self.weights.sum(axis=-1) - 1.0) > tol):
            raise InvalidInputError("mixture weights must sum to 1")
        if np.any(self.weights <= 0) or (self.n_components > 1 and np.any(self.weights >= 1)):
            raise InvalidInputError("mixture weights must lie in (0, 1)")
        if np.any(self.sigma < sigma_floor * (1 - 1e-12)):
            raise InvalidInputError(f"sigma below floor {sigma_floor}")
        if np.any(self.p <= 0) or np.any(self.p >= 1):
            raise InvalidInputError("Bernoulli parameters must lie in (0, 1)")


@dataclass
class MdnModel:
    arch: ModelArchitecture
    config: EncodingConfig
    params: Dict[str, nn.ParamTensor]


# ================================
# Parameters
# ================================

def param_shapes(arch: ModelArchitecture, config: EncodingConfig) -> "OrderedDict[str, Tuple[int, ...]]":
    """Named parameter sections; the first dotted component is the checkpoint section."""
    width = config.indicator_width
    shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()
    shapes["embeddings.team"] = (width, arch.embedding_dim_team)
    shapes["embeddings.opponent"] = (width, arch.embedding_dim_team)
    shapes["embeddings.tackle"] = (TACKLE_INDICATOR_WIDTH, arch.embedding_dim_tackle)
    fan_in = 2
    for layer in range(arch.spatial_layers):
        shapes[f"spatial.{layer}.weight"] = (arch.spatial_hidden, fan_in)
        shapes[f"spatial.{layer}.bias"] = (arch.spatial_hidden,)
        fan_in = arch.spatial_hidden
    fan_in = arch.trunk_input_width
    for layer in range(arch.trunk_layers):
        shapes[f"trunk.{layer}.weight"] = (arch.trunk_hidden, fan_in)
        shapes[f"trunk.{layer}.bias"] = (arch.trunk_hidden,)
        fan_in = arch.trunk_hidden
    shapes["output.weight"] = (arch.output_width, arch.trunk_hidden)
    shapes["output.bias"] = (arch.output_width,)
    return shapes


def init_model(arch: ModelArchitecture, config: EncodingConfig, seed: int) -> MdnModel:
    """Fan-scaled uniform weights from a seeded generator, zero biases."""
    rng = np.random.default_rng(seed)
    params: Dict[str, nn.ParamTensor] = {}
    for name, shape in param_shapes(arch, config).items():
        values = np.zeros(shape) if name.endswith(".bias") else nn.glorot_uniform(shape, rng)
        params[name] = nn.ParamTensor(name, values)
    logger.debug(f"Initialized MDN with {nn.parameter_count(params)} parameters (seed={seed})")
    return MdnModel(arch=arch, config=config, params=params)


# ================================
# Forward pass
# ================================

@dataclass
class MixtureNodes:
    log_weights: nn.Node
    mu: nn.Node
    sigma: nn.Node
    p_logits: nn.Node


def _as_batch(example: Union[EncodedExample, EncodedBatch]) -> Tuple[EncodedBatch, bool]:
    if isinstance(example, EncodedExample):
        return EncodedBatch.from_examples([example]), True
    return example, False


def _forward_nodes(batch: EncodedBatch, model: MdnModel) -> MixtureNodes:
    arch, p = model.arch, model.params
    width = model.config.indicator_width
    if batch.team_indicator.shape[-1] != width or batch.opponent_indicator.shape[-1] != width:
        raise VocabMismatchError(
            f"indicator width {batch.team_indicator.shape[-1]} does not match model vocabulary width {width}")

    team = nn.embed(batch.team_indicator, p["embeddings.team"])
    opponent = nn.embed(batch.opponent_indicator, p["embeddings.opponent"])
    tackle = nn.embed(batch.tackle_indicator, p["embeddings.tackle"])

    spatial: nn.NodeLike = batch.position_raw
    for layer in range(arch.spatial_layers):
        spatial = nn.relu(nn.dense_forward(spatial, p[f"spatial.{layer}.weight"], p[f"spatial.{layer}.bias"]))

    h = nn.concat([team, opponent, tackle, spatial, batch.position_raw, batch.dense_context])
    for layer in range(arch.trunk_layers):
        h = nn.relu(nn.dense_forward(h, p[f"trunk.{layer}.weight"], p[f"trunk.{layer}.bias"]))
    raw = nn.dense_forward(h, p["output.weight"], p["output.bias"])

    n, k, d = len(batch), arch.n_mixtures, arch.continuous_dims
    logits = nn.take(raw, 0, k)
    mu_raw = nn.reshape(nn.take(raw, k, k + k * d), (n, k, d))
    sigma_raw = nn.reshape(nn.take(raw, k + k * d, k + 2 * k * d), (n, k, d))
    p_raw = nn.reshape(nn.take(raw, k + 2 * k * d, arch.output_width), (n, k, arch.binary_dims))

    scale = np.asarray(arch.output_scale)
    shift = np.asarray(arch.output_offset) + batch.score_anchor[:, None, :]
    mu = nn.add(nn.multiply(mu_raw, scale), shift)
    sigma = nn.add(nn.multiply(nn.softplus(sigma_raw), scale), arch.sigma_floor)
    return MixtureNodes(nn.log_softmax(logits), mu, sigma, p_raw)


def forward(example: Union[EncodedExample, EncodedBatch], model: MdnModel) -> MixtureParams:
    """MixtureParams for one example (no batch axis) or a batch (leading axis)."""
    batch, single = _as_batch(example)
    nodes = _forward_nodes(batch, model)
    weights = np.maximum(np.exp(nodes.log_weights.value), PROB_CLIP)
    mix = MixtureParams(
        weights=weights / weights.sum(axis=-1, keepdims=True),
        mu=nodes.mu.value,
        sigma=nodes.sigma.value,
        p=np.clip(expit(nodes.p_logits.value), PROB_CLIP, 1.0 - PROB_CLIP),
    )
    return mix.row(0) if single else mix


# ================================
# Likelihood
# ================================

def _component_log_likelihood(log_weights: nn.NodeLike, mu: nn.NodeLike, sigma: nn.NodeLike,
                              log_p: nn.NodeLike, log_not_p: nn.NodeLike,
                              y_cont: Array, y_bin: Array) -> nn.Node:
    """log pi_k + sum_d log N(y_d) + sum_d log Bernoulli(y_d), shape (n, K)."""
    y_cont = y_cont[:, None, :]
    y_bin = y_bin[:, None, :]
    z = nn.divide(nn.subtract(y_cont, mu), sigma)
    gauss = nn.subtract(nn.multiply(nn.square(z), -0.5), nn.add(nn.log(sigma), HALF_LOG_TWO_PI))
    bern = nn.add(nn.multiply(log_p, y_bin), nn.multiply(log_not_p, 1.0 - y_bin))
    return nn.add(log_weights, nn.reduce_sum(nn.add(gauss, bern), axis=-1))


def _nonfinite_report(component_ll: Array) -> str:
    bad = np.argwhere(~np.isfinite(component_ll))
    row, comp = bad[0][0], bad[0][-1]
    return f"non-finite log-likelihood at example {row}, mixture component {comp}"


def joint_nll(mix: MixtureParams, target: Union[GameStateTarget, Tuple[Array, Array]]) -> Union[float, Array]:
    """Negative log-likelihood of an observed game state under a mixture.

    Accepts a single mixture with a GameStateTarget, or batched mixtures with
    (continuous_targets, binary_targets) arrays.
    """
    if isinstance(target, GameStateTarget):
        y_cont = np.array([[target.y_m, target.y_s_for, target.y_s_against]])
        y_bin = np.array([[target.y_tt, target.y_ts, target.y_w]], dtype=np.float64)
    else:
        y_cont, y_bin = (np.atleast_2d(np.asarray(t, dtype=np.float64)) for t in target)
    single = mix.weights.ndim == 1
    weights = np.atleast_2d(mix.weights)
    mu = mix.mu[None] if single else mix.mu
    sigma = mix.sigma[None] if single else mix.sigma
    p = mix.p[None] if single else mix.p

    with np.errstate(divide="ignore"):
        comp = _component_log_likelihood(np.log(weights), mu, sigma, np.log(p), np.log1p(-p), y_cont, y_bin)
    if not np.all(np.isfinite(comp.value)):
        raise InvalidInputError(_nonfinite_report(comp.value))
    nll = -nn.log_sum_exp(comp, axis=-1).value
    return float(nll[0]) if single else nll


def _loss_nodes(batch: EncodedBatch, model: MdnModel) -> nn.Node:
    nodes = _forward_nodes(batch, model)
    # log sigmoid(z) = -softplus(-z), log(1 - sigmoid(z)) = -softplus(z)
    log_p = nn.negate(nn.softplus(nn.negate(nodes.p_logits)))
    log_not_p = nn.negate(nn.softplus(nodes.p_logits))
    comp = _component_log_likelihood(nodes.log_weights, nodes.mu, nodes.sigma, log_p, log_not_p,
                                     batch.continuous_targets, batch.binary_targets)
    return nn.negate(nn.log_sum_exp(comp, axis=-1))


def batch_loss(batch: EncodedBatch, model: MdnModel) -> nn.Node:
    """Mean joint NLL over a batch, recorded on the active tape."""
    if len(batch) == 0:
        raise InvalidInputError("batch_loss: empty batch")
    return nn.mean(_loss_nodes(batch, model))


def per_example_nll(batch: EncodedBatch, model: MdnModel, chunk_size: int = 8192) -> Array:
    """Joint NLL of every example, evaluated in chunks without a tape."""
    if len(batch) == 0:
        raise InvalidInputError("per_example_nll: empty batch")
    parts = []
    for start in range(0, len(batch), chunk_size):
        parts.append(_loss_nodes(batch.take(slice(start, start + chunk_size)), model).value)
    return np.concatenate(parts)


def mean_nll(batch: EncodedBatch, model: MdnModel) -> float:
    return float(np.mean(per_example_nll(batch, model)))


def forward_batched(batch: EncodedBatch, model: MdnModel, chunk_size: int = 8192) -> MixtureParams:
    parts = [forward(batch.take(slice(s, s + chunk_size)), model) for s in range(0, len(batch), chunk_size)]
    return MixtureParams(
        weights=np.concatenate([m.weights for m in parts]),
        mu=np.concatenate([m.mu for m in parts]),
        sigma=np.concatenate([m.sigma for m in parts]),
        p=np.concatenate([m.p for m in parts]),
    )
