# rlstate/decision_model.py
"""
Last-tackle play selection: a 3-class logistic regressor over the raw encoded
context (indicators, raw position, dense context). No embeddings; the model
only ever sees events that carry a last_tackle_play label.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import softmax

from rlstate import nn_core as nn
from rlstate.errors import InvalidInputError, ShapeError
from rlstate.features import TACKLE_INDICATOR_WIDTH, EncodedBatch, EncodedExample, encode_events
from rlstate.log import get_logger
from rlstate.models import PLAY_CLASSES, EncodingConfig, LogisticConfig, TackleEvent

logger = get_logger(__name__)

Array = np.ndarray
N_CLASSES = len(PLAY_CLASSES)


@dataclass
class LogisticWeights:
    """Class scores are features @ weights.T + bias, classes in PLAY_CLASSES order."""
    weights: Array  # (3, F)
    bias: Array     # (3,)
    train_loss: Optional[float] = None
    test_loss: Optional[float] = None
    classes: Tuple[str, ...] = field(default=PLAY_CLASSES)

    @property
    def feature_width(self) -> int:
        return int(self.weights.shape[1])

    @classmethod
    def zeros(cls, feature_width: int) -> "LogisticWeights":
        return cls(weights=np.zeros((N_CLASSES, feature_width)), bias=np.zeros(N_CLASSES))


def feature_width(config: EncodingConfig) -> int:
    return 2 * config.indicator_width + TACKLE_INDICATOR_WIDTH + 2 + 2


def flatten_features(batch: Union[EncodedBatch, EncodedExample]) -> Array:
    """(n, F) design matrix: team, opponent and tackle indicators, raw position, dense context."""
    parts = [batch.team_indicator, batch.opponent_indicator, batch.tackle_indicator,
             batch.position_raw, batch.dense_context]
    if isinstance(batch, EncodedExample):
        return np.concatenate(parts)[None, :]
    return np.concatenate(parts, axis=1)


def predict_play(example: Union[EncodedExample, EncodedBatch, Array], w: LogisticWeights) -> Array:
    """Softmax over the three class scores: shape (3,) for one example, (n, 3) for a batch."""
    single = isinstance(example, EncodedExample) or (isinstance(example, np.ndarray) and example.ndim == 1)
    x = example if isinstance(example, np.ndarray) else flatten_features(example)
    x = np.atleast_2d(x)
    if x.shape[1] != w.feature_width:
        raise ShapeError(f"predict_play: feature width {x.shape[1]} != model width {w.feature_width}",
                         data={"features": x.shape[1], "weights": w.feature_width})
    probs = softmax(x @ w.weights.T + w.bias, axis=1)
    return probs[0] if single else probs


def play_labels(events: Sequence[TackleEvent]) -> Array:
    index = {name: i for i, name in enumerate(PLAY_CLASSES)}
    return np.array([index[e.last_tackle_play] for e in events], dtype=np.int64)


def decision_events(events: Sequence[TackleEvent]) -> list:
    return [e for e in events if e.last_tackle_play is not None]


def cross_entropy(w: LogisticWeights, features: Array, labels: Array) -> float:
    probs = predict_play(np.atleast_2d(features), w)
    return float(-np.mean(np.log(probs[np.arange(len(labels)), labels])))


def loss_node(weights: nn.ParamTensor, bias: nn.ParamTensor, features: Array, labels: Array,
              l2: float = 0.0) -> nn.Node:
    """Mean multinomial cross-entropy plus l2 * ||W||^2, recorded on the active tape."""
    onehot = np.zeros((len(labels), N_CLASSES))
    onehot[np.arange(len(labels)), labels] = 1.0
    log_probs = nn.log_softmax(nn.dense_forward(features, weights, bias), axis=-1)
    ce = nn.negate(nn.mean(nn.reduce_sum(nn.multiply(log_probs, onehot), axis=-1)))
    if l2 > 0:
        ce = nn.add(ce, nn.multiply(nn.reduce_sum(nn.square(weights)), l2))
    return ce


def train_logistic(train_events: Sequence[TackleEvent], encoding: EncodingConfig,
                   config: Optional[LogisticConfig] = None,
                   test_events: Optional[Sequence[TackleEvent]] = None) -> LogisticWeights:
    """Full-batch Adam on the cross-entropy of decision-labeled events.

    Events without last_tackle_play are dropped. The held-out loss is
    reported on test_events when given.
    """
    config = config or LogisticConfig()
    labeled = decision_events(train_events)
    if not labeled:
        raise InvalidInputError("train_logistic: no events carry a last_tackle_play label")

    x = flatten_features(encode_events(labeled, encoding))
    y = play_labels(labeled)
    counts = np.bincount(y, minlength=N_CLASSES)
    for name, count in zip(PLAY_CLASSES, counts):
        if count == 0:
            logger.warning(f"Class '{name}' absent from training data; its probability is set by the prior only")

    weights = nn.ParamTensor("logistic.weights", np.zeros((N_CLASSES, x.shape[1])))
    bias = nn.ParamTensor("logistic.bias", np.zeros(N_CLASSES))
    params = {"logistic.weights": weights, "logistic.bias": bias}
    state = nn.AdamState(learning_rate=config.learning_rate)

    logger.info(f"Training play-selection model on {len(labeled)} decisions ({x.shape[1]} features)")
    for epoch in range(config.epochs):
        with nn.Tape() as tape:
            loss = loss_node(weights, bias, x, y, config.l2)
        nn.backward(tape, loss, params.values())
        nn.adam_step(params, state)
        if (epoch + 1) % 100 == 0:
            logger.debug(f"logistic epoch {epoch + 1}: loss={float(loss.value):.6f}")

    fitted = LogisticWeights(weights=weights.values.copy(), bias=bias.values.copy())
    fitted.train_loss = cross_entropy(fitted, x, y)

    if test_events is not None:
        held_out = decision_events(test_events)
        if held_out:
            fitted.test_loss = cross_entropy(fitted, flatten_features(encode_events(held_out, encoding)),
                                             play_labels(held_out))
            logger.info(f"Play-selection test cross-entropy: {fitted.test_loss:.4f}")
        else:
            logger.warning("No decision-labeled events in the test set")
    return fitted
