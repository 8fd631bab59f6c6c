# rlstate/training.py
"""
Match-level splitting, the minibatch Adam loop with early stopping, and the
evaluation report for a trained MDN.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from rlstate import nn_core as nn
from rlstate.decision_model import LogisticWeights, decision_events, train_logistic
from rlstate.errors import DivergenceError, InvalidInputError
from rlstate.features import build_vocab, encode_events
from rlstate.inference import bernoulli_mean, continuous_means
from rlstate.io import Checkpoint
from rlstate.log import get_logger
from rlstate.mdn import BINARY_DIMS, MdnModel, batch_loss, forward_batched, init_model, mean_nll
from rlstate.models import (CalibrationBin, EncodingConfig, EvalReport, HeadMetrics, TackleEvent,
                            TrainConfig)

logger = get_logger(__name__)

Array = np.ndarray


class EpochRecord(BaseModel):
    epoch: int
    train_nll: float
    val_nll: float
    best_val_nll: float


@dataclass
class TrainResult:
    model: MdnModel
    history: List[EpochRecord]
    best_epoch: int


@dataclass
class TrainingRun:
    checkpoint: Checkpoint
    history: List[EpochRecord]
    report: EvalReport


# ================================
# Splitting
# ================================

def split_dataset(events: Sequence[TackleEvent], ratio: float, seed: int) -> Tuple[List[TackleEvent], List[TackleEvent]]:
    """Split by match: every tackle of a match lands on the same side. Event order is preserved."""
    if not 0.0 < ratio < 1.0:
        raise InvalidInputError(f"split ratio must lie in (0, 1), got {ratio}")
    match_ids = sorted({e.match_id for e in events})
    if len(match_ids) < 2:
        raise InvalidInputError(f"need at least 2 matches to split, found {len(match_ids)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(match_ids))
    n_train = min(max(int(round(ratio * len(match_ids))), 1), len(match_ids) - 1)
    train_ids = {match_ids[i] for i in order[:n_train]}
    train = [e for e in events if e.match_id in train_ids]
    test = [e for e in events if e.match_id not in train_ids]
    return train, test


# ================================
# Training loop
# ================================

def _check_finite(value: float, what: str, epoch: int, batch: Optional[int] = None) -> None:
    if not np.isfinite(value):
        where = f"epoch {epoch}" + (f", batch {batch}" if batch is not None else "")
        raise DivergenceError(f"non-finite {what} at {where}", epoch=epoch, batch=batch)


def train(train_events: Sequence[TackleEvent], config: Optional[TrainConfig] = None,
          encoding: Optional[EncodingConfig] = None) -> TrainResult:
    """Minibatch Adam on the mean joint NLL; returns the best-validation parameters.

    A validation slice of whole matches is carved from train_events. With a
    single match the training data doubles as validation.
    """
    config = config or TrainConfig()
    if not train_events:
        raise InvalidInputError("train: empty training set")
    encoding = encoding or build_vocab(train_events)

    if len({e.match_id for e in train_events}) >= 2:
        fit_events, val_events = split_dataset(train_events, 1.0 - config.validation_ratio, config.seed + 1)
    else:
        fit_events, val_events = list(train_events), list(train_events)
    fit_batch = encode_events(fit_events, encoding)
    val_batch = encode_events(val_events, encoding)

    model = init_model(config.architecture, encoding, config.seed)
    state = nn.AdamState(learning_rate=config.learning_rate, beta1=config.beta1,
                         beta2=config.beta2, eps=config.eps)
    rng = np.random.default_rng(config.seed)

    def evaluate_epoch(epoch: int) -> Tuple[float, float]:
        train_nll = mean_nll(fit_batch, model)
        val_nll = mean_nll(val_batch, model)
        _check_finite(train_nll, "training NLL", epoch)
        _check_finite(val_nll, "validation NLL", epoch)
        return train_nll, val_nll

    train_nll, best_val = evaluate_epoch(0)
    history = [EpochRecord(epoch=0, train_nll=train_nll, val_nll=best_val, best_val_nll=best_val)]
    best_params = nn.clone_params(model.params)
    best_epoch, stale = 0, 0
    logger.info(f"Training MDN on {len(fit_batch)} tackles ({len(val_batch)} validation), "
                f"{nn.parameter_count(model.params)} parameters; initial NLL {train_nll:.4f}")

    n = len(fit_batch)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for b, start in enumerate(range(0, n, config.batch_size)):
            batch = fit_batch.take(order[start:start + config.batch_size])
            with nn.Tape() as tape:
                loss = batch_loss(batch, model)
            _check_finite(float(loss.value), "batch loss", epoch, b)
            nn.backward(tape, loss, model.params.values())
            try:
                nn.adam_step(model.params, state)
            except DivergenceError as e:
                raise DivergenceError(f"{e.message} (epoch {epoch}, batch {b})", epoch=epoch, batch=b) from None
            logger.debug(f"epoch {epoch} batch {b}: loss={float(loss.value):.5f}")

        train_nll, val_nll = evaluate_epoch(epoch)
        if val_nll < best_val:
            best_val, best_epoch, stale = val_nll, epoch, 0
            best_params = nn.clone_params(model.params)
        else:
            stale += 1
        history.append(EpochRecord(epoch=epoch, train_nll=train_nll, val_nll=val_nll, best_val_nll=best_val))
        logger.info(f"epoch {epoch}/{config.epochs}: train_nll={train_nll:.4f} val_nll={val_nll:.4f}")
        if stale >= config.patience:
            logger.info(f"Early stop after epoch {epoch}; best validation NLL {best_val:.4f} at epoch {best_epoch}")
            break

    return TrainResult(model=MdnModel(config.architecture, encoding, best_params),
                       history=history, best_epoch=best_epoch)


def history_frame(history: Sequence[EpochRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in history], columns=["epoch", "train_nll", "val_nll"])


# ================================
# Evaluation
# ================================

def calibration_table(probs: Array, outcomes: Array, n_bins: int = 10) -> List[CalibrationBin]:
    """Equal-width bins over [0, 1]; the last bin is closed on the right."""
    probs = np.asarray(probs, dtype=np.float64)
    outcomes = np.asarray(outcomes, dtype=np.float64)
    index = np.minimum((probs * n_bins).astype(np.int64), n_bins - 1)
    table = []
    for i in range(n_bins):
        mask = index == i
        count = int(mask.sum())
        table.append(CalibrationBin(
            lower=i / n_bins,
            upper=(i + 1) / n_bins,
            count=count,
            mean_predicted=float(probs[mask].mean()) if count else None,
            empirical_rate=float(outcomes[mask].mean()) if count else None,
        ))
    return table


def expected_calibration_error(table: Sequence[CalibrationBin]) -> float:
    """Count-weighted mean of |predicted - empirical| over non-empty bins."""
    total = sum(b.count for b in table)
    if total == 0:
        return 0.0
    return float(sum(b.count * abs(b.mean_predicted - b.empirical_rate) for b in table if b.count) / total)


def head_metrics(probs: Array, outcomes: Array, n_bins: int = 10) -> HeadMetrics:
    table = calibration_table(probs, outcomes, n_bins)
    return HeadMetrics(
        brier=float(np.mean((np.asarray(probs) - np.asarray(outcomes, dtype=np.float64)) ** 2)),
        calibration_error=expected_calibration_error(table),
        calibration=table,
    )


def _rmse(predicted: Array, actual: Array) -> float:
    return float(np.sqrt(np.mean((predicted - actual) ** 2)))


def evaluate(model: Union[Checkpoint, MdnModel], test_events: Sequence[TackleEvent]) -> EvalReport:
    """Test NLL, RMSE of the predicted means and Brier/calibration for each binary head."""
    if not test_events:
        raise InvalidInputError("evaluate: empty test set")
    if isinstance(model, Checkpoint):
        model = model.model
    batch = encode_events(test_events, model.config)
    mix = forward_batched(batch, model)

    means = continuous_means(mix)
    y = batch.continuous_targets
    heads: Dict[str, HeadMetrics] = {
        name: head_metrics(bernoulli_mean(mix, d), batch.binary_targets[:, d]) for d, name in enumerate(BINARY_DIMS)
    }
    report = EvalReport(
        n_events=len(batch),
        test_nll=mean_nll(batch, model),
        rmse_meters=_rmse(means[:, 0], y[:, 0]),
        rmse_score_for=_rmse(means[:, 1], y[:, 1]),
        rmse_score_against=_rmse(means[:, 2], y[:, 2]),
        rmse_score_diff=_rmse(means[:, 1] - means[:, 2], y[:, 1] - y[:, 2]),
        heads=heads,
    )
    logger.info(f"Evaluated {report.n_events} tackles: test NLL {report.test_nll:.4f}")
    return report


def train_models(events: Sequence[TackleEvent], config: Optional[TrainConfig] = None) -> TrainingRun:
    """Split by match, train the MDN and the play-selection model, evaluate on the held-out matches."""
    config = config or TrainConfig()
    encoding = build_vocab(events)
    train_events, test_events = split_dataset(events, 1.0 - config.test_ratio, config.seed)
    logger.info(f"Split {len(events)} tackles into {len(train_events)} train / {len(test_events)} test")

    result = train(train_events, config, encoding)

    logistic: Optional[LogisticWeights] = None
    if decision_events(train_events):
        logistic = train_logistic(train_events, encoding, config.logistic, test_events=test_events)
    else:
        logger.warning("No decision-labeled events; checkpoint carries no play-selection model")

    report = evaluate(result.model, test_events)
    last = result.history[-1]
    metadata = {
        "seed": config.seed,
        "epochs_run": last.epoch,
        "best_epoch": result.best_epoch,
        "final_train_nll": last.train_nll,
        "final_val_nll": last.val_nll,
        "best_val_nll": last.best_val_nll,
        "test_nll": report.test_nll,
        "n_train_events": len(train_events),
        "n_test_events": len(test_events),
    }
    checkpoint = Checkpoint.from_model(result.model, logistic=logistic, metadata=metadata)
    return TrainingRun(checkpoint=checkpoint, history=result.history, report=report)
