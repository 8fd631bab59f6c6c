# rlstate/io.py
"""
Files on disk: JSONL tackle events, the JSON checkpoint, CSV / JSON reports.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from rlstate import nn_core as nn
from rlstate.decision_model import LogisticWeights, feature_width
from rlstate.errors import CheckpointError, ErrorCode, EventValidationError, InvalidInputError
from rlstate.log import get_logger
from rlstate.mdn import MdnModel, param_shapes
from rlstate.models import EncodingConfig, ModelArchitecture, TackleEvent, parse_event
from rlstate.settings import get_settings

logger = get_logger(__name__)

PathLike = Union[str, Path]

FORMAT_VERSION = 1
LOGISTIC_VERSION = 1
SECTIONS = ("embeddings", "spatial", "trunk", "output")


# ================================
# Events
# ================================

def read_events(path: PathLike) -> List[TackleEvent]:
    """Parse a JSONL event file. Blank lines are skipped; errors cite 1-based line numbers."""
    events: List[TackleEvent] = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                data = json.loads(raw)
            except json.JSONDecodeError as e:
                raise EventValidationError(f"malformed JSON: {e.msg}", line=line_no) from None
            if not isinstance(data, dict):
                raise EventValidationError("expected a JSON object", line=line_no)
            events.append(parse_event(data, line=line_no))
    logger.debug(f"Read {len(events)} events from {path}")
    return events


def event_to_json(event: TackleEvent) -> str:
    return json.dumps(event.model_dump(mode="json"), sort_keys=True)


def write_events(path: PathLike, events: Sequence[TackleEvent]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as f:
        for event in events:
            f.write(event_to_json(event))
            f.write("\n")
    logger.info(f"Wrote {len(events)} events to {path}")


# ================================
# Checkpoint
# ================================

@dataclass
class Checkpoint:
    """Everything needed to rebuild the trained predictors."""
    arch: ModelArchitecture
    encoding: EncodingConfig
    params: Dict[str, nn.ParamTensor]
    logistic: Optional[LogisticWeights] = None
    metadata: Dict[str, Any] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @property
    def model(self) -> MdnModel:
        return MdnModel(arch=self.arch, config=self.encoding, params=self.params)

    @classmethod
    def from_model(cls, model: MdnModel, logistic: Optional[LogisticWeights] = None,
                   metadata: Optional[Dict[str, Any]] = None) -> "Checkpoint":
        return cls(arch=model.arch, encoding=model.config, params=nn.clone_params(model.params),
                   logistic=logistic, metadata=dict(metadata or {}))


def validate_checkpoint_shapes(params: Dict[str, nn.ParamTensor], arch: ModelArchitecture,
                               encoding: EncodingConfig) -> Tuple[bool, Optional[str]]:
    """
    Check parameter names and sizes against the architecture arithmetic.
    Returns (is_valid, error_message) tuple.
    """
    expected = param_shapes(arch, encoding)
    missing = [name for name in expected if name not in params]
    if missing:
        return False, f"missing parameters: {', '.join(missing)}"
    extra = [name for name in params if name not in expected]
    if extra:
        return False, f"unexpected parameters: {', '.join(extra)}"
    for name, shape in expected.items():
        if params[name].shape != shape:
            return False, f"{name}: expected shape {shape}, found {params[name].shape}"
    return True, None


def _tensor_record(values: np.ndarray) -> Dict[str, Any]:
    return {"shape": list(values.shape), "values": [float(v) for v in values.ravel()]}


def _tensor_from_record(name: str, record: Dict[str, Any]) -> np.ndarray:
    shape = tuple(int(s) for s in record["shape"])
    values = np.asarray(record["values"], dtype=np.float64)
    if values.size != int(np.prod(shape)):
        raise CheckpointError(f"{name}: {values.size} values for shape {shape}",
                              data={"parameter": name, "count": int(values.size)})
    return values.reshape(shape)


def checkpoint_to_dict(cp: Checkpoint) -> Dict[str, Any]:
    sections: Dict[str, Dict[str, Any]] = {s: {} for s in SECTIONS}
    for name, tensor in cp.params.items():
        sections[name.split(".", 1)[0]][name] = _tensor_record(tensor.values)
    logistic = None
    if cp.logistic is not None:
        logistic = {
            "logistic_version": LOGISTIC_VERSION,
            "classes": list(cp.logistic.classes),
            "weights": _tensor_record(cp.logistic.weights),
            "bias": _tensor_record(cp.logistic.bias),
            "train_loss": cp.logistic.train_loss,
            "test_loss": cp.logistic.test_loss,
        }
    return {
        "format_version": cp.format_version,
        "architecture": cp.arch.model_dump(mode="json"),
        "encoding": cp.encoding.model_dump(mode="json"),
        **sections,
        "logistic": logistic,
        "metadata": cp.metadata,
    }


def checkpoint_from_dict(data: Dict[str, Any]) -> Checkpoint:
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"checkpoint format_version {version} not supported (expected {FORMAT_VERSION})",
                              code=ErrorCode.CHECKPOINT_VERSION,
                              data={"found": version, "expected": FORMAT_VERSION})
    try:
        arch = ModelArchitecture.model_validate(data["architecture"])
        encoding = EncodingConfig.model_validate(data["encoding"])
        params: Dict[str, nn.ParamTensor] = {}
        for section in SECTIONS:
            for name, record in data[section].items():
                params[name] = nn.ParamTensor(name, _tensor_from_record(name, record))
    except (KeyError, TypeError, ValidationError) as e:
        raise CheckpointError(f"checkpoint is incomplete or malformed: {e}") from None

    is_valid, error = validate_checkpoint_shapes(params, arch, encoding)
    if not is_valid:
        raise CheckpointError(f"parameter count mismatch: {error}")

    logistic = None
    if data.get("logistic") is not None:
        record = data["logistic"]
        if record.get("logistic_version") != LOGISTIC_VERSION:
            raise CheckpointError(
                f"logistic_version {record.get('logistic_version')} not supported (expected {LOGISTIC_VERSION})",
                code=ErrorCode.CHECKPOINT_VERSION,
                data={"found": record.get("logistic_version"), "expected": LOGISTIC_VERSION})
        logistic = LogisticWeights(
            weights=_tensor_from_record("logistic.weights", record["weights"]),
            bias=_tensor_from_record("logistic.bias", record["bias"]),
            train_loss=record.get("train_loss"),
            test_loss=record.get("test_loss"),
        )
        if logistic.feature_width != feature_width(encoding):
            raise CheckpointError(f"logistic feature width {logistic.feature_width} does not match "
                                  f"encoding width {feature_width(encoding)}")
    return Checkpoint(arch=arch, encoding=encoding, params=params, logistic=logistic,
                      metadata=data.get("metadata") or {}, format_version=version)


def save_checkpoint(path: PathLike, cp: Checkpoint) -> None:
    is_valid, error = validate_checkpoint_shapes(cp.params, cp.arch, cp.encoding)
    if not is_valid:
        raise CheckpointError(f"refusing to save inconsistent checkpoint: {error}")
    text = json.dumps(checkpoint_to_dict(cp), sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")
    logger.info(f"Saved checkpoint ({nn.parameter_count(cp.params)} parameters) to {path}")


def load_checkpoint(path: PathLike) -> Checkpoint:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path}: not a readable checkpoint ({e.msg} at char {e.pos})") from None
    if not isinstance(data, dict):
        raise CheckpointError(f"{path}: checkpoint must be a JSON object")
    return checkpoint_from_dict(data)


# ================================
# Reports
# ================================

def _jsonable(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    if isinstance(obj, pd.DataFrame):
        return obj.to_dict(orient="records")
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def to_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, default=_jsonable)


def write_json(path: PathLike, payload: Any) -> None:
    Path(path).write_text(to_json(payload) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")


def write_table(path: PathLike, table: pd.DataFrame) -> None:
    if table.empty and len(table.columns) == 0:
        raise InvalidInputError(f"refusing to write an empty table to {path}")
    table.to_csv(path, index=False, float_format=get_settings().float_format, lineterminator="\n")
    logger.info(f"Wrote {len(table)} rows to {path}")
