# rlstate/errors.py
"""
Error codes and exception types shared by every rlstate module.
Codes are stable strings so the CLI output can be parsed by scripts.
"""

from typing import Any, Dict, Optional
from pydantic import BaseModel


class ErrorCode:
    """Standard rlstate error codes"""
    SHAPE_MISMATCH = "SHAPE_MISMATCH"
    INVALID_EVENT = "INVALID_EVENT"
    INVALID_INPUT = "INVALID_INPUT"
    VOCAB_MISMATCH = "VOCAB_MISMATCH"
    DIVERGENCE = "DIVERGENCE"
    CHECKPOINT_VERSION = "CHECKPOINT_VERSION"
    CHECKPOINT_CORRUPT = "CHECKPOINT_CORRUPT"
    USAGE = "USAGE"
    DATA = "DATA"


class ErrorDetail(BaseModel):
    """Serializable error structure"""
    code: str
    message: str
    data: Optional[Dict[str, Any]] = None


class RlStateError(Exception):
    """Base class for every error raised on purpose by rlstate."""

    code: str = ErrorCode.DATA

    def __init__(self, message: str, code: Optional[str] = None, data: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        if code is not None:
            self.code = code
        self.data = data or {}

    def to_dict(self) -> Dict[str, Any]:
        return ErrorDetail(code=self.code, message=self.message, data=self.data or None).model_dump()


class ShapeError(RlStateError):
    code = ErrorCode.SHAPE_MISMATCH


class InvalidInputError(RlStateError):
    code = ErrorCode.INVALID_INPUT


class EventValidationError(RlStateError):
    """A tackle event breaks one of its invariants."""

    code = ErrorCode.INVALID_EVENT

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        data = {}
        if field is not None:
            data["field"] = field
        if line is not None:
            data["line"] = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message, data=data)
        self.field = field
        self.line = line


class VocabMismatchError(RlStateError):
    code = ErrorCode.VOCAB_MISMATCH


class DivergenceError(RlStateError):
    """Training produced a non-finite loss or gradient."""

    code = ErrorCode.DIVERGENCE

    def __init__(self, message: str, epoch: Optional[int] = None, batch: Optional[int] = None):
        data = {k: v for k, v in (("epoch", epoch), ("batch", batch)) if v is not None}
        super().__init__(message, data=data)
        self.epoch = epoch
        self.batch = batch


class CheckpointError(RlStateError):
    code = ErrorCode.CHECKPOINT_CORRUPT


class UsageError(RlStateError):
    code = ErrorCode.USAGE
