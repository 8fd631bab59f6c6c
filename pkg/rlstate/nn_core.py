# rlstate/nn_core.py
"""
Minimal dense-network substrate: parameter containers, vector primitives that
record themselves on a reverse-mode tape, backward propagation and Adam.

Primitives always compute their value. They are only recorded when a Tape is
active, so the same code path serves training and inference.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit, logsumexp, softmax as _softmax

from rlstate.errors import DivergenceError, InvalidInputError, ShapeError

Array = np.ndarray


# ================================
# Parameters, nodes and the tape
# ================================

@dataclass(eq=False)
class ParamTensor:
    """A named trainable array with its gradient buffer."""
    name: str
    values: Array
    grad: Array = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        if self.grad.shape != self.values.shape:
            raise ShapeError(f"{self.name}: grad shape {self.grad.shape} != values shape {self.values.shape}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return int(self.values.size)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.values)


@dataclass(eq=False)
class Node:
    """Value flowing through the graph. Leaves may wrap a ParamTensor."""
    value: Array
    param: Optional[ParamTensor] = None
    tape: Optional["Tape"] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape


@dataclass
class TapeRecord:
    op: str
    inputs: Tuple[Node, ...]
    output: Node
    backward_fn: Callable[[Array], Sequence[Optional[Array]]]


class Tape:
    """Ordered record of primitive applications. Use as a context manager."""

    def __init__(self):
        self.records: List[TapeRecord] = []

    def __enter__(self) -> "Tape":
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACTIVE_TAPES.remove(self)
        return False

    def record(self, op: str, inputs: Tuple[Node, ...], output: Node,
               backward_fn: Callable[[Array], Sequence[Optional[Array]]]) -> None:
        output.tape = self
        self.records.append(TapeRecord(op, inputs, output, backward_fn))

    def __len__(self) -> int:
        return len(self.records)


_ACTIVE_TAPES: List[Tape] = []


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPES[-1] if _ACTIVE_TAPES else None


NodeLike = Union[Node, ParamTensor, Array, float]


def as_node(x: NodeLike) -> Node:
    if isinstance(x, Node):
        return x
    if isinstance(x, ParamTensor):
        return Node(x.values, param=x)
    return Node(np.asarray(x, dtype=np.float64))


def _emit(op: str, inputs: Tuple[Node, ...], value: Array,
          backward_fn: Callable[[Array], Sequence[Optional[Array]]]) -> Node:
    out = Node(value)
    tape = active_tape()
    if tape is not None:
        tape.record(op, inputs, out, backward_fn)
    return out


def _unbroadcast(grad: Array, shape: Tuple[int, ...]) -> Array:
    """Sum a broadcast gradient back down to the operand's shape."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ================================
# Elementwise and structural primitives
# ================================

def add(a: NodeLike, b: NodeLike) -> Node:
    a, b = as_node(a), as_node(b)
    return _emit("add", (a, b), a.value + b.value,
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def subtract(a: NodeLike, b: NodeLike) -> Node:
    a, b = as_node(a), as_node(b)
    return _emit("subtract", (a, b), a.value - b.value,
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def multiply(a: NodeLike, b: NodeLike) -> Node:
    a, b = as_node(a), as_node(b)
    av, bv = a.value, b.value
    return _emit("multiply", (a, b), av * bv,
                 lambda g: (_unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)))


def divide(a: NodeLike, b: NodeLike) -> Node:
    a, b = as_node(a), as_node(b)
    av, bv = a.value, b.value
    out = av / bv
    return _emit("divide", (a, b), out,
                 lambda g: (_unbroadcast(g / bv, a.shape), _unbroadcast(-g * out / bv, b.shape)))


def negate(a: NodeLike) -> Node:
    a = as_node(a)
    return _emit("negate", (a,), -a.value, lambda g: (-g,))


def square(a: NodeLike) -> Node:
    a = as_node(a)
    av = a.value
    return _emit("square", (a,), av * av, lambda g: (2.0 * av * g,))


def log(a: NodeLike) -> Node:
    a = as_node(a)
    av = a.value
    return _emit("log", (a,), np.log(av), lambda g: (g / av,))


def exp(a: NodeLike) -> Node:
    a = as_node(a)
    out = np.exp(a.value)
    return _emit("exp", (a,), out, lambda g: (g * out,))


def reshape(a: NodeLike, shape: Tuple[int, ...]) -> Node:
    a = as_node(a)
    original = a.shape
    return _emit("reshape", (a,), a.value.reshape(shape), lambda g: (g.reshape(original),))


def take(a: NodeLike, start: int, stop: int) -> Node:
    """Slice [start, stop) of the last axis."""
    a = as_node(a)
    original = a.shape

    def backward_fn(g):
        full = np.zeros(original)
        full[..., start:stop] = g
        return (full,)

    return _emit("take", (a,), a.value[..., start:stop], backward_fn)


def concat(parts: Sequence[NodeLike]) -> Node:
    """Concatenate along the last axis."""
    nodes = tuple(as_node(p) for p in parts)
    widths = [n.shape[-1] for n in nodes]
    bounds = np.cumsum([0] + widths)

    def backward_fn(g):
        return tuple(g[..., bounds[i]:bounds[i + 1]] for i in range(len(nodes)))

    return _emit("concat", nodes, np.concatenate([n.value for n in nodes], axis=-1), backward_fn)


def reduce_sum(a: NodeLike, axis: Optional[int] = None) -> Node:
    a = as_node(a)
    original = a.shape

    def backward_fn(g):
        if axis is None:
            return (np.broadcast_to(g, original).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), original).copy(),)

    return _emit("sum", (a,), np.sum(a.value, axis=axis), backward_fn)


def mean(a: NodeLike) -> Node:
    a = as_node(a)
    n = a.value.size
    if n == 0:
        raise InvalidInputError("mean of an empty array")
    original = a.shape
    return _emit("mean", (a,), np.asarray(a.value.mean()),
                 lambda g: (np.full(original, float(g) / n),))


# ================================
# Dense layer, embedding and activations
# ================================

def dense_forward(x: NodeLike, weights: NodeLike, bias: Optional[NodeLike] = None) -> Node:
    """y = x W^T + b over the last axis of x. W has shape (out, in)."""
    x, w = as_node(x), as_node(weights)
    if w.value.ndim != 2 or x.shape[-1] != w.shape[1]:
        raise ShapeError(f"dense_forward: input {x.shape} does not match weights {w.shape}",
                         data={"input": list(x.shape), "weights": list(w.shape)})
    xv, wv = x.value, w.value
    out = xv @ wv.T
    inputs: Tuple[Node, ...] = (x, w)
    b = None
    if bias is not None:
        b = as_node(bias)
        if b.shape != (w.shape[0],):
            raise ShapeError(f"dense_forward: bias {b.shape} does not match weights {w.shape}",
                             data={"bias": list(b.shape), "weights": list(w.shape)})
        out = out + b.value
        inputs = (x, w, b)

    def backward_fn(g):
        g2 = g.reshape(-1, wv.shape[0])
        x2 = xv.reshape(-1, wv.shape[1])
        grads = [g @ wv, g2.T @ x2]
        if b is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)

    return _emit("dense", inputs, out, backward_fn)


def embed(indicator: NodeLike, table: NodeLike) -> Node:
    """Indicator vector(s) times an embedding table (a bias-free dense layer).

    With 0/1 indicators this is the sum of the active table rows.
    """
    ind, t = as_node(indicator), as_node(table)
    if ind.shape[-1] != t.shape[0]:
        raise ShapeError(f"embed: indicator width {ind.shape[-1]} != table rows {t.shape[0]}",
                         data={"indicator": list(ind.shape), "table": list(t.shape)})
    iv, tv = ind.value, t.value

    def backward_fn(g):
        g2 = g.reshape(-1, tv.shape[1])
        i2 = iv.reshape(-1, tv.shape[0])
        return (g @ tv.T, i2.T @ g2)

    return _emit("embed", (ind, t), iv @ tv, backward_fn)


def relu(a: NodeLike) -> Node:
    a = as_node(a)
    mask = a.value > 0
    return _emit("relu", (a,), np.where(mask, a.value, 0.0), lambda g: (g * mask,))


def sigmoid(a: NodeLike) -> Node:
    a = as_node(a)
    out = expit(a.value)
    return _emit("sigmoid", (a,), out, lambda g: (g * out * (1.0 - out),))


def softplus(a: NodeLike) -> Node:
    a = as_node(a)
    av = a.value
    return _emit("softplus", (a,), np.logaddexp(0.0, av), lambda g: (g * expit(av),))


def softmax(a: NodeLike, axis: int = -1) -> Node:
    a = as_node(a)
    out = _softmax(a.value, axis=axis)

    def backward_fn(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _emit("softmax", (a,), out, backward_fn)


def log_softmax(a: NodeLike, axis: int = -1) -> Node:
    a = as_node(a)
    out = a.value - logsumexp(a.value, axis=axis, keepdims=True)
    probs = np.exp(out)

    def backward_fn(g):
        return (g - probs * np.sum(g, axis=axis, keepdims=True),)

    return _emit("log_softmax", (a,), out, backward_fn)


def log_sum_exp(a: NodeLike, axis: int = -1) -> Node:
    """Max-shifted log(sum(exp(a))) along an axis."""
    a = as_node(a)
    out = logsumexp(a.value, axis=axis)
    weights = np.exp(a.value - np.expand_dims(out, axis))

    def backward_fn(g):
        return (np.expand_dims(g, axis) * weights,)

    return _emit("log_sum_exp", (a,), np.asarray(out), backward_fn)


_ACTIVATIONS = {
    "rectifier": relu,
    "sigmoid": sigmoid,
    "softplus": softplus,
    "softmax": softmax,
    "log_sum_exp": log_sum_exp,
}


def activations(x: NodeLike, kind: str) -> Node:
    """Apply one of rectifier / sigmoid / softplus / softmax / log_sum_exp."""
    if kind not in _ACTIVATIONS:
        raise InvalidInputError(f"unknown activation '{kind}'. Supported: {', '.join(_ACTIVATIONS)}")
    node = as_node(x)
    if node.value.size == 0:
        raise InvalidInputError(f"{kind}: empty input")
    return _ACTIVATIONS[kind](node)


# ================================
# Reverse pass
# ================================

def backward(tape: Tape, loss: Node, params: Iterable[ParamTensor] = ()) -> None:
    """Write d(loss)/d(param) into every ParamTensor.grad reachable from the tape.

    Parameters in `params` that never reach the loss end with an all-zero grad.
    """
    if loss.value.size != 1:
        raise ShapeError(f"backward: loss must be a scalar, got shape {loss.shape}")
    if loss.tape is not tape and loss.param is None:
        raise InvalidInputError("backward: loss was not produced on this tape")

    for p in params:
        p.zero_grad()
    for record in tape.records:
        for node in record.inputs:
            if node.param is not None:
                node.param.zero_grad()

    grads: Dict[int, Array] = {id(loss): np.ones_like(loss.value)}
    for record in reversed(tape.records):
        g = grads.pop(id(record.output), None)
        if g is None:
            continue
        input_grads = record.backward_fn(g)
        for node, ig in zip(record.inputs, input_grads):
            if ig is None:
                continue
            if node.param is not None:
                node.param.grad = node.param.grad + ig
            elif id(node) in grads:
                grads[id(node)] = grads[id(node)] + ig
            else:
                grads[id(node)] = ig
    if loss.param is not None:
        loss.param.grad = loss.param.grad + 1.0


# ================================
# Optimizer
# ================================

@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: Dict[str, Array] = field(default_factory=dict)
    second_moment: Dict[str, Array] = field(default_factory=dict)


def adam_step(params: Mapping[str, ParamTensor], state: AdamState) -> AdamState:
    """One bias-corrected Adam update; grads are zeroed afterwards."""
    for name, p in params.items():
        if not np.all(np.isfinite(p.grad)):
            raise DivergenceError(f"non-finite gradient in parameter '{name}' at step {state.step + 1}")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None or m.shape != p.shape:
            m = np.zeros_like(p.values)
            v = np.zeros_like(p.values)
        m = b1 * m + (1.0 - b1) * p.grad
        v = b2 * v + (1.0 - b2) * p.grad * p.grad
        state.first_moment[name] = m
        state.second_moment[name] = v
        p.values = p.values - state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        p.zero_grad()
    return state


# ================================
# Initialization helpers
# ================================

def glorot_uniform(shape: Tuple[int, int], rng: np.random.Generator) -> Array:
    """Uniform in +-sqrt(6 / (fan_in + fan_out)) for a (fan_out, fan_in) or (rows, cols) matrix."""
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def clone_params(params: Mapping[str, ParamTensor]) -> Dict[str, ParamTensor]:
    return {name: ParamTensor(name, p.values.copy()) for name, p in params.items()}


def parameter_count(params: Mapping[str, ParamTensor]) -> int:
    return sum(p.size for p in params.values())
