# semicon/core/tensor.py
# Dense tensors with define-by-run reverse-mode differentiation.
# - Tensor stores float32 by default; default_dtype(np.float64) switches storage
#   (used by the finite-difference oracles)
# - A Tape records every primitive executed while it is active and replays
#   them backward exactly once
# - The active tape lives in a ContextVar: each thread / context has its own

from __future__ import annotations

import contextvars
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from semicon.errors import NonFiniteError, ShapeError, TapeError

_DTYPE: contextvars.ContextVar[np.dtype] = contextvars.ContextVar("semicon_dtype", default=np.dtype(np.float32))
_TAPE: contextvars.ContextVar[Optional["Tape"]] = contextvars.ContextVar("semicon_tape", default=None)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def get_default_dtype() -> np.dtype:
    return _DTYPE.get()


@contextmanager
def default_dtype(dtype) -> Iterator[None]:
    token = _DTYPE.set(np.dtype(dtype))
    try:
        yield
    finally:
        _DTYPE.reset(token)


def active_tape() -> Optional["Tape"]:
    return _TAPE.get()


class Tensor:
    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data: np.ndarray = np.asarray(data, dtype=get_default_dtype())
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


class Parameter(Tensor):
    """A named trainable tensor with its SGD momentum buffer."""

    def __init__(self, name: str, data):
        super().__init__(data, requires_grad=True, name=name)
        self.momentum = np.zeros_like(self.data)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


@dataclass
class Node:
    kind: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Ordered record of primitive applications inside one training context."""

    def __init__(self) -> None:
        self.nodes: List[Node] = []
        self._replayed = False
        self._token: Optional[contextvars.Token] = None

    def __enter__(self) -> "Tape":
        self._token = _TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        if self._token is not None:
            _TAPE.reset(self._token)
            self._token = None
        return False

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, kind: str, inputs: Tuple[Tensor, ...], output: Tensor, backward: BackwardFn) -> None:
        if self._replayed:
            raise TapeError("Tape was already replayed; start a new Tape for a new forward pass")
        self.nodes.append(Node(kind, inputs, output, backward))

    def backward(self, loss: Tensor, params: Optional[Iterable[Parameter]] = None) -> Dict[str, np.ndarray]:
        """
        Replay the tape in reverse and store gradients on every leaf tensor.
        Returns {parameter name: gradient} for `params`; parameters the loss
        does not reach get zero gradients.
        """
        if self._replayed:
            raise TapeError("backward() called twice on the same tape without a new forward pass")
        if loss.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {loss.shape}")
        self._replayed = True

        produced = {id(node.output) for node in self.nodes}
        grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data, dtype=np.float64)}
        leaves: Dict[int, Tensor] = {}

        for node in reversed(self.nodes):
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            in_grads = node.backward(g)
            for tensor, gi in zip(node.inputs, in_grads):
                if gi is None or not tensor.requires_grad:
                    continue
                if gi.shape != tensor.shape:
                    raise ShapeError(
                        f"{node.kind}: backward produced gradient of shape {gi.shape} for input {tensor.shape}"
                    )
                key = id(tensor)
                grads[key] = gi if key not in grads else grads[key] + gi
                if key not in produced:
                    leaves[key] = tensor

        if id(loss) in grads and id(loss) not in produced:
            leaves[id(loss)] = loss

        for key, tensor in leaves.items():
            g = grads.get(key)
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NonFiniteError(f"Non-finite gradient for {tensor!r}")
            g = g.astype(tensor.data.dtype)
            tensor.grad = g if tensor.grad is None else tensor.grad + g

        out: Dict[str, np.ndarray] = {}
        for p in params or ():
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
            out[p.name] = p.grad
        return out


def record_op(kind: str, data: np.ndarray, inputs: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    """Wrap a primitive's result; put it on the active tape when a gradient can flow."""
    inputs = tuple(inputs)
    requires = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=requires)
    tape = active_tape()
    if requires and tape is not None:
        tape.record(kind, inputs, out, backward)
    return out


def check_finite(kind: str, *tensors: Tensor) -> None:
    for t in tensors:
        if not np.all(np.isfinite(t.data)):
            raise NonFiniteError(f"{kind}: non-finite value in input of shape {t.shape}")
