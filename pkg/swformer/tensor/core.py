"""Tensor type and the reverse-mode tape.

Every differentiable operation builds its output through :func:`record`,
which attaches a :class:`TapeRecord` holding the inputs and a backward rule
mapping the output cotangent to one cotangent per input. Record ids come from
a global counter, so sorting records by id is a topological order.
"""

import itertools
import logging
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from swformer.errors import DimensionError, UsageError

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_DTYPES = {"float32": np.float32, "float64": np.float64}
_default_dtype = np.dtype(np.float32)
_grad_state = threading.local()
_record_ids = itertools.count(1)


def get_default_dtype() -> np.dtype:
    return _default_dtype


def set_default_dtype(dtype: Union[str, np.dtype, type]) -> None:
    """Switch storage precision for tensors and parameters created afterwards."""
    global _default_dtype  # noqa: PLW0603
    key = np.dtype(dtype).name
    if key not in _DTYPES:
        raise UsageError(f"Unsupported dtype {dtype}; use float32 or float64")
    _default_dtype = np.dtype(_DTYPES[key])
    logger.debug("Default dtype set to %s", key)


@contextmanager
def precision(dtype: Union[str, np.dtype, type]) -> Iterator[None]:
    """Temporarily change the default dtype (gradient checks run in float64)."""
    previous = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


def is_grad_enabled() -> bool:
    return getattr(_grad_state, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Run operations without recording them on a tape (per thread)."""
    previous = is_grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = previous


@dataclass
class TapeRecord:
    """One recorded operation."""
    record_id: int
    op: str
    inputs: Tuple["Tensor", ...]
    backward: Optional[BackwardFn]
    released: bool = False


class Tensor:
    """Dense array that can take part in a reverse-mode graph."""

    __array_priority__ = 100

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[Union[str, np.dtype, type]] = None,
    ):
        target = np.dtype(dtype) if dtype is not None else get_default_dtype()
        self.data: np.ndarray = np.ascontiguousarray(np.asarray(data, dtype=target))
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._record: Optional[TapeRecord] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def node_id(self) -> Optional[int]:
        """Tape handle; None for leaves and detached tensors."""
        return self._record.record_id if self._record is not None else None

    @property
    def is_leaf(self) -> bool:
        return self._record is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() needs a single element, tensor has shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """Same values, no tape history, never accumulates grad."""
        return Tensor(self.data, requires_grad=False, dtype=self.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise DimensionError(
                f"gradient shape {grad.shape} does not match tensor shape {self.data.shape}"
            )
        grad = grad.astype(self.dtype, copy=False)
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    def backward(self, retain_graph: bool = False) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``."""
        backward(self, retain_graph=retain_graph)

    # Operator sugar; the ops module owns the actual rules.
    def __add__(self, other):
        from swformer.tensor import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from swformer.tensor import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from swformer.tensor import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from swformer.tensor import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from swformer.tensor import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from swformer.tensor import ops
        return ops.mul(other, self)

    def __neg__(self):
        from swformer.tensor import ops
        return ops.scale(self, -1.0)

    def __repr__(self) -> str:
        grad = ", requires_grad=True" if self.requires_grad else ""
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}{grad}{label})"


@dataclass
class ComplexTensor:
    """Real and imaginary parts carried as two tensors of equal shape."""
    real: Tensor
    imag: Tensor

    def __post_init__(self):
        if self.real.shape != self.imag.shape:
            raise DimensionError(
                f"real part shape {self.real.shape} != imaginary part shape {self.imag.shape}"
            )

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.real.shape

    def numpy(self) -> np.ndarray:
        return self.real.data + 1j * self.imag.data


def record(out_data: np.ndarray, inputs: Sequence[Tensor], backward_fn: BackwardFn, op: str) -> Tensor:
    """Wrap an op result, recording it when any input needs a gradient."""
    needs_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs_grad, dtype=out_data.dtype)
    if needs_grad:
        out._record = TapeRecord(next(_record_ids), op, tuple(inputs), backward_fn)
    return out


@dataclass
class Tape:
    """Records reachable from one output, sorted so inputs precede consumers."""
    records: List[TapeRecord] = field(default_factory=list)

    @classmethod
    def from_output(cls, output: Tensor) -> "Tape":
        found: Dict[int, TapeRecord] = {}
        stack = [output]
        while stack:
            tensor = stack.pop()
            rec = tensor._record
            if rec is None or rec.record_id in found:
                continue
            if rec.released:
                raise UsageError(
                    f"graph through {rec.op} was already released by a previous backward; "
                    "pass retain_graph=True to backpropagate twice"
                )
            found[rec.record_id] = rec
            stack.extend(rec.inputs)
        return cls(sorted(found.values(), key=lambda r: r.record_id))

    def __len__(self) -> int:
        return len(self.records)

    def run(self, output: Tensor, seed: np.ndarray) -> None:
        """Propagate ``seed`` from ``output`` back to the leaves, visiting each record once."""
        pending: Dict[int, np.ndarray] = {output.node_id: seed}
        for rec in reversed(self.records):
            grad = pending.pop(rec.record_id, None)
            if grad is None:
                continue
            input_grads = rec.backward(grad)
            for inp, inp_grad in zip(rec.inputs, input_grads):
                if inp_grad is None or not inp.requires_grad:
                    continue
                if inp._record is None:
                    inp.accumulate_grad(inp_grad)
                else:
                    key = inp._record.record_id
                    pending[key] = pending[key] + inp_grad if key in pending else inp_grad

    def release(self) -> None:
        for rec in self.records:
            rec.inputs = ()
            rec.backward = None
            rec.released = True


def backward(loss: Tensor, retain_graph: bool = False) -> None:
    """Populate ``grad`` on every leaf reachable from the scalar ``loss``.

    Repeated calls without zeroing accumulate. The tape is released afterwards
    unless ``retain_graph`` is set.
    """
    if loss.data.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise UsageError("backward called on a tensor that is detached from the tape")

    seed = np.ones_like(loss.data)
    if loss._record is None:
        loss.accumulate_grad(seed)
        return

    tape = Tape.from_output(loss)
    logger.debug("Backward through %d recorded ops", len(tape))
    tape.run(loss, seed)
    if not retain_graph:
        tape.release()
