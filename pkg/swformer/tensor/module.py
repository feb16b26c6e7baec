"""Parameter containers.

A :class:`Module` finds its parameters, buffers and sub-modules by walking
its attributes in definition order, so names are stable across runs and
match checkpoint array names.
"""

import logging
from typing import Dict, Iterator, List, Mapping, Optional, Tuple, Union

import numpy as np

from swformer.errors import CheckpointError, DimensionError
from swformer.tensor.core import Tensor, get_default_dtype

logger = logging.getLogger(__name__)


class Parameter(Tensor):
    """Trainable leaf tensor."""

    def __init__(self, data, name: Optional[str] = None, dtype=None):
        super().__init__(data, requires_grad=True, name=name, dtype=dtype)


class Module:
    """Base class for layers and networks."""

    # Names of attributes holding non-trainable numpy state (running stats).
    buffer_names: Tuple[str, ...] = ()

    def __init__(self):
        self.training = True

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def _children(self) -> Iterator[Tuple[str, object]]:
        for name, value in vars(self).items():
            if isinstance(value, (Parameter, Module)):
                yield name, value
            elif isinstance(value, (list, tuple)) and value and all(
                isinstance(v, Module) for v in value
            ):
                for i, v in enumerate(value):
                    yield f"{name}.{i}", v

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, value in self._children():
            full = f"{prefix}{name}"
            if isinstance(value, Parameter):
                yield full, value
            else:
                yield from value.named_parameters(f"{full}.")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name in self.buffer_names:
            yield f"{prefix}{name}", getattr(self, name)
        for name, value in self._children():
            if isinstance(value, Module):
                yield from value.named_buffers(f"{prefix}{name}.")

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, value in self._children():
            if isinstance(value, Module):
                yield from value.modules()

    def num_parameters(self) -> int:
        """Number of trainable scalars."""
        return int(sum(p.size for p in self.parameters()))

    def train(self, mode: bool = True) -> "Module":
        for module in self.modules():
            module.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Copies of every parameter and buffer keyed by dotted name."""
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        state.update({name: b.copy() for name, b in self.named_buffers()})
        return state

    def load_state_dict(self, state: Mapping[str, np.ndarray], strict: bool = True) -> None:
        """Copy arrays into the existing parameters and buffers in place."""
        targets: Dict[str, np.ndarray] = {name: p.data for name, p in self.named_parameters()}
        targets.update(dict(self.named_buffers()))

        missing = sorted(set(targets) - set(state))
        unexpected = sorted(set(state) - set(targets))
        if strict and (missing or unexpected):
            raise CheckpointError(
                "<state_dict>",
                f"missing arrays {missing[:5]}{'...' if len(missing) > 5 else ''}, "
                f"unexpected arrays {unexpected[:5]}{'...' if len(unexpected) > 5 else ''}",
            )
        for name, target in targets.items():
            if name not in state:
                continue
            value = np.asarray(state[name])
            if value.shape != target.shape:
                raise DimensionError(f"{name}: stored shape {value.shape} != model shape {target.shape}")
            target[...] = value

    def astype(self, dtype: Union[str, np.dtype, type, None] = None) -> "Module":
        """Cast every parameter and buffer (default: the current default dtype)."""
        dtype = np.dtype(dtype) if dtype is not None else get_default_dtype()
        for module in self.modules():
            for name, value in list(vars(module).items()):
                if isinstance(value, Parameter):
                    value.data = value.data.astype(dtype)
                    value.grad = None
                elif isinstance(value, Tensor):
                    setattr(module, name, Tensor(value.data, dtype=dtype))
            for name in module.buffer_names:
                setattr(module, name, getattr(module, name).astype(dtype))
        return self
