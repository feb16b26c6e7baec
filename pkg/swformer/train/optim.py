"""AdamW with decoupled weight decay and the cosine-annealing schedule."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from swformer.config.yaml_config import OptimConfig, Schedule
from swformer.errors import DimensionError, TrainingAborted, UsageError
from swformer.tensor.module import Parameter

logger = logging.getLogger(__name__)


@dataclass
class OptimState:
    """Moment buffers keyed by parameter name, plus the step count."""
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_config(cls, config: Optional[OptimConfig] = None) -> "OptimState":
        config = config or OptimConfig()
        return cls(config.beta1, config.beta2, config.eps, config.weight_decay)

    def hyperparameters(self) -> Dict[str, float]:
        return {"beta1": self.beta1, "beta2": self.beta2, "eps": self.eps, "weight_decay": self.weight_decay}


def adamw_step(
    params: Mapping[str, Parameter],
    state: OptimState,
    lr: float,
    grads: Optional[Mapping[str, np.ndarray]] = None,
) -> None:
    """One in-place AdamW update.

    ``grads`` defaults to each parameter's ``.grad``; parameters without a
    gradient keep their values and moments. Every gradient is checked before
    anything is written, so an abort leaves parameters and state untouched.

    Raises:
        TrainingAborted: a gradient contains NaN or inf; names the parameter.
    """
    if state.t < 0:
        raise UsageError(f"Optimizer step count must be >= 0, got {state.t}")
    updates = {}
    for name, param in params.items():
        grad = grads.get(name) if grads is not None else param.grad
        if grad is None:
            continue
        if grad.shape != param.shape:
            raise DimensionError(f"{name}: gradient shape {grad.shape} != parameter shape {param.shape}")
        if not np.all(np.isfinite(grad)):
            raise TrainingAborted(f"Non-finite gradient in parameter {name}", parameter=name)
        updates[name] = grad

    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for name, grad in updates.items():
        param = params[name]
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        m = b1 * m + (1.0 - b1) * grad
        v = b2 * v + (1.0 - b2) * grad * grad
        state.m[name], state.v[name] = m, v

        if state.weight_decay:
            param.data -= lr * state.weight_decay * param.data
        m_hat = m / bias1
        v_hat = v / bias2
        param.data -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(param.dtype, copy=False)


class AdamW:
    """Optimizer over a module's named parameters."""

    def __init__(self, named_params: Mapping[str, Parameter], config: Optional[OptimConfig] = None,
                 state: Optional[OptimState] = None):
        self.params: Dict[str, Parameter] = dict(named_params)
        self.state = state or OptimState.from_config(config)

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.grad = None

    def step(self, lr: float) -> None:
        adamw_step(self.params, self.state, lr)


def cosine_lr(t: int, sched: Schedule) -> float:
    """lr_min + (lr_init - lr_min) * (1 + cos(pi * t / T)) / 2, clamped to lr_min past T."""
    if t < 0:
        raise UsageError(f"Schedule step must be >= 0, got {t}")
    total = sched.total_steps
    if total is None:
        raise UsageError("Schedule.total_steps is unset; resolve it against the training length first")
    if total == 0:
        return sched.lr_init
    if t >= total:
        return sched.lr_min
    return sched.lr_min + 0.5 * (sched.lr_init - sched.lr_min) * (1.0 + math.cos(math.pi * t / total))


def clip_grad_norm(params: Mapping[str, Parameter], max_norm: float) -> float:
    """Rescale gradients so their global L2 norm is at most ``max_norm``; returns the norm before clipping."""
    grads = [p.grad for p in params.values() if p.grad is not None]
    total = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads))
    if total > max_norm > 0:
        factor = max_norm / (total + 1e-6)
        for param in params.values():
            if param.grad is not None:
                param.grad = param.grad * param.grad.dtype.type(factor)
        logger.debug("Clipped gradient norm %.4g to %.4g", total, max_norm)
    return total
