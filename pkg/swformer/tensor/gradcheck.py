"""Finite-difference verification of tape gradients."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Sequence, Union

import numpy as np

from swformer.errors import GradCheckFailed, UsageError
from swformer.tensor.core import Tensor, no_grad

logger = logging.getLogger(__name__)


@dataclass
class ParamCheck:
    """Outcome for one parameter."""
    name: str
    max_rel_error: float
    checked: int
    passed: bool
    message: str = ""


@dataclass
class GradCheckReport:
    """Per-parameter comparison of analytic and central-difference gradients."""
    tol: float
    checks: List[ParamCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    @property
    def max_rel_error(self) -> float:
        return max((c.max_rel_error for c in self.checks), default=float("nan"))

    def failures(self) -> List[ParamCheck]:
        return [c for c in self.checks if not c.passed]

    def summary(self) -> str:
        failed = self.failures()
        status = "passed" if self.passed else f"failed ({len(failed)} of {len(self.checks)})"
        return f"gradcheck {status}, max relative error {self.max_rel_error:.3e} (tol {self.tol:g})"

    def raise_for_failure(self, label: str = "gradcheck") -> None:
        if not self.passed:
            worst = ", ".join(f"{c.name}={c.max_rel_error:.2e}" for c in self.failures()[:5])
            raise GradCheckFailed(f"{label}: {self.summary()}: {worst}")


def _eval_scalar(f: Callable[[], Tensor]) -> float:
    with no_grad():
        out = f()
    return float(np.asarray(out.data).reshape(-1)[0])


def grad_check(
    f: Callable[[], Tensor],
    params: Union[Mapping[str, Tensor], Sequence[Tensor]],
    tol: float = 1e-3,
    step: float = 1e-4,
    max_elements: int = 16,
    seed: int = 0,
) -> GradCheckReport:
    """Compare tape gradients of ``f()`` against central differences.

    ``f`` takes no arguments and closes over ``params``; it must be
    deterministic and return a scalar tensor. Parameters must be float64.
    Parameters with more than ``max_elements`` entries are checked on a
    seeded random subset of them.
    """
    named: Dict[str, Tensor] = (
        dict(params) if isinstance(params, Mapping) else {f"param{i}": p for i, p in enumerate(params)}
    )
    for name, p in named.items():
        if p.dtype != np.float64:
            raise UsageError(f"grad_check needs float64 tensors; {name} is {p.dtype.name}")
        p.grad = None

    report = GradCheckReport(tol=tol)
    loss = f()
    if not np.all(np.isfinite(loss.data)):
        for name in named:
            report.checks.append(ParamCheck(name, float("inf"), 0, False, "non-finite output at the base point"))
        return report
    loss.backward()

    rng = np.random.default_rng(seed)
    for name, p in named.items():
        analytic_full = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        if flat.size <= max_elements:
            indices = np.arange(flat.size)
        else:
            indices = np.sort(rng.choice(flat.size, size=max_elements, replace=False))

        analytic = analytic_full.reshape(-1)[indices]
        numeric = np.empty_like(analytic)
        message = ""
        for k, idx in enumerate(indices):
            original = flat[idx]
            flat[idx] = original + step
            f_plus = _eval_scalar(f)
            flat[idx] = original - step
            f_minus = _eval_scalar(f)
            flat[idx] = original
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                message = f"non-finite output when perturbing {name}[{idx}]"
                numeric[k] = np.nan
                continue
            numeric[k] = (f_plus - f_minus) / (2.0 * step)

        if message:
            report.checks.append(ParamCheck(name, float("inf"), len(indices), False, message))
            continue
        denom = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0), 1e-8)
        rel = float(np.max(np.abs(analytic - numeric), initial=0.0) / denom)
        passed = rel < tol
        report.checks.append(
            ParamCheck(name, rel, len(indices), passed, "" if passed else f"relative error {rel:.3e} >= {tol:g}")
        )

    logger.debug(report.summary())
    return report
