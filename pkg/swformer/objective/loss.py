"""Multi-domain L1 training loss.

Each exit contributes mean |O - G| in the spatial domain, in the fixed Haar
sub-band domain and, weighted by ``lambda_fourier``, over the real and
imaginary parts of the orthonormal spectrum. All three maps are linear, so
each term is computed on the residual O - G.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

from swformer.config.yaml_config import LossConfig
from swformer.errors import DimensionError, UsageError
from swformer.tensor import ops
from swformer.tensor.core import Tensor
from swformer.transforms.fourier import fft2
from swformer.transforms.wavelet import dwt2, haar_bank

logger = logging.getLogger(__name__)


@dataclass
class LossTerms:
    """Total loss and its per-domain parts, each already scale-weighted.

    ``fourier`` includes the ``lambda_fourier`` factor, so the three parts add
    up to ``total``.
    """
    total: Tensor
    spatial: float = 0.0
    wavelet: float = 0.0
    fourier: float = 0.0

    def as_dict(self) -> Dict[str, float]:
        return {
            "loss": self.total.item(),
            "spatial": self.spatial,
            "wavelet": self.wavelet,
            "fourier": self.fourier,
        }


def spatial_l1(residual: Tensor) -> Tensor:
    return ops.reduce_mean(ops.abs(residual))


def wavelet_l1(residual: Tensor) -> Tensor:
    padded, _ = ops.pad_to_multiple(residual, 2)
    bands = dwt2(padded, haar_bank(dtype=residual.dtype)).concat()
    return ops.reduce_mean(ops.abs(bands))


def fourier_l1(residual: Tensor) -> Tensor:
    spectrum = fft2(residual)
    return ops.reduce_mean(ops.abs(ops.concat([spectrum.real, spectrum.imag], axis=1)))


class MultiDomainLoss:
    """Sum over exits of weighted spatial, wavelet and Fourier L1 terms."""

    def __init__(self, config: Optional[LossConfig] = None):
        self.config = config or LossConfig()

    def terms(
        self,
        outputs: Sequence[Tensor],
        targets: Sequence[Tensor],
        levels: Optional[Sequence[int]] = None,
    ) -> LossTerms:
        """Evaluate every term.

        ``levels`` gives the pyramid level of each pair (default: position in
        the list) and selects its entry in ``scale_weights``.
        """
        if not outputs or len(outputs) != len(targets):
            raise UsageError(
                f"multi_domain_loss needs matching non-empty output/target lists, got "
                f"{len(outputs)} outputs and {len(targets)} targets"
            )
        levels = list(levels) if levels is not None else list(range(len(outputs)))
        if len(levels) != len(outputs):
            raise UsageError(f"{len(levels)} levels given for {len(outputs)} outputs")

        cfg = self.config
        total: Optional[Tensor] = None
        parts = {"spatial": 0.0, "wavelet": 0.0, "fourier": 0.0}
        for level, output, target in zip(levels, outputs, targets):
            if output.shape != target.shape:
                raise DimensionError(
                    f"multi_domain_loss: level {level} output {output.shape} != target {target.shape}"
                )
            if not 0 <= level < len(cfg.scale_weights):
                raise UsageError(f"No scale weight for level {level}")
            weight = cfg.scale_weights[level]
            residual = ops.sub(output, target)
            terms = []
            if cfg.spatial_term:
                term = ops.scale(spatial_l1(residual), weight)
                parts["spatial"] += term.item()
                terms.append(term)
            if cfg.wavelet_term:
                term = ops.scale(wavelet_l1(residual), weight)
                parts["wavelet"] += term.item()
                terms.append(term)
            if cfg.fourier_term:
                term = ops.scale(fourier_l1(residual), weight * cfg.lambda_fourier)
                parts["fourier"] += term.item()
                terms.append(term)
            for term in terms:
                total = term if total is None else ops.add(total, term)

        return LossTerms(total=total, **parts)

    def __call__(
        self,
        outputs: Sequence[Tensor],
        targets: Sequence[Tensor],
        levels: Optional[Sequence[int]] = None,
    ) -> Tensor:
        return self.terms(outputs, targets, levels).total


def multi_domain_loss(
    outputs: Sequence[Tensor],
    targets: Sequence[Tensor],
    config: Optional[LossConfig] = None,
    levels: Optional[Sequence[int]] = None,
) -> Tensor:
    """Scalar training loss over the available exits."""
    return MultiDomainLoss(config)(outputs, targets, levels)
