"""Central finite-difference verification of backward passes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from django.conf import settings

from .network import Gradients, ParamSet

# loss_fn() evaluates the loss at the current parameter values and returns
# (loss, analytic gradients), one Gradients per ParamSet being checked.
LossFn = Callable[[], tuple[float, Sequence[Gradients]]]


@dataclass
class BlockError:
    network: int
    layer: int
    name: str
    max_relative_error: float
    checked: int


@dataclass
class GradientReport:
    max_relative_error: float = 0.0
    blocks: list[BlockError] = field(default_factory=list)

    def passed(self, tolerance: Optional[float] = None) -> bool:
        tolerance = settings.ADAZERO_GRAD_CHECK['tolerance'] if tolerance is None else tolerance
        return self.max_relative_error < tolerance

    def as_dict(self) -> dict:
        return {
            'max_relative_error': self.max_relative_error,
            'blocks': [vars(block) for block in self.blocks],
        }


def relative_error(analytic: float, numeric: float, floor: float = 1e-5) -> float:
    # The floor keeps round-off on near-zero gradients from reading as a failure.
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(
    params: Union[ParamSet, Sequence[ParamSet]],
    loss_fn: LossFn,
    step: Optional[float] = None,
    samples_per_block: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> GradientReport:
    """
    Compare analytic gradients against central differences
    (L(θ+h) − L(θ−h)) / 2h, one coordinate at a time.

    ``samples_per_block`` bounds how many coordinates of each parameter
    array are perturbed; ``None`` checks every coordinate.
    """
    networks = [params] if isinstance(params, ParamSet) else list(params)
    step = settings.ADAZERO_GRAD_CHECK['step'] if step is None else step
    rng = rng if rng is not None else np.random.default_rng(0)

    _, analytic = loss_fn()
    report = GradientReport()
    for net_index, (network, grads) in enumerate(zip(networks, analytic)):
        for layer_index, name, value in network.parameters():
            flat = value.reshape(-1)
            analytic_flat = grads.blocks[layer_index][name].reshape(-1)
            if samples_per_block is None or samples_per_block >= flat.size:
                coords = np.arange(flat.size)
            else:
                coords = rng.choice(flat.size, size=samples_per_block, replace=False)
            worst = 0.0
            for coord in coords:
                original = flat[coord]
                flat[coord] = original + step
                plus, _ = loss_fn()
                flat[coord] = original - step
                minus, _ = loss_fn()
                flat[coord] = original
                numeric = (plus - minus) / (2.0 * step)
                worst = max(worst, relative_error(float(analytic_flat[coord]), numeric))
            report.blocks.append(BlockError(net_index, layer_index, name, worst, len(coords)))
            report.max_relative_error = max(report.max_relative_error, worst)
    return report
