from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from django.conf import settings

from adazeroLab.exceptions import ContractViolation, TrainingHalted

from .network import Gradients, ParamSet

logger = logging.getLogger(__name__)


def adam_step(
    params: ParamSet,
    grads: Gradients,
    lr: Optional[float] = None,
    beta1: Optional[float] = None,
    beta2: Optional[float] = None,
    eps: Optional[float] = None,
) -> ParamSet:
    """
    One bias-corrected Adam update, in place. Moments live in ``params.adam``.
    Defaults come from ``settings.ADAZERO_ADAM``.
    """
    defaults = settings.ADAZERO_ADAM
    lr = defaults['lr'] if lr is None else lr
    beta1 = defaults['beta1'] if beta1 is None else beta1
    beta2 = defaults['beta2'] if beta2 is None else beta2
    eps = defaults['eps'] if eps is None else eps

    if len(grads.blocks) != len(params.layers):
        raise ContractViolation(f"gradient has {len(grads.blocks)} blocks, network has {len(params.layers)} layers")
    if not grads.is_finite():
        raise TrainingHalted("non-finite gradient passed to adam_step", {'adam_t': params.adam.t})

    state = params.adam
    state.t += 1
    correction1 = 1.0 - beta1 ** state.t
    correction2 = 1.0 - beta2 ** state.t
    for index, layer in enumerate(params.layers):
        for name, value in layer.params.items():
            g = grads.blocks[index].get(name)
            if g is None or g.shape != value.shape:
                raise ContractViolation(f"missing or misshapen gradient for layer {index} {name}")
            m = state.m[index][name]
            v = state.v[index][name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            value -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    params.assert_finite()
    return params


def global_norm(grads: Sequence[Gradients]) -> float:
    return math.sqrt(sum(float(np.sum(value * value)) for g in grads for _, _, value in g.items()))


def clip_grad_norm(grads: Sequence[Gradients], max_norm: float) -> tuple[list[Gradients], float]:
    """Rescale a group of gradients so their joint L2 norm is at most ``max_norm``."""
    norm = global_norm(grads)
    if not math.isfinite(norm):
        raise TrainingHalted("non-finite gradient norm", {'norm': norm})
    if max_norm <= 0 or norm <= max_norm:
        return list(grads), norm
    factor = max_norm / (norm + 1e-12)
    logger.debug("clipping gradient norm %.4g to %.4g", norm, max_norm)
    return [g.scaled(factor) for g in grads], norm


@dataclass(frozen=True)
class AdamSettings:
    """
    Optimizer hyperparameters bundled for the components that own a ParamSet.

    ``half_life`` > 0 decays the step size exponentially with the network's
    own Adam step count: lr · 0.5 ** (t / half_life). Zero keeps lr constant.
    """

    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    half_life: float = 0.0

    @classmethod
    def defaults(cls, **overrides) -> 'AdamSettings':
        values = dict(settings.ADAZERO_ADAM)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def step_size(self, completed_steps: int) -> float:
        if self.half_life <= 0:
            return self.lr
        return self.lr * 0.5 ** (completed_steps / self.half_life)

    def apply(self, params: ParamSet, grads: Gradients) -> ParamSet:
        return adam_step(params, grads, self.step_size(params.adam.t), self.beta1, self.beta2, self.eps)
