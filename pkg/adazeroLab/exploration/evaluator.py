"""
Mastery evaluation network f_ω: a binary classifier trained with labels
real state → 1, reconstruction → 0. At inference it only sees
reconstructions ŝ, and α(ŝ) = f_ω(ŝ) is the mastery level.

The network itself ends in a logit; the sigmoid is applied here so the
cross-entropy can be computed in its stable log-sum-exp form.

The step size decays (``settings.ADAZERO_EVALUATOR_ADAM``), so the real/fake
boundary is drawn while reconstructions are still poor; reconstructions that
later sharpen past it score a higher α.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from django.conf import settings
from scipy.special import expit

from adazeroLab.exceptions import ContractViolation, TrainingHalted
from nncore.layers import Conv2D, Dense, Flatten, ReLU
from nncore.network import Gradients, ParamSet
from nncore.optim import AdamSettings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MasteryScore:
    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ContractViolation(f"mastery {self.alpha} outside [0, 1]")


def build_evaluator(obs_shape: Sequence[int], rng: np.random.Generator, conv_filters: Sequence[int] = (8, 16)) -> ParamSet:
    layers = []
    shape = tuple(obs_shape)
    for filters in conv_filters:
        conv = Conv2D(shape, filters, kernel=3, stride=2, padding=1, rng=rng)
        layers += [conv, ReLU(conv.output_shape)]
        shape = conv.output_shape
    flatten = Flatten(shape)
    layers += [flatten, Dense(flatten.output_shape, 1, rng=rng)]
    return ParamSet(layers)


def _logits(ev: ParamSet, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != len(ev.input_shape) + 1 or batch.shape[1:] != ev.input_shape:
        raise ContractViolation(f"inputs of shape {batch.shape[1:]} do not match evaluator input {ev.input_shape}")
    return ev.forward(batch)[:, 0]


def score_batch(ev: ParamSet, obs_hat: np.ndarray) -> np.ndarray:
    return expit(_logits(ev, obs_hat))


def score(ev: ParamSet, obs_hat: np.ndarray) -> MasteryScore:
    obs_hat = np.asarray(obs_hat, dtype=np.float64)
    if obs_hat.shape != ev.input_shape:
        raise ContractViolation(f"input shape {obs_hat.shape} does not match evaluator input {ev.input_shape}")
    return MasteryScore(alpha=float(score_batch(ev, obs_hat[None])[0]))


def loss_and_gradients(ev: ParamSet, real_batch: np.ndarray, fake_batch: np.ndarray) -> tuple[float, Gradients]:
    real_batch = np.asarray(real_batch, dtype=np.float64)
    fake_batch = np.asarray(fake_batch, dtype=np.float64)
    if len(real_batch) == 0 or len(fake_batch) == 0:
        raise ContractViolation("evaluator train_step needs non-empty real and fake batches")
    inputs = np.concatenate([real_batch, fake_batch], axis=0)
    labels = np.concatenate([np.ones(len(real_batch)), np.zeros(len(fake_batch))])
    logits = _logits(ev, inputs)
    # BCE written as softplus(z) − y·z
    loss = float(np.mean(np.logaddexp(0.0, logits) - labels * logits))
    if not np.isfinite(loss):
        raise TrainingHalted("evaluator loss is not finite", {'component': 'evaluator', 'loss': loss})
    grad = (expit(logits) - labels) / len(inputs)
    return loss, ev.backward(grad[:, None])


def default_adam(**overrides) -> AdamSettings:
    values = dict(settings.ADAZERO_EVALUATOR_ADAM)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return AdamSettings.defaults(**values)


def train_step(
    ev: ParamSet,
    real_batch: np.ndarray,
    fake_batch: np.ndarray,
    adam: Optional[AdamSettings] = None,
) -> float:
    """One Adam step on binary cross-entropy (real=1, fake=0); returns the pre-step loss."""
    adam = adam or default_adam()
    loss, grads = loss_and_gradients(ev, real_batch, fake_batch)
    adam.apply(ev, grads)
    logger.debug("evaluator step %d loss %.6f", ev.adam.t, loss)
    return loss
