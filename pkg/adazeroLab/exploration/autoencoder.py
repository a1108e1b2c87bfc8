"""
State autoencoder g_θ. Its reconstruction error on the raw state image is
the intrinsic reward: R_int(s) = ½‖s − g_θ(s)‖².
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from adazeroLab.exceptions import ContractViolation, TrainingHalted
from nncore.layers import Conv2D, Dense, Flatten, ReLU, Reshape, Sigmoid, Upsample2D
from nncore.network import Gradients, ParamSet
from nncore.optim import AdamSettings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Reconstruction:
    obs_hat: np.ndarray
    r_int: float


def build_autoencoder(
    obs_shape: Sequence[int],
    rng: np.random.Generator,
    conv_filters: Sequence[int] = (8, 16),
    bottleneck: int = 64,
) -> ParamSet:
    """
    Conv encoder (3x3, stride 2) → dense bottleneck → mirrored decoder.
    Each decoder stage undoes one encoder stage: nearest upsampling back to
    that stage's input size, then a 3x3 conv to its channel count. The last
    stage lands on the image channels and a sigmoid keeps pixels in [0, 1].
    """
    obs_shape = tuple(obs_shape)
    layers = []
    shape = obs_shape
    stage_inputs = []
    for filters in conv_filters:
        conv = Conv2D(shape, filters, kernel=3, stride=2, padding=1, rng=rng)
        stage_inputs.append(shape)
        layers += [conv, ReLU(conv.output_shape)]
        shape = conv.output_shape
    flatten = Flatten(shape)
    encode = Dense(flatten.output_shape, bottleneck, rng=rng)
    decode = Dense((bottleneck,), flatten.output_shape[0], rng=rng)
    layers += [flatten, encode, ReLU((bottleneck,)), decode, ReLU(decode.output_shape), Reshape(decode.output_shape, shape)]
    for index, target in enumerate(reversed(stage_inputs)):
        upsample = Upsample2D(shape, target[:2])
        conv = Conv2D(upsample.output_shape, target[-1], kernel=3, stride=1, padding=1, rng=rng)
        layers += [upsample, conv]
        shape = conv.output_shape
        if index < len(stage_inputs) - 1:
            layers.append(ReLU(shape))
    layers.append(Sigmoid(obs_shape))
    return ParamSet(layers)


def reconstruction_error(obs: np.ndarray, obs_hat: np.ndarray) -> np.ndarray:
    """½ Σ (s − ŝ)² per sample over all pixel axes."""
    diff = np.asarray(obs, dtype=np.float64) - obs_hat
    return 0.5 * np.sum(diff * diff, axis=tuple(range(1, diff.ndim)))


def _as_batch(ae: ParamSet, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != len(ae.input_shape) + 1 or batch.shape[1:] != ae.input_shape:
        raise ContractViolation(f"observations of shape {batch.shape[1:]} do not match autoencoder input {ae.input_shape}")
    return batch


def reconstruct_batch(ae: ParamSet, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    batch = _as_batch(ae, batch)
    obs_hat = ae.forward(batch)
    return obs_hat, reconstruction_error(batch, obs_hat)


def reconstruct(ae: ParamSet, obs: np.ndarray) -> Reconstruction:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != ae.input_shape:
        raise ContractViolation(f"observation shape {obs.shape} does not match autoencoder input {ae.input_shape}")
    obs_hat, r_int = reconstruct_batch(ae, obs[None])
    return Reconstruction(obs_hat=obs_hat[0], r_int=float(r_int[0]))


def loss_and_gradients(ae: ParamSet, batch: np.ndarray) -> tuple[float, Gradients]:
    batch = _as_batch(ae, batch)
    if batch.shape[0] == 0:
        raise ContractViolation("autoencoder train_step needs a non-empty batch")
    obs_hat = ae.forward(batch)
    residual = obs_hat - batch
    loss = float(np.mean(reconstruction_error(batch, obs_hat)))
    if not np.isfinite(loss):
        raise TrainingHalted("autoencoder loss is not finite", {'component': 'autoencoder', 'loss': loss})
    return loss, ae.backward(residual / batch.shape[0])


def train_step(ae: ParamSet, batch: np.ndarray, adam: Optional[AdamSettings] = None) -> float:
    """One Adam step on the mean reconstruction loss; returns the pre-step loss."""
    adam = adam or AdamSettings.defaults()
    loss, grads = loss_and_gradients(ae, batch)
    adam.apply(ae, grads)
    logger.debug("autoencoder step %d loss %.6f", ae.adam.t, loss)
    return loss
