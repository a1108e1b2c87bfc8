"""Finite-difference checks of every trainable network at random initialization."""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
from django.conf import settings

from exploration import autoencoder, evaluator
from nncore.functional import log_softmax
from nncore.gradcheck import GradientReport, grad_check
from policy.networks import build_actor_critic
from policy.ppo import ppo_loss_and_gradients

logger = logging.getLogger(__name__)


def network_grad_checks(
    obs_shape: Sequence[int] = (8, 8, 1),
    seed: int = 0,
    batch: int = 4,
    samples_per_block: Optional[int] = None,
    step: Optional[float] = None,
    conv_filters: Sequence[int] = (4, 8),
) -> dict[str, GradientReport]:
    """
    Checks the autoencoder reconstruction loss, the evaluator BCE and the
    PPO loss (with value and entropy terms switched on) against central
    differences. Inputs are uniform noise so ReLUs sit away from their kink.
    """
    samples_per_block = settings.ADAZERO_GRAD_CHECK['samples_per_block'] if samples_per_block is None else samples_per_block
    obs_shape = tuple(obs_shape)
    rng = np.random.default_rng(seed)
    states = rng.uniform(size=(batch,) + obs_shape)
    fake = rng.uniform(size=(batch,) + obs_shape)
    reports: dict[str, GradientReport] = {}

    ae = autoencoder.build_autoencoder(obs_shape, rng, conv_filters=conv_filters, bottleneck=16)
    reports['autoencoder'] = grad_check(
        ae, lambda: _single(autoencoder.loss_and_gradients(ae, states)), step, samples_per_block, rng
    )

    ev = evaluator.build_evaluator(obs_shape, rng, conv_filters=conv_filters)
    reports['evaluator'] = grad_check(
        ev, lambda: _single(evaluator.loss_and_gradients(ev, states, fake)), step, samples_per_block, rng
    )

    policy = build_actor_critic(obs_shape, 4, rng, conv_filters=conv_filters, hidden=16)
    actions = rng.integers(0, policy.n_actions, size=batch)
    logits, _ = policy.forward(states)
    old_logprobs = log_softmax(logits, axis=1)[np.arange(batch), actions]
    advantages, returns = rng.normal(size=batch), rng.normal(size=batch)

    def policy_loss():
        loss, grads = ppo_loss_and_gradients(
            policy, states, actions, old_logprobs, advantages, returns, value_coef=0.5, entropy_coef=0.01,
        )
        return loss.total, grads

    reports['policy'] = grad_check(policy.param_sets, policy_loss, step, samples_per_block, rng)

    for name, report in reports.items():
        logger.info("grad check %s: max relative error %.3e", name, report.max_relative_error)
    return reports


def _single(result):
    loss, grads = result
    return loss, [grads]
