"""
PPO clipped-surrogate updates for the actor-critic, plus the policy
helpers used by the analytic checks and the evaluation harness.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from adazeroLab.exceptions import ContractViolation, TrainingHalted
from envs.grids import Cell, GridWorld
from nncore.functional import PolicyDistribution, entropy_array, log_softmax, softmax
from nncore.network import Gradients
from nncore.optim import AdamSettings, clip_grad_norm

from .networks import ActorCritic, StochasticPolicy
from .rollout import RolloutBatch, normalize_advantages

logger = logging.getLogger(__name__)


@dataclass
class PPOStats:
    policy_loss: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    approx_kl: float = 0.0
    clip_fraction: float = 0.0
    grad_norm: float = 0.0
    minibatches: int = 0

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class PPOLoss:
    total: float
    policy_loss: float
    value_loss: float
    entropy: float
    approx_kl: float
    clip_fraction: float


def clipped_surrogate(ratios: np.ndarray, advantages: np.ndarray, clip_eps: float) -> tuple[float, np.ndarray]:
    """
    mean(min(r·A, clip(r, 1−ε, 1+ε)·A)) and its gradient w.r.t. each ratio.
    ``clip_eps = inf`` gives the unclipped surrogate mean(r·A).
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    if ratios.shape != advantages.shape or ratios.size == 0:
        raise ContractViolation(f"ratios {ratios.shape} and advantages {advantages.shape} must match and be non-empty")
    if clip_eps < 0:
        raise ContractViolation(f"clip epsilon must be non-negative, got {clip_eps}")
    unclipped = ratios * advantages
    clipped = np.clip(ratios, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    # Where the clipped term is the minimum the objective is flat in r.
    active = unclipped <= clipped
    grad = np.where(active, advantages, 0.0) / ratios.size
    return float(np.mean(np.minimum(unclipped, clipped))), grad


def ppo_loss_and_gradients(
    policy: ActorCritic,
    obs: np.ndarray,
    actions: np.ndarray,
    old_logprobs: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    clip_eps: float = 0.2,
    value_coef: float = 0.5,
    entropy_coef: float = 0.0,
) -> tuple[PPOLoss, list[Gradients]]:
    """
    loss = −surrogate + c_v·mean((V − R)²) − c_H·mean(H(π)).
    Gradients are returned for (trunk, policy_head, value_head).
    """
    actions = np.asarray(actions, dtype=np.int64)
    m = len(actions)
    logits, values = policy.forward(obs)
    log_probs = log_softmax(logits)
    probs = np.exp(log_probs)
    rows = np.arange(m)
    ratios = np.exp(log_probs[rows, actions] - old_logprobs)

    objective, d_ratio = clipped_surrogate(ratios, advantages, clip_eps)
    value_err = values - returns
    value_loss = float(np.mean(value_err ** 2))
    entropies = entropy_array(probs)
    mean_entropy_ = float(np.mean(entropies))
    total = -objective + value_coef * value_loss - entropy_coef * mean_entropy_
    if not math.isfinite(total):
        raise TrainingHalted(
            "PPO loss is not finite",
            {'component': 'policy', 'policy_loss': -objective, 'value_loss': value_loss, 'entropy': mean_entropy_},
        )

    onehot = np.zeros_like(probs)
    onehot[rows, actions] = 1.0
    # d log π(a)/dz = onehot − π;  dH/dz = −π (log π + H)
    logit_grad = -(d_ratio * ratios)[:, None] * (onehot - probs)
    if entropy_coef:
        logit_grad += entropy_coef * probs * (log_probs + entropies[:, None]) / m
    value_grad = value_coef * 2.0 * value_err / m
    grads = policy.backward(logit_grad, value_grad)

    loss = PPOLoss(
        total=total,
        policy_loss=-objective,
        value_loss=value_loss,
        entropy=mean_entropy_,
        approx_kl=float(np.mean((ratios - 1.0) - np.log(ratios))),
        clip_fraction=float(np.mean(np.abs(ratios - 1.0) > clip_eps)),
    )
    return loss, grads


def ppo_update(
    policy: ActorCritic,
    batch: RolloutBatch,
    clip_eps: float = 0.2,
    epochs: int = 4,
    minibatch: int = 64,
    adam: Optional[AdamSettings] = None,
    value_coef: float = 0.5,
    entropy_coef: float = 0.0,
    max_grad_norm: float = 0.5,
    rng: Optional[np.random.Generator] = None,
) -> PPOStats:
    """
    ``epochs`` passes of shuffled minibatch Adam steps over one rollout.
    Policy and value share the trunk, so one step updates all three blocks.
    """
    if batch.advantages is None or batch.returns is None:
        raise ContractViolation("rollout batch has no advantages; call finish() first")
    if epochs < 1 or minibatch < 1:
        raise ContractViolation(f"epochs and minibatch must be >= 1, got {epochs}, {minibatch}")
    adam = adam or AdamSettings.defaults()
    rng = rng if rng is not None else np.random.default_rng(0)
    advantages = normalize_advantages(batch.advantages)
    n = len(batch)

    stats = PPOStats()
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, minibatch):
            idx = order[start:start + minibatch]
            loss, grads = ppo_loss_and_gradients(
                policy,
                batch.obs[idx],
                batch.actions[idx],
                batch.logprobs[idx],
                advantages[idx],
                batch.returns[idx],
                clip_eps=clip_eps,
                value_coef=value_coef,
                entropy_coef=entropy_coef,
            )
            grads, norm = clip_grad_norm(grads, max_grad_norm)
            for block, block_grads in zip(policy.param_sets, grads):
                adam.apply(block, block_grads)
            stats.policy_loss += loss.policy_loss
            stats.value_loss += loss.value_loss
            stats.entropy += loss.entropy
            stats.approx_kl += loss.approx_kl
            stats.clip_fraction += loss.clip_fraction
            stats.grad_norm += norm
            stats.minibatches += 1
            logger.debug("ppo minibatch loss %.5f kl %.5f", loss.total, loss.approx_kl)

    for name in ('policy_loss', 'value_loss', 'entropy', 'approx_kl', 'clip_fraction', 'grad_norm'):
        setattr(stats, name, getattr(stats, name) / stats.minibatches)
    return stats


def softmax_policy_from_q(q_values) -> PolicyDistribution:
    """π(a|s) ∝ exp Q(s, a)."""
    return softmax(q_values)


def mean_entropy(policy: StochasticPolicy, probe_states: np.ndarray) -> float:
    probe_states = np.asarray(probe_states, dtype=np.float64)
    if len(probe_states) == 0:
        raise ContractViolation("mean_entropy needs at least one probe state")
    return float(np.mean(entropy_array(policy.action_probabilities(probe_states))))


@dataclass(frozen=True)
class GreedyPath:
    cells: tuple[Cell, ...]
    actions: tuple[int, ...]
    reached_goal: bool

    @property
    def length(self) -> int:
        return len(self.actions)


def greedy_path(policy: StochasticPolicy, env: GridWorld, max_steps: Optional[int] = None) -> GreedyPath:
    """Argmax rollout from the start cell; resets ``env``."""
    max_steps = env.spec.max_episode_steps if max_steps is None else max_steps
    obs = env.reset()
    cells, actions = [env.position], []
    reached_goal = False
    for _ in range(max_steps):
        action = int(np.argmax(policy.action_probabilities(obs[None])[0]))
        result = env.step(action)
        cells.append(env.position)
        actions.append(action)
        if result.done:
            reached_goal = bool(result.info['reached_goal'])
            break
        obs = result.obs
    return GreedyPath(tuple(cells), tuple(actions), reached_goal)
