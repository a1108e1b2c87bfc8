"""
On-policy rollout collection and generalized advantage estimation.

A rollout steps the environment ``horizon`` times with actions sampled
from the current policy, then runs the intrinsic pipeline
(reconstruct → score → combine) over the states the steps produced,
with the autoencoder and evaluator held fixed for the whole rollout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from adazeroLab.exceptions import ContractViolation
from envs.density import VisitDensity, accumulate_density
from envs.grids import Cell, GridWorld
from exploration.mixing import RewardBatch, RewardBreakdown, RunningMeanStd, pipeline_batch
from nncore.functional import entropy_array, log_softmax
from nncore.network import ParamSet

from .networks import ActorCritic

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: int
    logprob: float
    value_estimate: float
    breakdown: RewardBreakdown
    done: bool

    def __post_init__(self) -> None:
        if not self.logprob <= 0.0:
            raise ContractViolation(f"log-probability must be <= 0, got {self.logprob}")


@dataclass(frozen=True)
class EntropyRecord:
    step: int
    mean_policy_entropy: float
    mean_alpha: float
    mean_r_int: float

    def __post_init__(self) -> None:
        if self.mean_policy_entropy < 0.0:
            raise ContractViolation(f"negative policy entropy {self.mean_policy_entropy}")


@dataclass
class EpisodeTracker:
    """Extrinsic return bookkeeping that survives across rollouts."""

    running_return: float = 0.0
    running_length: int = 0
    returns: list[float] = field(default_factory=list)
    lengths: list[int] = field(default_factory=list)
    successes: list[bool] = field(default_factory=list)

    def record_step(self, r_ext: float, done: bool, reached_goal: bool) -> None:
        self.running_return += r_ext
        self.running_length += 1
        if done:
            self.returns.append(self.running_return)
            self.lengths.append(self.running_length)
            self.successes.append(reached_goal)
            self.running_return = 0.0
            self.running_length = 0

    def success_rate(self, last: int = 100) -> Optional[float]:
        if not self.successes:
            return None
        return float(np.mean(self.successes[-last:]))


@dataclass
class RolloutBatch:
    obs: np.ndarray
    next_obs: np.ndarray
    actions: np.ndarray
    logprobs: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    rewards: RewardBatch
    bootstrap_value: float
    entropies: np.ndarray
    positions: list[Cell] = field(default_factory=list)
    episode_returns: list[float] = field(default_factory=list)
    episode_successes: list[bool] = field(default_factory=list)
    gamma: Optional[float] = None
    lam: Optional[float] = None
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.actions)

    def __getitem__(self, index: int) -> Transition:
        return Transition(
            obs=self.obs[index],
            action=int(self.actions[index]),
            logprob=float(self.logprobs[index]),
            value_estimate=float(self.values[index]),
            breakdown=self.rewards[index],
            done=bool(self.dones[index]),
        )

    @property
    def transitions(self) -> list[Transition]:
        return [self[i] for i in range(len(self))]

    def finish(self, gamma: float, lam: float) -> 'RolloutBatch':
        """Fill advantages and returns from r_total with a single discount."""
        self.advantages, self.returns = compute_gae(
            self.rewards.r_total, self.values, self.dones, self.bootstrap_value, gamma, lam
        )
        self.gamma, self.lam = gamma, lam
        return self

    def entropy_record(self, step: int) -> EntropyRecord:
        return EntropyRecord(
            step=step,
            mean_policy_entropy=float(np.mean(self.entropies)),
            mean_alpha=float(np.mean(self.rewards.alpha)),
            mean_r_int=float(np.mean(self.rewards.r_int_raw)),
        )


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap_value: float,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """
    δ_t = r_t + γ V(s_{t+1})(1 − d_t) − V(s_t);  A_t = δ_t + γλ(1 − d_t) A_{t+1}.

    ``bootstrap_value`` is V of the state after the last step. A done flag
    (goal or time limit) cuts both the bootstrap and the recursion.
    Returns (advantages, returns = advantages + values).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    nonterminal = 1.0 - np.asarray(dones, dtype=np.float64)
    if not (rewards.shape == values.shape == nonterminal.shape) or rewards.ndim != 1:
        raise ContractViolation(f"GAE inputs disagree: {rewards.shape}, {values.shape}, {nonterminal.shape}")
    if not 0.0 <= gamma < 1.0:
        raise ContractViolation(f"discount must lie in [0, 1), got {gamma}")
    if not 0.0 <= lam <= 1.0:
        raise ContractViolation(f"GAE lambda must lie in [0, 1], got {lam}")

    next_values = np.append(values[1:], float(bootstrap_value))
    advantages = np.zeros_like(rewards)
    last = 0.0
    for t in reversed(range(len(rewards))):
        delta = rewards[t] + gamma * next_values[t] * nonterminal[t] - values[t]
        last = delta + gamma * lam * nonterminal[t] * last
        advantages[t] = last
    if not np.all(np.isfinite(advantages)):
        raise ContractViolation("non-finite advantages")
    return advantages, advantages + values


def normalize_advantages(advantages: np.ndarray, min_std: float = 1e-8) -> np.ndarray:
    advantages = np.asarray(advantages, dtype=np.float64)
    if advantages.size <= 1:
        # std is undefined for one sample; keep the sign of the lone advantage.
        return advantages.copy()
    std = float(advantages.std())
    if std < min_std:
        logger.warning("advantage std %.3g below %.1g; normalizing with the floor", std, min_std)
    return (advantages - advantages.mean()) / max(std, min_std)


def collect_rollout(
    policy: ActorCritic,
    env: GridWorld,
    ae: ParamSet,
    ev: ParamSet,
    horizon: int,
    rng: np.random.Generator,
    gamma: float = 0.99,
    lam: float = 0.95,
    forced_alpha: Optional[float] = None,
    density: Optional[VisitDensity] = None,
    normalizer: Optional[RunningMeanStd] = None,
    tracker: Optional[EpisodeTracker] = None,
) -> RolloutBatch:
    """
    Continues the environment's current episode (resetting it first if it
    is finished). Every visited cell is added to ``density``.
    """
    if horizon < 1:
        raise ContractViolation(f"horizon must be >= 1, got {horizon}")
    tracker = tracker if tracker is not None else EpisodeTracker()
    episodes_before = len(tracker.returns)

    obs = env.reset() if env.done else env.render_observation()
    observations, next_observations = [], []
    actions = np.zeros(horizon, dtype=np.int64)
    logprobs = np.zeros(horizon)
    values = np.zeros(horizon)
    dones = np.zeros(horizon, dtype=bool)
    r_ext = np.zeros(horizon)
    entropies = np.zeros(horizon)
    positions: list[Cell] = []

    for t in range(horizon):
        logits, value = policy.forward(obs[None])
        log_probs = log_softmax(logits[0])
        probs = np.exp(log_probs)
        action = int(rng.choice(policy.n_actions, p=probs / probs.sum()))
        result = env.step(action)

        observations.append(obs)
        next_observations.append(result.obs)
        actions[t] = action
        logprobs[t] = min(float(log_probs[action]), 0.0)
        values[t] = float(value[0])
        dones[t] = result.done
        r_ext[t] = result.r_ext
        entropies[t] = float(entropy_array(probs))

        position = result.info.get('position')
        if position is not None:
            positions.append(position)
            if density is not None:
                accumulate_density(density, position)
        tracker.record_step(result.r_ext, result.done, bool(result.info.get('reached_goal', False)))
        obs = env.reset() if result.done else result.obs

    _, bootstrap = policy.forward(obs[None])
    next_obs = np.stack(next_observations)
    rewards = pipeline_batch(next_obs, r_ext, ae, ev, forced_alpha=forced_alpha, normalizer=normalizer)
    batch = RolloutBatch(
        obs=np.stack(observations),
        next_obs=next_obs,
        actions=actions,
        logprobs=logprobs,
        values=values,
        dones=dones,
        rewards=rewards,
        bootstrap_value=float(bootstrap[0]),
        entropies=entropies,
        positions=positions,
        episode_returns=tracker.returns[episodes_before:],
        episode_successes=tracker.successes[episodes_before:],
    )
    return batch.finish(gamma, lam)
