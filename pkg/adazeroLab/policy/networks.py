"""
Actor-critic network: a shared convolutional trunk feeding a softmax
policy head and a scalar value head. Each block is its own ParamSet with
its own Adam state; gradients from both heads meet at the trunk output.
"""

from __future__ import annotations

from pathlib import Path
from typing import Protocol, Sequence, Union

import numpy as np

from adazeroLab.exceptions import ContractViolation
from nncore.checkpoint import load_checkpoint, save_checkpoint
from nncore.functional import PolicyDistribution, softmax_array
from nncore.layers import Conv2D, Dense, Flatten, ReLU
from nncore.network import Gradients, ParamSet

BLOCKS = ('trunk', 'policy_head', 'value_head')


class StochasticPolicy(Protocol):
    n_actions: int

    def action_probabilities(self, obs: np.ndarray) -> np.ndarray:
        """(N, ...) observations → (N, n_actions) probabilities."""


class ActorCritic:

    def __init__(self, trunk: ParamSet, policy_head: ParamSet, value_head: ParamSet) -> None:
        if policy_head.input_shape != trunk.output_shape or value_head.input_shape != trunk.output_shape:
            raise ContractViolation(
                f"heads expect {policy_head.input_shape} / {value_head.input_shape}, trunk gives {trunk.output_shape}"
            )
        if value_head.output_shape != (1,):
            raise ContractViolation(f"value head must output one scalar, got {value_head.output_shape}")
        self.trunk = trunk
        self.policy_head = policy_head
        self.value_head = value_head

    def __repr__(self) -> str:
        return f"ActorCritic({self.observation_shape} -> {self.n_actions} actions; {self.n_params} params)"

    @property
    def observation_shape(self) -> tuple[int, ...]:
        return self.trunk.input_shape

    @property
    def n_actions(self) -> int:
        return self.policy_head.output_shape[0]

    @property
    def n_params(self) -> int:
        return sum(block.n_params for block in self.param_sets)

    @property
    def param_sets(self) -> list[ParamSet]:
        return [self.trunk, self.policy_head, self.value_head]

    def forward(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Logits (N, A) and values (N,)."""
        features = self.trunk.forward(obs)
        return self.policy_head.forward(features), self.value_head.forward(features)[:, 0]

    def evaluate(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        logits, values = self.forward(obs)
        return softmax_array(logits), values

    def action_probabilities(self, obs: np.ndarray) -> np.ndarray:
        return self.evaluate(obs)[0]

    def distribution(self, obs: np.ndarray) -> PolicyDistribution:
        obs = np.asarray(obs, dtype=np.float64)
        return PolicyDistribution(self.action_probabilities(obs[None])[0])

    def backward(self, logit_grad: np.ndarray, value_grad: np.ndarray) -> list[Gradients]:
        """Gradients for (trunk, policy_head, value_head) after a ``forward`` on the same batch."""
        policy_grads = self.policy_head.backward(logit_grad)
        value_grads = self.value_head.backward(np.asarray(value_grad, dtype=np.float64)[:, None])
        trunk_grads = self.trunk.backward(policy_grads.input_grad + value_grads.input_grad)
        return [trunk_grads, policy_grads, value_grads]

    def save(self, directory: Union[str, Path]) -> Path:
        directory = Path(directory)
        for name, block in zip(BLOCKS, self.param_sets):
            save_checkpoint(block, directory / f'{name}.npz')
        return directory

    @classmethod
    def load(cls, directory: Union[str, Path]) -> 'ActorCritic':
        directory = Path(directory)
        return cls(*(load_checkpoint(directory / f'{name}.npz') for name in BLOCKS))


def build_actor_critic(
    obs_shape: Sequence[int],
    n_actions: int,
    rng: np.random.Generator,
    conv_filters: Sequence[int] = (8, 16),
    hidden: int = 64,
) -> ActorCritic:
    layers = []
    shape = tuple(obs_shape)
    for filters in conv_filters:
        conv = Conv2D(shape, filters, kernel=3, stride=2, padding=1, rng=rng)
        layers += [conv, ReLU(conv.output_shape)]
        shape = conv.output_shape
    flatten = Flatten(shape)
    dense = Dense(flatten.output_shape, hidden, rng=rng)
    layers += [flatten, dense, ReLU((hidden,))]
    policy = Dense((hidden,), n_actions, rng=rng)
    # near-uniform initial policy
    policy.params['weight'] *= 0.01
    value = Dense((hidden,), 1, rng=rng)
    return ActorCritic(ParamSet(layers), ParamSet([policy]), ParamSet([value]))
