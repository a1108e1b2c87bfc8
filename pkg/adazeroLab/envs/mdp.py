from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from adazeroLab.exceptions import ContractViolation

from .grids import StepResult


@dataclass(frozen=True)
class TwoActionMDP:
    """
    Single-state, two-action MDP with one-step episodes.

    Action i pays ``r_ext[i]`` and carries an intrinsic bonus ``r_int[i]``.
    Episodes end after one step, so Q_ext(s, a_i) = r_ext[i] and the
    intrinsic return δ(s, a_i) = r_int[i] exactly.
    """

    r_ext: tuple[float, float]
    r_int: tuple[float, float] = (0.0, 0.0)

    n_actions = 2
    observation_shape = (1, 1, 1)

    def __post_init__(self) -> None:
        if len(self.r_ext) != 2 or len(self.r_int) != 2:
            raise ContractViolation("TwoActionMDP needs exactly two actions")
        if min(self.r_ext) < 0 or min(self.r_int) < 0:
            raise ContractViolation("rewards are non-negative")

    def reset(self, seed=None) -> np.ndarray:
        return np.zeros(self.observation_shape)

    def step(self, action: int) -> StepResult:
        if action not in (0, 1):
            raise ContractViolation(f"unknown action {action!r}")
        return StepResult(
            obs=np.zeros(self.observation_shape),
            r_ext=float(self.r_ext[action]),
            done=True,
            info={'r_int': float(self.r_int[action])},
        )

    def q_ext(self) -> np.ndarray:
        return np.asarray(self.r_ext, dtype=np.float64)

    def delta(self) -> np.ndarray:
        return np.asarray(self.r_int, dtype=np.float64)
