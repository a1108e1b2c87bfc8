"""Softmax, log-softmax and entropy over action logits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import entr

from adazeroLab.exceptions import ContractViolation


def softmax_array(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Shift-stabilized softmax along ``axis``."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=axis, keepdims=True)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def entropy_array(probs: np.ndarray, axis: int = -1) -> np.ndarray:
    """Shannon entropy in nats; ``entr`` already treats 0 log 0 as 0."""
    return np.sum(entr(np.asarray(probs, dtype=np.float64)), axis=axis)


@dataclass(frozen=True)
class PolicyDistribution:
    """Action probabilities pi(.|s) for one state."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ContractViolation(f"expected a non-empty probability vector, got shape {probs.shape}")
        if np.any(probs < 0) or not np.isclose(probs.sum(), 1.0, rtol=0.0, atol=1e-9):
            raise ContractViolation(f"not a probability distribution: {probs}")
        object.__setattr__(self, 'probs', probs)

    @property
    def n_actions(self) -> int:
        return self.probs.size

    @property
    def entropy(self) -> float:
        return entropy(self)

    def __len__(self) -> int:
        return self.probs.size

    def __getitem__(self, index: int) -> float:
        return float(self.probs[index])


def softmax(logits) -> PolicyDistribution:
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise ContractViolation(f"softmax expects a logit vector, got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise ContractViolation(f"softmax requires finite logits, got {logits}")
    return PolicyDistribution(softmax_array(logits))


def entropy(dist: PolicyDistribution) -> float:
    """H(pi|s) = -sum pi log pi, in [0, ln n]."""
    return float(entropy_array(dist.probs))
