"""
Adaptive reward mixing: R_total = R_ext + (1 − α(ŝ))·R_int.

α = 1 removes the intrinsic term exactly; α = 0 keeps all of it.
``r_int_raw`` is always ½‖s − ŝ‖². ``r_int_norm`` is the value that is
actually mixed: the raw reward itself, or its running-std rescaling when a
normalizer is in play.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from adazeroLab.exceptions import ContractViolation
from nncore.network import ParamSet

from . import autoencoder, evaluator


@dataclass(frozen=True)
class RewardBreakdown:
    r_ext: float
    r_int_raw: float
    r_int_norm: float
    alpha: float
    r_total: float

    def as_row(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class RewardBatch:
    """Column form of many RewardBreakdowns."""

    r_ext: np.ndarray
    r_int_raw: np.ndarray
    r_int_norm: np.ndarray
    alpha: np.ndarray
    r_total: np.ndarray

    def __len__(self) -> int:
        return len(self.r_total)

    def __getitem__(self, index: int) -> RewardBreakdown:
        return RewardBreakdown(*(float(column[index]) for column in (
            self.r_ext, self.r_int_raw, self.r_int_norm, self.alpha, self.r_total,
        )))


def _check_ranges(r_ext, r_int_raw, alpha) -> None:
    if np.any(~np.isfinite(alpha)) or np.any(alpha < 0.0) or np.any(alpha > 1.0):
        raise ContractViolation(f"mastery must lie in [0, 1], got {alpha}")
    if np.any(r_int_raw < 0.0):
        raise ContractViolation(f"intrinsic reward must be non-negative, got {r_int_raw}")
    if np.any(r_ext < 0.0):
        raise ContractViolation(f"extrinsic reward must be non-negative, got {r_ext}")


def combine(r_ext: float, r_int_raw: float, alpha: float, r_int_norm: Optional[float] = None) -> RewardBreakdown:
    r_ext, r_int_raw, alpha = float(r_ext), float(r_int_raw), float(alpha)
    r_int_norm = r_int_raw if r_int_norm is None else float(r_int_norm)
    _check_ranges(np.float64(r_ext), np.array([r_int_raw, r_int_norm]), np.float64(alpha))
    return RewardBreakdown(r_ext, r_int_raw, r_int_norm, alpha, r_ext + (1.0 - alpha) * r_int_norm)


def combine_batch(
    r_ext: np.ndarray,
    r_int_raw: np.ndarray,
    alpha: np.ndarray,
    r_int_norm: Optional[np.ndarray] = None,
) -> RewardBatch:
    r_ext = np.asarray(r_ext, dtype=np.float64)
    r_int_raw = np.asarray(r_int_raw, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    r_int_norm = r_int_raw if r_int_norm is None else np.asarray(r_int_norm, dtype=np.float64)
    _check_ranges(r_ext, r_int_raw, alpha)
    _check_ranges(r_ext, r_int_norm, alpha)
    return RewardBatch(r_ext, r_int_raw, r_int_norm, alpha, r_ext + (1.0 - alpha) * r_int_norm)


class RunningMeanStd:
    """Streaming mean/variance (parallel Welford update)."""

    def __init__(self, epsilon: float = 1e-4) -> None:
        self.mean = 0.0
        self.var = 1.0
        self.count = epsilon

    def update(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size == 0:
            return
        batch_mean, batch_var, batch_count = float(values.mean()), float(values.var()), values.size
        delta = batch_mean - self.mean
        total = self.count + batch_count
        self.mean += delta * batch_count / total
        m2 = self.var * self.count + batch_var * batch_count + delta ** 2 * self.count * batch_count / total
        self.var = m2 / total
        self.count = total

    @property
    def std(self) -> float:
        return float(np.sqrt(self.var))

    def normalize(self, values: np.ndarray) -> np.ndarray:
        # Scale only; shifting by the mean could make rewards negative.
        return np.asarray(values, dtype=np.float64) / (self.std + 1e-8)


def pipeline_batch(
    obs: np.ndarray,
    r_ext: np.ndarray,
    ae_snapshot: ParamSet,
    ev_snapshot: ParamSet,
    forced_alpha: Optional[float] = None,
    normalizer: Optional[RunningMeanStd] = None,
) -> RewardBatch:
    """
    reconstruct → score → combine, in that order. The evaluator sees ŝ,
    never the raw state. ``forced_alpha`` overrides the scored mastery for
    ablations while every other step still runs.
    """
    obs_hat, r_int = autoencoder.reconstruct_batch(ae_snapshot, obs)
    alpha = evaluator.score_batch(ev_snapshot, obs_hat)
    if forced_alpha is not None:
        alpha = np.full_like(alpha, float(forced_alpha))
    r_int_norm = None
    if normalizer is not None:
        normalizer.update(r_int)
        r_int_norm = normalizer.normalize(r_int)
    return combine_batch(r_ext, r_int, alpha, r_int_norm)


def per_step_pipeline(
    obs: np.ndarray,
    r_ext: float,
    ae_snapshot: ParamSet,
    ev_snapshot: ParamSet,
    forced_alpha: Optional[float] = None,
) -> RewardBreakdown:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != ae_snapshot.input_shape:
        raise ContractViolation(f"observation shape {obs.shape} does not match autoencoder input {ae_snapshot.input_shape}")
    return pipeline_batch(obs[None], np.array([r_ext]), ae_snapshot, ev_snapshot, forced_alpha)[0]
