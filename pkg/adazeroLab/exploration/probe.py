"""
Joint-training probe on a frozen state set: the autoencoder and the
mastery evaluator are trained together exactly as in the training loop
(evaluator sees the states as real and their reconstructions as fake),
and we watch the intrinsic reward, α, and the effective bonus (1 − α)·r_int.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import spearmanr

from nncore.network import ParamSet
from nncore.optim import AdamSettings

from . import autoencoder, evaluator

logger = logging.getLogger(__name__)

TRACE_EVERY = 100


@dataclass
class MasteryProbe:
    steps: int
    initial_median_r_int: float
    final_median_r_int: float
    initial_median_alpha: float
    final_median_alpha: float
    initial_effective_intrinsic: float
    final_effective_intrinsic: float
    coupling_spearman: Optional[float] = None
    # (step, median α) every TRACE_EVERY joint steps
    alpha_trace: list[tuple[int, float]] = field(default_factory=list)

    @property
    def effective_ratio(self) -> float:
        if self.initial_effective_intrinsic == 0.0:
            return 0.0
        return self.final_effective_intrinsic / self.initial_effective_intrinsic

    def alpha_at(self, step: int) -> float:
        """Median α at the last trace point at or before ``step``."""
        earlier = [alpha for at, alpha in self.alpha_trace if at <= step]
        return earlier[-1] if earlier else self.initial_median_alpha

    def as_dict(self) -> dict:
        data = asdict(self)
        data['alpha_trace'] = [list(point) for point in self.alpha_trace]
        data['effective_ratio'] = self.effective_ratio
        return data


def _medians(ae: ParamSet, ev: ParamSet, states: np.ndarray) -> tuple[float, float, float]:
    obs_hat, r_int = autoencoder.reconstruct_batch(ae, states)
    alpha = evaluator.score_batch(ev, obs_hat)
    return float(np.median(r_int)), float(np.median(alpha)), float(np.median((1.0 - alpha) * r_int))


def coupling_correlation(ae: ParamSet, ev: ParamSet, probe_states: np.ndarray) -> float:
    """Spearman correlation between −r_int and α over a probe set."""
    obs_hat, r_int = autoencoder.reconstruct_batch(ae, probe_states)
    alpha = evaluator.score_batch(ev, obs_hat)
    rho = spearmanr(-r_int, alpha).statistic
    return float(rho) if np.isfinite(rho) else 0.0


def joint_train(
    ae: ParamSet,
    ev: ParamSet,
    states: np.ndarray,
    steps: int,
    ae_adam: Optional[AdamSettings] = None,
    ev_adam: Optional[AdamSettings] = None,
) -> list[tuple[float, float]]:
    """One autoencoder step then one evaluator step per iteration; returns the loss pairs."""
    ev_adam = ev_adam or evaluator.default_adam()
    losses = []
    for _ in range(steps):
        ae_loss = autoencoder.train_step(ae, states, ae_adam)
        fake, _ = autoencoder.reconstruct_batch(ae, states)
        ev_loss = evaluator.train_step(ev, states, fake, ev_adam)
        losses.append((ae_loss, ev_loss))
    return losses


def probe_mastery(
    states: np.ndarray,
    steps: int,
    rng: np.random.Generator,
    unseen_states: Optional[np.ndarray] = None,
    ae_adam: Optional[AdamSettings] = None,
    ev_adam: Optional[AdamSettings] = None,
    conv_filters=(8, 16),
    bottleneck: int = 64,
) -> MasteryProbe:
    states = np.asarray(states, dtype=np.float64)
    obs_shape = states.shape[1:]
    ae = autoencoder.build_autoencoder(obs_shape, rng, conv_filters=conv_filters, bottleneck=bottleneck)
    ev = evaluator.build_evaluator(obs_shape, rng, conv_filters=conv_filters)
    ev_adam = ev_adam or evaluator.default_adam()
    r0, a0, e0 = _medians(ae, ev, states)
    trace = []
    done = 0
    while done < steps:
        chunk = min(TRACE_EVERY, steps - done)
        joint_train(ae, ev, states, chunk, ae_adam, ev_adam)
        done += chunk
        trace.append((done, _medians(ae, ev, states)[1]))
    r1, a1, e1 = _medians(ae, ev, states)
    coupling = None
    if unseen_states is not None and len(unseen_states):
        coupling = coupling_correlation(ae, ev, np.concatenate([states, unseen_states], axis=0))
    probe = MasteryProbe(steps, r0, r1, a0, a1, e0, e1, coupling, trace)
    logger.info(
        "mastery probe: median r_int %.4g -> %.4g, median alpha %.3f -> %.3f (low %.3f), effective ratio %.4f",
        r0, r1, a0, a1, min((alpha for _, alpha in trace), default=a1), probe.effective_ratio,
    )
    return probe
