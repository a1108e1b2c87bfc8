"""
The AdaZero training loop.

Each update collects one rollout with frozen snapshots of the autoencoder
and the mastery evaluator, then trains the autoencoder on the visited
states, the evaluator on (state, reconstruction) pairs, and the policy with
PPO on the mixed reward. The three variants share every code path except
the forced mastery value.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from adazeroLab.exceptions import ContractViolation, TrainingHalted
from envs.density import VisitDensity
from envs.grids import make_env, shortest_path_length
from exploration import autoencoder, evaluator
from exploration.mixing import RunningMeanStd
from nncore.checkpoint import save_checkpoint
from nncore.optim import AdamSettings
from policy.networks import build_actor_critic
from policy.ppo import greedy_path, ppo_update
from policy.rollout import EpisodeTracker, collect_rollout

from .compare import entropy_intrinsic_alignment
from .plotting import save_reconstruction_pairs
from .runlog import CHECKPOINT_DIR, METRICS_FILE, RECONSTRUCTIONS_DIR, RunLog, RunWriter
from .serializers import RunConfig

logger = logging.getLogger(__name__)

# The greedy path may be this many steps longer than the BFS optimum.
PATH_SLACK = 2


def run_directory(config: RunConfig, seed: int, output_dir: Optional[Union[str, Path]] = None) -> Path:
    root = Path(output_dir) / config.run.name if output_dir else config.output_root()
    return root / f'seed_{seed}'


def _adam(config: RunConfig, lr: float, half_life: float = 0.0) -> AdamSettings:
    return AdamSettings(lr=lr, beta1=config.adam.beta1, beta2=config.adam.beta2, eps=config.adam.eps, half_life=half_life)


def _sample(rng: np.random.Generator, states: np.ndarray, size: int) -> np.ndarray:
    if len(states) <= size:
        return states
    return states[rng.choice(len(states), size=size, replace=False)]


def _mean_or_nan(values) -> float:
    return float(np.mean(values)) if len(values) else math.nan


def _save_checkpoints(directory: Path, policy, ae, ev) -> None:
    policy.save(directory)
    save_checkpoint(ae, directory / 'autoencoder.npz')
    save_checkpoint(ev, directory / 'evaluator.npz')


def train(
    config: RunConfig,
    seed: int,
    output_dir: Optional[Union[str, Path]] = None,
    overwrite: bool = False,
) -> RunLog:
    """Runs one seed of ``config`` to ``total_steps`` environment steps and returns its RunLog."""
    run_dir = run_directory(config, seed, output_dir)
    config_echo = config.to_dict()
    writer = RunWriter(run_dir, config_echo, overwrite=overwrite)
    config_hash = config.config_hash
    logger.info("run %s seed %d (%s) -> %s [config %s]", config.run.name, seed, config.run.variant, run_dir, config_hash[:12])

    init_seq, action_seq, ppo_seq, batch_seq = np.random.SeedSequence(seed).spawn(4)
    init_rng = np.random.default_rng(init_seq)
    action_rng = np.random.default_rng(action_seq)
    ppo_rng = np.random.default_rng(ppo_seq)
    batch_rng = np.random.default_rng(batch_seq)

    spec = config.env.build_spec()
    env = make_env(spec)
    env.reset(seed=seed)
    obs_shape = env.observation_shape

    ppo_cfg, ae_cfg, ev_cfg = config.ppo, config.autoencoder, config.evaluator
    policy = build_actor_critic(obs_shape, env.n_actions, init_rng, conv_filters=ppo_cfg.conv_filters, hidden=ppo_cfg.hidden)
    ae = autoencoder.build_autoencoder(obs_shape, init_rng, conv_filters=ae_cfg.conv_filters, bottleneck=ae_cfg.bottleneck)
    ev = evaluator.build_evaluator(obs_shape, init_rng, conv_filters=ev_cfg.conv_filters)
    ppo_adam, ae_adam, ev_adam = _adam(config, ppo_cfg.lr), _adam(config, ae_cfg.lr), _adam(config, ev_cfg.lr, ev_cfg.lr_half_life)

    density = VisitDensity.empty(*spec.shape)
    tracker = EpisodeTracker()
    normalizer = RunningMeanStd() if ae_cfg.normalize_intrinsic else None
    forced_alpha = config.run.forced_alpha
    total_steps = config.run.total_steps

    step, update = 0, 0
    last_states = None
    while step < total_steps:
        update += 1
        try:
            horizon = min(ppo_cfg.horizon, total_steps - step)
            batch = collect_rollout(
                policy, env, ae.snapshot(), ev.snapshot(), horizon, action_rng,
                gamma=ppo_cfg.gamma, lam=ppo_cfg.lam, forced_alpha=forced_alpha,
                density=density, normalizer=normalizer, tracker=tracker,
            )
            ae_losses = [
                autoencoder.train_step(ae, _sample(batch_rng, batch.next_obs, ae_cfg.batch_size), ae_adam)
                for _ in range(ae_cfg.updates_per_rollout)
            ]
            ev_losses = []
            for _ in range(ev_cfg.updates_per_rollout):
                real = _sample(batch_rng, batch.next_obs, ev_cfg.batch_size)
                fake, _ = autoencoder.reconstruct_batch(ae, real)
                ev_losses.append(evaluator.train_step(ev, real, fake, ev_adam))
            stats = ppo_update(
                policy, batch,
                clip_eps=ppo_cfg.clip_eps, epochs=ppo_cfg.epochs, minibatch=ppo_cfg.minibatch, adam=ppo_adam,
                value_coef=ppo_cfg.value_coef, entropy_coef=ppo_cfg.entropy_coef,
                max_grad_norm=ppo_cfg.max_grad_norm, rng=ppo_rng,
            )
        except (TrainingHalted, ContractViolation) as exc:
            diagnostic = dict(getattr(exc, 'diagnostic', {}))
            diagnostic.update(update=update, step=step, seed=seed, config_hash=config_hash,
                              config_echo=str(run_dir / 'config.json'))
            raise TrainingHalted(f"training stopped at update {update}: {exc}", diagnostic) from exc

        writer.append_rewards(step + 1, batch.rewards)
        step += len(batch)
        record = batch.entropy_record(step)
        success = tracker.success_rate()
        row = {
            'step': step,
            'update': update,
            'episode_return_ext': _mean_or_nan(tracker.returns[-100:]),
            'episodes': len(tracker.returns),
            'success_rate': math.nan if success is None else success,
            'mean_entropy': record.mean_policy_entropy,
            'mean_alpha': record.mean_alpha,
            'mean_r_int': record.mean_r_int,
            'mean_r_total': float(np.mean(batch.rewards.r_total)),
            'coverage': density.coverage(),
            'ae_loss': float(np.mean(ae_losses)),
            'ev_loss': float(np.mean(ev_losses)),
            'policy_loss': stats.policy_loss,
            'value_loss': stats.value_loss,
            'approx_kl': stats.approx_kl,
            'clip_fraction': stats.clip_fraction,
        }
        writer.append_metrics(row)
        logger.info(
            "update %d step %d: coverage %d, entropy %.4f, alpha %.4f, r_int %.5f, ae %.5f, ev %.5f, pi %.5f",
            update, step, row['coverage'], row['mean_entropy'], row['mean_alpha'], row['mean_r_int'],
            row['ae_loss'], row['ev_loss'], row['policy_loss'],
        )

        if update % config.run.density_every == 0:
            writer.snapshot_density(f'update_{update:05d}', density)
        if config.run.checkpoint_every and update % config.run.checkpoint_every == 0:
            _save_checkpoints(run_dir / CHECKPOINT_DIR / f'update_{update:05d}', policy, ae, ev)
        last_states = batch.next_obs

    _save_checkpoints(run_dir / CHECKPOINT_DIR / 'final', policy, ae, ev)
    if not tracker.returns:
        logger.warning("run %s seed %d finished no episode in %d steps", config.run.name, seed, step)

    summary = {
        'seed': seed,
        'variant': config.run.variant,
        'env': spec.name,
        'total_steps': step,
        'updates': update,
        'coverage': density.coverage(),
        'free_cells': spec.height * spec.width - len(spec.walls),
        'episodes': len(tracker.returns),
        'success_rate': tracker.success_rate(),
        'config_hash': config_hash,
    }
    if spec.goal is not None:
        path = greedy_path(policy, make_env(spec))
        optimal = shortest_path_length(spec)
        summary['greedy_path'] = {
            'cells': [list(cell) for cell in path.cells],
            'length': path.length,
            'reached_goal': path.reached_goal,
            'optimal_length': optimal,
            'near_optimal': bool(path.reached_goal and optimal is not None and path.length <= optimal + PATH_SLACK),
        }
    summary['entropy_intrinsic_alignment'] = entropy_intrinsic_alignment(
        pd.read_csv(run_dir / METRICS_FILE), config.run.alignment_window,
    )
    if ae_cfg.dump_pairs and last_states is not None:
        save_reconstruction_pairs(ae, last_states[:ae_cfg.dump_pairs], run_dir / RECONSTRUCTIONS_DIR)

    writer.finish(density, summary)
    logger.info("run %s seed %d done: coverage %d, success %s", config.run.name, seed, summary['coverage'], summary['success_rate'])
    return RunLog.load(run_dir)
