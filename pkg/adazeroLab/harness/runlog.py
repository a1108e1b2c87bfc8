"""
On-disk layout of one training run:

    config.json      config echo (re-validated by ``load_run_config``)
    metrics.csv      one row per policy update, strictly increasing ``step``
    rewards.csv      per-step reward breakdown stream
    density.npz      visit-count snapshots keyed ``update_<k>`` plus ``final``
    density.csv      final visit counts
    summary.json     end-of-run statistics
    checkpoints/     ``update_<k>/`` network checkpoints
"""

from __future__ import annotations

import hashlib
import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from adazeroLab.exceptions import HarnessError
from envs.density import VisitDensity

CONFIG_FILE = 'config.json'
METRICS_FILE = 'metrics.csv'
REWARDS_FILE = 'rewards.csv'
DENSITY_SNAPSHOTS_FILE = 'density.npz'
DENSITY_FILE = 'density.csv'
SUMMARY_FILE = 'summary.json'
CHECKPOINT_DIR = 'checkpoints'
RECONSTRUCTIONS_DIR = 'reconstructions'

RUN_FILES = (CONFIG_FILE, METRICS_FILE, REWARDS_FILE, DENSITY_SNAPSHOTS_FILE, DENSITY_FILE, SUMMARY_FILE)
RUN_DIRS = (CHECKPOINT_DIR, RECONSTRUCTIONS_DIR)

METRIC_COLUMNS = [
    'step',
    'update',
    'episode_return_ext',
    'episodes',
    'success_rate',
    'mean_entropy',
    'mean_alpha',
    'mean_r_int',
    'mean_r_total',
    'coverage',
    'ae_loss',
    'ev_loss',
    'policy_loss',
    'value_loss',
    'approx_kl',
    'clip_fraction',
]

REWARD_COLUMNS = ['step', 'r_ext', 'r_int_raw', 'r_int_norm', 'alpha', 'r_total']


def run_hash(run_dir: Union[str, Path]) -> str:
    """sha256 over the metrics and reward streams; equal hashes mean equal runs."""
    run_dir = Path(run_dir)
    digest = hashlib.sha256()
    for name in (METRICS_FILE, REWARDS_FILE):
        path = run_dir / name
        if not path.exists():
            raise HarnessError(f"{path} is missing; cannot hash the run")
        digest.update(path.read_bytes())
    return digest.hexdigest()


class RunWriter:
    """Append-only writer for one run directory."""

    def __init__(self, run_dir: Union[str, Path], config: dict, overwrite: bool = False) -> None:
        self.run_dir = Path(run_dir)
        existing = [name for name in RUN_FILES + RUN_DIRS if (self.run_dir / name).exists()]
        if existing and not overwrite:
            raise HarnessError(f"{self.run_dir} already holds a run ({', '.join(existing)}); pass overwrite to replace it")
        self.run_dir.mkdir(parents=True, exist_ok=True)
        for name in existing:
            path = self.run_dir / name
            if path.is_dir():
                shutil.rmtree(path)
            else:
                path.unlink()
        (self.run_dir / CONFIG_FILE).write_text(json.dumps(config, indent=2, sort_keys=True))
        self._last_step = 0
        self._rows_written = 0
        self.snapshots: dict[str, np.ndarray] = {}

    def append_metrics(self, row: dict) -> None:
        if row['step'] <= self._last_step:
            raise HarnessError(f"metrics step {row['step']} does not increase past {self._last_step}")
        frame = pd.DataFrame([row], columns=METRIC_COLUMNS)
        frame.to_csv(self.run_dir / METRICS_FILE, mode='a', header=self._rows_written == 0, index=False)
        self._last_step = row['step']
        self._rows_written += 1

    def append_rewards(self, first_step: int, rewards) -> None:
        frame = pd.DataFrame({
            'step': np.arange(first_step, first_step + len(rewards)),
            **{column: getattr(rewards, column) for column in REWARD_COLUMNS[1:]},
        }, columns=REWARD_COLUMNS)
        path = self.run_dir / REWARDS_FILE
        frame.to_csv(path, mode='a', header=not path.exists(), index=False)

    def snapshot_density(self, key: str, density: VisitDensity) -> None:
        self.snapshots[key] = density.counts.copy()

    def finish(self, density: VisitDensity, summary: dict) -> None:
        self.snapshot_density('final', density)
        with (self.run_dir / DENSITY_SNAPSHOTS_FILE).open('wb') as handle:
            np.savez(handle, **self.snapshots)
        density.to_csv(self.run_dir / DENSITY_FILE)
        summary = dict(summary, run_hash=run_hash(self.run_dir))
        (self.run_dir / SUMMARY_FILE).write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default))


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (tuple, set, frozenset)):
        return list(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


@dataclass
class RunLog:
    run_dir: Path
    config: dict
    metrics: pd.DataFrame
    summary: dict = field(default_factory=dict)

    @property
    def variant(self) -> str:
        return self.config['run']['variant']

    @property
    def seed(self) -> Optional[int]:
        return self.summary.get('seed')

    @property
    def hash(self) -> str:
        return run_hash(self.run_dir)

    @classmethod
    def load(cls, run_dir: Union[str, Path]) -> 'RunLog':
        run_dir = Path(run_dir)
        for name in (CONFIG_FILE, METRICS_FILE):
            if not (run_dir / name).exists():
                raise HarnessError(f"{run_dir} is not a run directory: {name} is missing")
        config = json.loads((run_dir / CONFIG_FILE).read_text())
        try:
            metrics = pd.read_csv(run_dir / METRICS_FILE)
        except pd.errors.EmptyDataError:
            metrics = pd.DataFrame(columns=METRIC_COLUMNS)
        summary_path = run_dir / SUMMARY_FILE
        summary = json.loads(summary_path.read_text()) if summary_path.exists() else {}
        return cls(run_dir, config, metrics, summary)

    def rewards(self) -> pd.DataFrame:
        path = self.run_dir / REWARDS_FILE
        if not path.exists():
            raise HarnessError(f"{path} is missing")
        return pd.read_csv(path)

    def density(self, key: str = 'final') -> VisitDensity:
        """A density snapshot: ``final`` or ``update_<k>``."""
        path = self.run_dir / DENSITY_SNAPSHOTS_FILE
        if path.exists():
            with np.load(path) as archive:
                if key not in archive.files:
                    raise HarnessError(f"no density snapshot {key!r} in {path}; have {sorted(archive.files)}")
                counts = archive[key]
            return VisitDensity(counts, int(counts.sum()))
        if key != 'final':
            raise HarnessError(f"{path} is missing")
        return VisitDensity.from_csv(self.run_dir / DENSITY_FILE)

    def density_keys(self) -> list[str]:
        path = self.run_dir / DENSITY_SNAPSHOTS_FILE
        if not path.exists():
            return []
        with np.load(path) as archive:
            return list(archive.files)
