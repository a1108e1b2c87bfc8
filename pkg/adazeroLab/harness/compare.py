"""
Cross-run tables: per-step medians across seeds for each variant, their
differences from a baseline variant, and end-of-run summaries.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from adazeroLab.exceptions import HarnessError

from .runlog import RunLog

logger = logging.getLogger(__name__)

INDEX_COLUMNS = ('step', 'update')
COVERAGE_ORDER = ('adazero', 'no_adaptive', 'no_intrinsic')


def _metric_columns(runlogs: Sequence[RunLog]) -> list[str]:
    if len(runlogs) < 2:
        raise HarnessError(f"compare needs at least two run logs, got {len(runlogs)}")
    reference = list(runlogs[0].metrics.columns)
    for log in runlogs:
        if log.metrics.empty:
            raise HarnessError(f"run log {log.run_dir} has no metric rows")
        if list(log.metrics.columns) != reference:
            raise HarnessError(
                f"run log {log.run_dir} has columns {list(log.metrics.columns)}, expected {reference}"
            )
    if 'step' not in reference:
        raise HarnessError("metric tables have no step column")
    return [column for column in reference if column not in INDEX_COLUMNS]


def compare_runs(runlogs: Sequence[RunLog], baseline: Optional[str] = None) -> pd.DataFrame:
    """
    One row per (variant, step) holding the median of every metric across
    that variant's runs, plus ``<metric>_diff`` columns against the
    ``baseline`` variant's medians at the same step (default: the variant
    of the first log). Steps the baseline never logged get NaN differences.
    """
    metric_columns = _metric_columns(runlogs)
    baseline = runlogs[0].variant if baseline is None else baseline
    variants = {log.variant for log in runlogs}
    if baseline not in variants:
        raise HarnessError(f"baseline variant {baseline!r} not among {sorted(variants)}")

    frames = []
    for log in runlogs:
        frame = log.metrics.copy()
        frame.insert(0, 'variant', log.variant)
        frames.append(frame)
    table = pd.concat(frames, ignore_index=True)
    medians = table.groupby(['variant', 'step'], sort=True)[metric_columns].median().reset_index()

    base = medians[medians['variant'] == baseline].set_index('step')[metric_columns]
    aligned = base.reindex(medians['step']).to_numpy()
    diffs = pd.DataFrame(
        medians[metric_columns].to_numpy() - aligned,
        columns=[f'{column}_diff' for column in metric_columns],
        index=medians.index,
    )
    logger.info("compared %d runs over %d variants against %s", len(runlogs), len(variants), baseline)
    return pd.concat([medians, diffs], axis=1)


def summarize_runs(runlogs: Sequence[RunLog]) -> pd.DataFrame:
    """Median end-of-run statistics per variant, taken from each run's summary."""
    rows = []
    for log in runlogs:
        if not log.summary:
            raise HarnessError(f"run log {log.run_dir} has no summary; did the run finish?")
        rows.append({
            'variant': log.variant,
            'seed': log.summary.get('seed'),
            'coverage': log.summary.get('coverage'),
            'success_rate': log.summary.get('success_rate'),
            'final_entropy': float(log.metrics['mean_entropy'].iloc[-1]) if not log.metrics.empty else np.nan,
            'alignment': log.summary.get('entropy_intrinsic_alignment'),
        })
    frame = pd.DataFrame(rows)
    numeric = ['coverage', 'success_rate', 'final_entropy', 'alignment']
    frame[numeric] = frame[numeric].apply(pd.to_numeric, errors='coerce')
    summary = frame.groupby('variant')[numeric].median()
    summary.insert(0, 'runs', frame.groupby('variant').size())
    return summary.reset_index()


def coverage_ordering(summary: pd.DataFrame, order: Sequence[str] = COVERAGE_ORDER) -> Optional[bool]:
    """Whether median coverage strictly decreases along ``order``; None if a variant is missing."""
    coverage = summary.set_index('variant')['coverage']
    if any(variant not in coverage.index for variant in order):
        return None
    values = [coverage[variant] for variant in order]
    return all(a > b for a, b in zip(values, values[1:]))


def entropy_intrinsic_alignment(metrics: pd.DataFrame, window: int) -> Optional[float]:
    """
    Spearman correlation between mean policy entropy and mean intrinsic
    reward over consecutive non-overlapping windows of ``window`` updates.
    Trailing partial windows are dropped; fewer than three windows gives None.
    """
    if window < 1:
        raise HarnessError(f"alignment window must be >= 1, got {window}")
    n_windows = len(metrics) // window
    if n_windows < 3:
        return None
    trimmed = metrics.iloc[:n_windows * window]
    groups = np.arange(len(trimmed)) // window
    means = trimmed.groupby(groups)[['mean_entropy', 'mean_r_int']].mean()
    rho = spearmanr(means['mean_entropy'], means['mean_r_int']).statistic
    if not np.isfinite(rho):
        logger.warning("entropy/intrinsic alignment undefined: a windowed series is constant")
        return None
    return float(rho)
