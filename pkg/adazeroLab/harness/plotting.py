"""Visit-density heatmaps, greedy-path overlays and training curves."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from adazeroLab.exceptions import HarnessError  # noqa: E402
from envs.density import VisitDensity  # noqa: E402
from exploration import autoencoder  # noqa: E402
from nncore.network import ParamSet  # noqa: E402

logger = logging.getLogger(__name__)

CURVE_COLUMNS = (
    ('mean_entropy', 'policy entropy (nats)'),
    ('mean_r_int', 'intrinsic reward'),
    ('mean_alpha', 'mastery α'),
)


@dataclass(frozen=True)
class DensityPlot:
    raster: Path
    overlay: Optional[Path]
    coverage: int


def density_raster(density: VisitDensity) -> np.ndarray:
    """uint8 grayscale image, brightness ∝ log(1 + count), brightest cell = 255."""
    if density.counts.sum() == 0:
        raise HarnessError("visit density is empty; nothing to plot")
    scaled = np.log1p(density.counts.astype(np.float64))
    return np.rint(255.0 * scaled / scaled.max()).astype(np.uint8)


def plot_density(
    density: VisitDensity,
    path: Union[str, Path],
    path_cells: Optional[Sequence[Sequence[int]]] = None,
    title: Optional[str] = None,
) -> DensityPlot:
    """
    Writes the raster at ``path`` (one pixel per cell). With ``path_cells``
    a second figure ``<stem>_path.png`` draws the cell-to-cell moves as
    arrows over the heatmap.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raster = density_raster(density)
    plt.imsave(path, raster, cmap='gray', vmin=0, vmax=255)

    overlay = None
    if path_cells is not None and len(path_cells) > 1:
        overlay = path.with_name(f'{path.stem}_path.png')
        fig, ax = plt.subplots(figsize=(6, 6))
        ax.imshow(raster, cmap='gray', vmin=0, vmax=255, interpolation='nearest')
        cells = np.asarray(path_cells)
        for (r0, c0), (r1, c1) in zip(cells[:-1], cells[1:]):
            if (r0, c0) == (r1, c1):
                continue
            ax.annotate('', xy=(c1, r1), xytext=(c0, r0), arrowprops={'arrowstyle': '->', 'color': 'red', 'lw': 1.5})
        ax.plot(cells[0, 1], cells[0, 0], 'o', color='lime', label='start')
        ax.plot(cells[-1, 1], cells[-1, 0], 's', color='gold', label='end')
        ax.set_xticks([])
        ax.set_yticks([])
        ax.legend(loc='lower left', fontsize=8)
        ax.set_title(title or f'coverage {density.coverage()} cells, path length {len(cells) - 1}')
        plt.tight_layout()
        plt.savefig(overlay, dpi=150, bbox_inches='tight')
        plt.close()

    logger.info("density heatmap %s (coverage %d)", path, density.coverage())
    return DensityPlot(path, overlay, density.coverage())


def plot_curves(metrics: pd.DataFrame, path: Union[str, Path], window: int = 10) -> Path:
    """Entropy, intrinsic reward and mastery against environment steps, raw and rolling-mean."""
    missing = [column for column, _ in CURVE_COLUMNS if column not in metrics.columns]
    if missing or metrics.empty:
        raise HarnessError(f"metrics table cannot be plotted (missing {missing or 'rows'})")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    fig, axes = plt.subplots(1, len(CURVE_COLUMNS), figsize=(15, 4))
    for ax, (column, label) in zip(axes, CURVE_COLUMNS):
        ax.plot(metrics['step'], metrics[column], alpha=0.3, color='tab:blue')
        if len(metrics) >= window:
            smoothed = metrics[column].rolling(window).mean()
            ax.plot(metrics['step'], smoothed, color='tab:blue', linewidth=2)
        ax.set_xlabel('step')
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    plt.tight_layout()
    plt.savefig(path, dpi=150, bbox_inches='tight')
    plt.close()
    return path


def save_reconstruction_pairs(ae: ParamSet, states: np.ndarray, directory: Union[str, Path]) -> list[Path]:
    """One PNG per state: the state on the left, its reconstruction on the right."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    states = np.asarray(states, dtype=np.float64)
    obs_hat, r_int = autoencoder.reconstruct_batch(ae, states)
    paths = []
    for index, (state, recon) in enumerate(zip(states, obs_hat)):
        pair = np.concatenate([state[..., 0], recon[..., 0]], axis=1)
        target = directory / f'pair_{index:03d}.png'
        plt.imsave(target, pair, cmap='gray', vmin=0.0, vmax=1.0)
        paths.append(target)
    logger.debug("wrote %d reconstruction pairs, median r_int %.5f", len(paths), float(np.median(r_int)))
    return paths
