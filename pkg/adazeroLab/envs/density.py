from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from adazeroLab.exceptions import ContractViolation, HarnessError

from .grids import Cell


@dataclass
class VisitDensity:
    """Per-cell visit counts; ``counts.sum() == total_steps`` always."""

    counts: np.ndarray
    total_steps: int = 0

    @classmethod
    def empty(cls, height: int, width: int) -> 'VisitDensity':
        return cls(np.zeros((height, width), dtype=np.int64), 0)

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    def coverage(self) -> int:
        """Number of distinct cells visited at least once."""
        return int(np.count_nonzero(self.counts))

    def copy(self) -> 'VisitDensity':
        return VisitDensity(self.counts.copy(), self.total_steps)

    def merge(self, other: 'VisitDensity') -> 'VisitDensity':
        if other.shape != self.shape:
            raise ContractViolation(f"cannot merge densities of shape {self.shape} and {other.shape}")
        return VisitDensity(self.counts + other.counts, self.total_steps + other.total_steps)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        np.savetxt(path, self.counts, fmt='%d', delimiter=',')
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> 'VisitDensity':
        path = Path(path)
        if not path.exists():
            raise HarnessError(f"density file {path} does not exist")
        counts = np.loadtxt(path, dtype=np.int64, delimiter=',', ndmin=2)
        return cls(counts, int(counts.sum()))


def accumulate_density(density: VisitDensity, cell: Cell) -> VisitDensity:
    row, col = int(cell[0]), int(cell[1])
    height, width = density.shape
    if not (0 <= row < height and 0 <= col < width):
        raise ContractViolation(f"cell {cell} outside the {height}x{width} density grid")
    density.counts[row, col] += 1
    density.total_steps += 1
    return density
