"""
Deterministic gridworlds: the 50x50 Dark Chamber and the 13x13 Four Rooms.

Cells are (row, col) with row 0 at the top. Observations are H×W×1 float
images with fixed gray levels per cell type (see ``LEVELS``).
"""

from __future__ import annotations

import enum
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from adazeroLab.exceptions import ContractViolation

logger = logging.getLogger(__name__)

Cell = tuple[int, int]

EMPTY, WALL, GOAL, AGENT = 0.0, 0.33, 0.66, 1.0
LEVELS = {'empty': EMPTY, 'wall': WALL, 'goal': GOAL, 'agent': AGENT}


class Action(enum.IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3

    @property
    def delta(self) -> Cell:
        return _DELTAS[self]


_DELTAS = {Action.UP: (-1, 0), Action.DOWN: (1, 0), Action.LEFT: (0, -1), Action.RIGHT: (0, 1)}


@dataclass(frozen=True)
class GridSpec:
    name: str
    height: int
    width: int
    start: Cell
    walls: frozenset[Cell] = frozenset()
    goal: Optional[Cell] = None
    goal_reward: float = 1.0
    max_episode_steps: int = 500

    def __post_init__(self) -> None:
        if self.height <= 0 or self.width <= 0:
            raise ContractViolation(f"grid must be non-empty, got {self.height}x{self.width}")
        object.__setattr__(self, 'walls', frozenset(tuple(cell) for cell in self.walls))
        object.__setattr__(self, 'start', tuple(self.start))
        if self.goal is not None:
            object.__setattr__(self, 'goal', tuple(self.goal))
        for label, cell in (('start', self.start), ('goal', self.goal)):
            if cell is None:
                continue
            if not self.in_bounds(cell):
                raise ContractViolation(f"{label} {cell} lies outside the {self.height}x{self.width} grid")
            if cell in self.walls:
                raise ContractViolation(f"{label} {cell} is a wall cell")
        if self.goal_reward < 0:
            raise ContractViolation("extrinsic rewards are non-negative")
        if self.max_episode_steps < 1:
            raise ContractViolation("max_episode_steps must be at least 1")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.walls

    def layout_lines(self) -> list[str]:
        rows = []
        for r in range(self.height):
            row = []
            for c in range(self.width):
                cell = (r, c)
                if cell in self.walls:
                    row.append('#')
                elif cell == self.start:
                    row.append('S')
                elif cell == self.goal:
                    row.append('G')
                else:
                    row.append('.')
            rows.append(''.join(row))
        return rows


def parse_layout(lines: list[str]) -> tuple[int, int, frozenset[Cell], Optional[Cell], Optional[Cell]]:
    """ASCII layout: '#' wall, 'S' start, 'G' goal, anything else empty."""
    lines = [line.rstrip('\n') for line in lines if line.strip()]
    if not lines:
        raise ContractViolation("layout is empty")
    width = max(len(line) for line in lines)
    walls, start, goal = set(), None, None
    for r, line in enumerate(lines):
        for c, char in enumerate(line.ljust(width)):
            if char == '#':
                walls.add((r, c))
            elif char == 'S':
                start = (r, c)
            elif char == 'G':
                goal = (r, c)
    return len(lines), width, frozenset(walls), start, goal


FOUR_ROOMS_LAYOUT = [
    '#############',
    '#     #    S#',
    '#     #     #',
    '#           #',
    '#     #     #',
    '#     #     #',
    '## ####     #',
    '#     ### ###',
    '#     #     #',
    '#     #     #',
    '#           #',
    '#G    #     #',
    '#############',
]


def dark_chamber(size: int = 50, max_episode_steps: int = 500) -> GridSpec:
    """Empty square room without any reward; the agent starts bottom-left."""
    return GridSpec(
        name='dark_chamber',
        height=size,
        width=size,
        start=(size - 1, 0),
        goal=None,
        goal_reward=0.0,
        max_episode_steps=max_episode_steps,
    )


def four_rooms(goal_reward: float = 1.0, max_episode_steps: int = 300) -> GridSpec:
    """Classic four-rooms grid: start top-right, goal bottom-left."""
    height, width, walls, start, goal = parse_layout(FOUR_ROOMS_LAYOUT)
    return GridSpec(
        name='four_rooms',
        height=height,
        width=width,
        start=start,
        walls=walls,
        goal=goal,
        goal_reward=goal_reward,
        max_episode_steps=max_episode_steps,
    )


BUILTIN_GRIDS = {
    'dark_chamber': dark_chamber,
    'four_rooms': four_rooms,
}


def shortest_path_length(spec: GridSpec, source: Optional[Cell] = None, target: Optional[Cell] = None) -> Optional[int]:
    """Breadth-first distance in moves between two free cells; None when unreachable."""
    source = spec.start if source is None else source
    target = spec.goal if target is None else target
    if target is None:
        raise ContractViolation(f"{spec.name} has no goal to route to")
    frontier = deque([(source, 0)])
    seen = {source}
    while frontier:
        cell, dist = frontier.popleft()
        if cell == target:
            return dist
        for action in Action:
            dr, dc = action.delta
            nxt = (cell[0] + dr, cell[1] + dc)
            if spec.is_free(nxt) and nxt not in seen:
                seen.add(nxt)
                frontier.append((nxt, dist + 1))
    return None


@dataclass
class StepResult:
    obs: np.ndarray
    r_ext: float
    done: bool
    info: dict[str, Any] = field(default_factory=dict)


class GridWorld:
    """
    A pure state machine over a GridSpec. Moves are deterministic; bumping
    into a wall or the boundary leaves the agent in place.
    """

    n_actions = len(Action)

    def __init__(self, spec: GridSpec) -> None:
        self.spec = spec
        self._background = self._render_background()
        self.position: Cell = spec.start
        self.steps = 0
        self.done = True
        self.seed: Optional[int] = None

    def __repr__(self) -> str:
        return f"GridWorld({self.spec.name}, {self.spec.height}x{self.spec.width}, at {self.position})"

    @property
    def observation_shape(self) -> tuple[int, int, int]:
        return (self.spec.height, self.spec.width, 1)

    def _render_background(self) -> np.ndarray:
        image = np.full(self.observation_shape, EMPTY)
        for r, c in self.spec.walls:
            image[r, c, 0] = WALL
        if self.spec.goal is not None:
            image[self.spec.goal[0], self.spec.goal[1], 0] = GOAL
        return image

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        # Dynamics are deterministic; the seed is recorded so runs can echo it.
        self.seed = seed
        self.position = self.spec.start
        self.steps = 0
        self.done = False
        return self.render_observation()

    def render_observation(self) -> np.ndarray:
        return self.observation_at(self.position)

    def observation_at(self, cell: Cell) -> np.ndarray:
        """The image the agent would see standing on ``cell``; does not move it."""
        if not self.spec.is_free(cell):
            raise ContractViolation(f"cell {cell} is a wall or outside the grid")
        image = self._background.copy()
        image[cell[0], cell[1], 0] = AGENT
        return image

    def step(self, action: int) -> StepResult:
        if self.done:
            raise ContractViolation("step called on a finished episode; call reset() first")
        try:
            move = Action(int(action))
        except ValueError as exc:
            raise ContractViolation(f"unknown action {action!r}") from exc
        dr, dc = move.delta
        target = (self.position[0] + dr, self.position[1] + dc)
        blocked = not self.spec.is_free(target)
        if not blocked:
            self.position = target
        self.steps += 1

        r_ext = 0.0
        reached_goal = self.spec.goal is not None and self.position == self.spec.goal
        if reached_goal:
            r_ext = float(self.spec.goal_reward)
        truncated = not reached_goal and self.steps >= self.spec.max_episode_steps
        self.done = reached_goal or truncated
        info = {
            'position': self.position,
            'blocked': blocked,
            'reached_goal': reached_goal,
            'truncated': truncated,
            'steps': self.steps,
        }
        return StepResult(obs=self.render_observation(), r_ext=r_ext, done=self.done, info=info)


def make_env(spec: GridSpec) -> GridWorld:
    logger.debug("building %s (%dx%d)", spec.name, spec.height, spec.width)
    return GridWorld(spec)
