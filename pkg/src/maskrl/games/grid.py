"""Turn-based grid games: goal chase and resource collection.

Gridworld: player 0 (prey) tries to reach either fixed bottom-corner goal
while player 1 (predator) tries to co-locate with it.  Two goal corners
keep the race winnable: a single pursuer cannot guard both, and reaching
either never requires moving up.  Moves off the grid clamp in place.
Prey moves first; the goal is checked right after a prey move, capture
right after a predator move.  Rewards are +1 (goal), -1 (caught), 0 at
the step limit.

Resource collection: both players race to pick up resources scattered on
the grid (entering a resource cell collects it).  The episode ends when
everything is collected or the step limit runs out; player 0's return is
the difference in collected counts.
"""

from __future__ import annotations

import numpy as np

from .base import GameSpec

# UP, DOWN, LEFT, RIGHT, STAY as (row, col) deltas.
_DELTAS = ((-1, 0), (1, 0), (0, -1), (0, 1), (0, 0))


def _move(idx: int, action: int, size: int) -> int:
    dr, dc = _DELTAS[action]
    r = min(max(idx // size + dr, 0), size - 1)
    c = min(max(idx % size + dc, 0), size - 1)
    return r * size + c


class ChaseState:
    __slots__ = ("spec", "prey", "pred", "player", "steps", "terminal", "returns")

    def __init__(self, spec, prey, pred, player, steps, terminal, returns):
        self.spec = spec
        self.prey = prey
        self.pred = pred
        self.player = player
        self.steps = steps
        self.terminal = terminal
        self.returns = returns

    def __repr__(self):
        return f"ChaseState(prey={self.prey}, pred={self.pred}, steps={self.steps})"


class HarvestState:
    __slots__ = ("spec", "pos", "res", "col", "player", "steps", "terminal", "returns")

    def __init__(self, spec, pos, res, col, player, steps, terminal, returns):
        self.spec = spec
        self.pos = pos      # (player0 cell, player1 cell)
        self.res = res      # bitmask of remaining resource cells
        self.col = col      # collected counts per player
        self.player = player
        self.steps = steps
        self.terminal = terminal
        self.returns = returns

    def __repr__(self):
        return f"HarvestState(pos={self.pos}, res={self.res:#x}, col={self.col})"


# -- gridworld (chase) -----------------------------------------------------

def goal_cells(spec: GameSpec) -> tuple[int, int]:
    """The two prey goals: bottom-left and bottom-right corners."""
    n = spec.grid_size
    return (n * (n - 1), n * n - 1)


def chase_new_episode(spec: GameSpec, rng: np.random.Generator) -> ChaseState:
    """Prey and predator spawn on distinct non-goal cells; prey to move."""
    size = spec.grid_size
    goals = goal_cells(spec)
    cells = [c for c in range(size * size) if c not in goals]
    picks = rng.choice(len(cells), size=2, replace=False)
    return ChaseState(spec, cells[int(picks[0])], cells[int(picks[1])], 0, 0, False, None)


def chase_legal_actions(state: ChaseState) -> tuple[int, ...]:
    if state.terminal:
        raise ValueError("legal_actions on terminal state")
    return (0, 1, 2, 3, 4)


def chase_step(state: ChaseState, action: int) -> ChaseState:
    if state.terminal:
        raise ValueError("step on terminal state")
    if not 0 <= action <= 4:
        raise ValueError(f"illegal action {action}")
    spec = state.spec
    size = spec.grid_size
    steps = state.steps + 1
    if state.player == 0:
        prey = _move(state.prey, action, size)
        if prey in goal_cells(spec):
            return ChaseState(spec, prey, state.pred, -1, steps, True, (1.0, -1.0))
        if steps >= spec.max_steps:
            return ChaseState(spec, prey, state.pred, -1, steps, True, (0.0, 0.0))
        return ChaseState(spec, prey, state.pred, 1, steps, False, None)
    pred = _move(state.pred, action, size)
    if pred == state.prey:
        return ChaseState(spec, state.prey, pred, -1, steps, True, (-1.0, 1.0))
    if steps >= spec.max_steps:
        return ChaseState(spec, state.prey, pred, -1, steps, True, (0.0, 0.0))
    return ChaseState(spec, state.prey, pred, 0, steps, False, None)


def chase_info_state_key(state: ChaseState, player: int) -> str:
    return f"{state.prey}.{state.pred}.{state.player}"


def chase_featurize(state: ChaseState, player: int) -> np.ndarray:
    size = state.spec.grid_size
    cells = size * size
    x = np.zeros(2 * cells + 1)
    x[state.prey] = 1.0
    x[cells + state.pred] = 1.0
    x[2 * cells] = state.steps / state.spec.max_steps
    return x


# -- resource collection (harvest) ------------------------------------------

def harvest_new_episode(spec: GameSpec, rng: np.random.Generator) -> HarvestState:
    """Agents on distinct cells, resources on distinct free cells; P0 moves first."""
    cells = spec.grid_size * spec.grid_size
    picks = rng.choice(cells, size=2 + spec.n_resources, replace=False)
    pos = (int(picks[0]), int(picks[1]))
    res = 0
    for c in picks[2:]:
        res |= 1 << int(c)
    return HarvestState(spec, pos, res, (0, 0), 0, 0, False, None)


def harvest_legal_actions(state: HarvestState) -> tuple[int, ...]:
    if state.terminal:
        raise ValueError("legal_actions on terminal state")
    return (0, 1, 2, 3)


def harvest_step(state: HarvestState, action: int) -> HarvestState:
    if state.terminal:
        raise ValueError("step on terminal state")
    if not 0 <= action <= 3:
        raise ValueError(f"illegal action {action}")
    spec = state.spec
    p = state.player
    cell = _move(state.pos[p], action, spec.grid_size)
    pos = (cell, state.pos[1]) if p == 0 else (state.pos[0], cell)
    res, col = state.res, list(state.col)
    if res & (1 << cell):
        res &= ~(1 << cell)
        col[p] += 1
    steps = state.steps + 1
    if res == 0 or steps >= spec.max_steps:
        diff = float(col[0] - col[1])
        return HarvestState(spec, pos, res, tuple(col), -1, steps, True, (diff, -diff))
    return HarvestState(spec, pos, res, tuple(col), 1 - p, steps, False, None)


def harvest_info_state_key(state: HarvestState, player: int) -> str:
    return f"{state.pos[0]}.{state.pos[1]}.{state.res:x}.{state.col[0]}.{state.player}"


def harvest_featurize(state: HarvestState, player: int) -> np.ndarray:
    spec = state.spec
    cells = spec.grid_size * spec.grid_size
    x = np.zeros(3 * cells + 3)
    x[state.pos[0]] = 1.0
    x[cells + state.pos[1]] = 1.0
    for c in range(cells):
        if state.res & (1 << c):
            x[2 * cells + c] = 1.0
    x[3 * cells] = state.col[0] / spec.n_resources
    x[3 * cells + 1] = state.col[1] / spec.n_resources
    x[3 * cells + 2] = state.steps / spec.max_steps
    return x
