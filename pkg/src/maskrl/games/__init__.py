"""Two-player zero-sum environments behind one engine interface.

Each engine exposes the same operations: ``new_episode`` (chance resolved
from the supplied generator, a constant number of draws per episode so
deals never depend on play), ``legal_actions``, ``step``,
``info_state_key``, ``featurize`` and, for poker, ``enumerate_info_states``.
"""

from __future__ import annotations

from types import SimpleNamespace

import numpy as np

from . import grid, kuhn, leduc
from .base import (ACTION_NAMES, ALL_GAMES, BET, CALL, FOLD, GRIDWORLD, KUHN,
                   LEDUC, LEDUC_SCHEDULES, PASS, POKER_GAMES, RAISE, RESOURCE,
                   DOWN, LEFT, RIGHT, STAY, UP, GameSpec)

__all__ = [
    "GameSpec", "engine_for", "new_episode", "legal_actions", "step",
    "info_state_key", "featurize", "enumerate_info_states", "legal_for_key",
    "KUHN", "LEDUC", "GRIDWORLD", "RESOURCE", "POKER_GAMES", "ALL_GAMES",
    "PASS", "BET", "FOLD", "CALL", "RAISE", "UP", "DOWN", "LEFT", "RIGHT",
    "STAY", "ACTION_NAMES", "LEDUC_SCHEDULES",
]


def _poker_engine(module):
    return SimpleNamespace(
        new_episode=module.new_episode,
        legal_actions=module.legal_actions,
        step=module.step,
        info_state_key=module.info_state_key,
        featurize=module.featurize,
        enumerate_info_states=module.enumerate_info_states,
        legal_for_key=module.legal_for_key,
    )


_ENGINES = {
    KUHN: _poker_engine(kuhn),
    LEDUC: _poker_engine(leduc),
    GRIDWORLD: SimpleNamespace(
        new_episode=grid.chase_new_episode,
        legal_actions=grid.chase_legal_actions,
        step=grid.chase_step,
        info_state_key=grid.chase_info_state_key,
        featurize=grid.chase_featurize,
        enumerate_info_states=None,
        legal_for_key=lambda spec, key: (0, 1, 2, 3, 4),
    ),
    RESOURCE: SimpleNamespace(
        new_episode=grid.harvest_new_episode,
        legal_actions=grid.harvest_legal_actions,
        step=grid.harvest_step,
        info_state_key=grid.harvest_info_state_key,
        featurize=grid.harvest_featurize,
        enumerate_info_states=None,
        legal_for_key=lambda spec, key: (0, 1, 2, 3),
    ),
}


def engine_for(spec: GameSpec):
    """The per-game operation bundle (fast path for hot loops)."""
    return _ENGINES[spec.game]


def new_episode(spec: GameSpec, rng: np.random.Generator):
    return _ENGINES[spec.game].new_episode(spec, rng)


def legal_actions(state) -> tuple[int, ...]:
    return _ENGINES[state.spec.game].legal_actions(state)


def step(state, action: int):
    return _ENGINES[state.spec.game].step(state, action)


def info_state_key(state, player: int) -> str:
    return _ENGINES[state.spec.game].info_state_key(state, player)


def featurize(state, player: int) -> np.ndarray:
    return _ENGINES[state.spec.game].featurize(state, player)


def legal_for_key(spec: GameSpec, key: str) -> tuple[int, ...]:
    return _ENGINES[spec.game].legal_for_key(spec, key)


def enumerate_info_states(spec: GameSpec) -> list[str]:
    """Exhaustive player-0 information-set keys; poker games only."""
    fn = _ENGINES[spec.game].enumerate_info_states
    if fn is None:
        raise ValueError(
            f"{spec.game} states are observation-based and cannot be enumerated a priori")
    return fn(spec)
