"""Kuhn poker: 3 cards, two actions, one betting round.

Both players ante 1 and receive one card from {0, 1, 2}.  Player 0 acts
first, choosing PASS or BET (1 chip).  A bet may be called (showdown for
the larger pot) or passed away (bettor wins the antes).  Returns are the
chips won/lost by each player, always summing to zero.
"""

from __future__ import annotations

import numpy as np

from .base import GameSpec, PASS

_LETTERS = ("p", "b")
# Non-terminal betting histories and who acts there.
_TO_MOVE = {"": 0, "p": 1, "b": 1, "pb": 0}
# Feature slot for each non-terminal history.
_HIST_SLOT = {"": 3, "p": 4, "b": 5, "pb": 6}


class KuhnState:
    __slots__ = ("spec", "cards", "hist", "player", "terminal", "returns")

    def __init__(self, spec, cards, hist, player, terminal, returns):
        self.spec = spec
        self.cards = cards
        self.hist = hist
        self.player = player
        self.terminal = terminal
        self.returns = returns

    def __repr__(self):
        return f"KuhnState(cards={self.cards}, hist={self.hist!r}, terminal={self.terminal})"


def new_episode(spec: GameSpec, rng: np.random.Generator) -> KuhnState:
    """Deal two distinct cards from {0,1,2}; player 0 to move."""
    deal = rng.permutation(3)
    return KuhnState(spec, (int(deal[0]), int(deal[1])), "", 0, False, None)


def legal_actions(state: KuhnState) -> tuple[int, ...]:
    if state.terminal:
        raise ValueError("legal_actions on terminal state")
    return (0, 1)


def step(state: KuhnState, action: int) -> KuhnState:
    if state.terminal:
        raise ValueError("step on terminal state")
    if action not in (0, 1):
        raise ValueError(f"illegal action {action}")
    hist = state.hist + _LETTERS[action]
    c0, c1 = state.cards
    if hist == "pp":
        amount = 1.0
    elif hist == "bb" or hist == "pbb":
        amount = 2.0
    elif hist == "bp":
        return KuhnState(state.spec, state.cards, hist, -1, True, (1.0, -1.0))
    elif hist == "pbp":
        return KuhnState(state.spec, state.cards, hist, -1, True, (-1.0, 1.0))
    else:
        return KuhnState(state.spec, state.cards, hist, _TO_MOVE[hist], False, None)
    r0 = amount if c0 > c1 else -amount
    return KuhnState(state.spec, state.cards, hist, -1, True, (r0, -r0))


def info_state_key(state: KuhnState, player: int) -> str:
    return f"{state.cards[player]}{state.hist}"


def featurize(state: KuhnState, player: int) -> np.ndarray:
    x = np.zeros(7)
    x[state.cards[player]] = 1.0
    x[_HIST_SLOT[state.hist]] = 1.0
    return x


def enumerate_info_states(spec: GameSpec) -> list[str]:
    """All player-0 information states, sorted."""
    return sorted(f"{rank}{hist}" for rank in range(3) for hist in ("", "pb"))


def legal_for_key(spec: GameSpec, key: str) -> tuple[int, ...]:
    return (0, 1)
