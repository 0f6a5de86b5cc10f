"""Leduc-style hold'em parameterised by rank count.

Deck is two suits of N ranks (2N cards).  Both players ante 1 and get one
private card.  Two betting rounds with fixed bet sizes and a per-round
raise cap; a public card is revealed between rounds.  At showdown a pair
with the public card wins, otherwise the higher private rank; equal ranks
split.  FOLD is legal only when facing an outstanding raise; CALL checks
when there is nothing to call.

The default schedule for N=3 is bets (4, 8) with one raise per round,
giving a worst-case loss of 13 chips and 60 exhaustively enumerable
player-0 information states.  Larger decks default to bets (2, x) with
two raises per round (see ``base.LEDUC_SCHEDULES``).
"""

from __future__ import annotations

import numpy as np

from .base import CALL, FOLD, RAISE, GameSpec

_LETTER = ("f", "c", "r")


class LeducState:
    __slots__ = (
        "spec", "priv", "pub", "rnd", "pub_seen", "h0", "h1",
        "pending", "raises", "contrib", "player", "terminal", "returns",
    )

    def __init__(self, spec, priv, pub, rnd, pub_seen, h0, h1,
                 pending, raises, contrib, player, terminal, returns):
        self.spec = spec
        self.priv = priv          # private ranks per player
        self.pub = pub            # public rank, dealt up-front, hidden in round 1
        self.rnd = rnd            # betting round, 0 or 1
        self.pub_seen = pub_seen
        self.h0 = h0              # round-1 action letters
        self.h1 = h1              # round-2 action letters
        self.pending = pending    # amount the player to move must call
        self.raises = raises      # raises so far this round
        self.contrib = contrib    # chips contributed per player (includes ante)
        self.player = player
        self.terminal = terminal
        self.returns = returns

    def __repr__(self):
        return (f"LeducState(priv={self.priv}, pub={self.pub if self.pub_seen else '?'}, "
                f"h0={self.h0!r}, h1={self.h1!r}, terminal={self.terminal})")


def new_episode(spec: GameSpec, rng: np.random.Generator) -> LeducState:
    """Deal both private cards and the public card from a 2N-card deck."""
    n = spec.rank_count
    cards = rng.choice(2 * n, size=3, replace=False)
    priv = (int(cards[0]) // 2, int(cards[1]) // 2)
    pub = int(cards[2]) // 2
    return LeducState(spec, priv, pub, 0, False, "", "", 0, 0, (1, 1), 0, False, None)


def legal_actions(state: LeducState) -> tuple[int, ...]:
    if state.terminal:
        raise ValueError("legal_actions on terminal state")
    cap = state.spec.raise_caps[state.rnd]
    if state.pending > 0:
        return (FOLD, CALL, RAISE) if state.raises < cap else (FOLD, CALL)
    return (CALL, RAISE) if state.raises < cap else (CALL,)


def step(state: LeducState, action: int) -> LeducState:
    if state.terminal:
        raise ValueError("step on terminal state")
    if action not in legal_actions(state):
        raise ValueError(f"illegal action {action}")
    spec = state.spec
    p = state.player
    contrib = list(state.contrib)
    hist = (state.h0 if state.rnd == 0 else state.h1) + _LETTER[action]

    if action == FOLD:
        lost = float(contrib[p])
        returns = (-lost, lost) if p == 0 else (lost, -lost)
        return _advance(state, hist, contrib, 0, state.raises, -1, True, returns)

    if action == RAISE:
        bet = spec.bet_sizes[state.rnd]
        contrib[p] += state.pending + bet
        return _advance(state, hist, contrib, bet, state.raises + 1, 1 - p, False, None)

    # CALL: match any outstanding raise; closes the round unless it is the
    # opening check.
    contrib[p] += state.pending
    round_over = len(hist) > 1
    if not round_over:
        return _advance(state, hist, contrib, 0, state.raises, 1 - p, False, None)
    if state.rnd == 0:
        nxt = _advance(state, hist, contrib, 0, 0, 0, False, None)
        nxt.rnd = 1
        nxt.pub_seen = True
        return nxt
    return _showdown(state, hist, contrib)


def _advance(state, hist, contrib, pending, raises, player, terminal, returns):
    h0, h1 = (hist, state.h1) if state.rnd == 0 else (state.h0, hist)
    return LeducState(state.spec, state.priv, state.pub, state.rnd, state.pub_seen,
                      h0, h1, pending, raises, tuple(contrib), player, terminal, returns)


def _showdown(state, hist, contrib):
    p0, p1 = state.priv
    if p0 == state.pub:
        winner = 0
    elif p1 == state.pub:
        winner = 1
    elif p0 != p1:
        winner = 0 if p0 > p1 else 1
    else:
        nxt = _advance(state, hist, contrib, 0, state.raises, -1, True, (0.0, 0.0))
        return nxt
    won = float(contrib[1 - winner])
    returns = (won, -won) if winner == 0 else (-won, won)
    return _advance(state, hist, contrib, 0, state.raises, -1, True, returns)


def info_state_key(state: LeducState, player: int) -> str:
    priv = state.priv[player]
    if not state.pub_seen:
        return f"{priv}:{state.h0}"
    return f"{priv}:{state.h0}/{state.pub}:{state.h1}"


def featurize(state: LeducState, player: int) -> np.ndarray:
    """Fixed-length encoding: private/public rank one-hots plus 31 betting slots."""
    spec = state.spec
    n = spec.rank_count
    x = np.zeros(2 * n + 31)
    x[state.priv[player]] = 1.0
    if state.pub_seen:
        x[n + state.pub] = 1.0
    base = 2 * n
    rmax = spec.reward_bounds[1]
    x[base] = float(state.rnd)
    x[base + 1] = state.contrib[player] / rmax
    x[base + 2] = state.contrib[1 - player] / rmax
    if state.player == player and state.pending > 0:
        x[base + 3] = 1.0
    x[base + 4 + min(state.raises, 2)] = 1.0
    for offset, hist in ((base + 7, state.h0), (base + 19, state.h1)):
        for i, ch in enumerate(hist[:4]):
            x[offset + 3 * i + _LETTER.index(ch)] = 1.0
    return x


def _round_grammar(cap: int) -> tuple[list[str], list[str]]:
    """Betting sequences of one round: (histories with P0 to act, closed rounds)."""
    p0_turns, closed = [], []

    def walk(hist, pending, raises, player):
        if player == 0:
            p0_turns.append(hist)
        # CALL
        if len(hist) == 0:
            walk(hist + "c", 0, raises, 1 - player)
        else:
            closed.append(hist + "c")
        # RAISE
        if raises < cap:
            walk(hist + "r", 1, raises + 1, 1 - player)
        # FOLD terminates the hand, contributing no round continuation.

    walk("", 0, 0, 0)
    return p0_turns, closed


def enumerate_info_states(spec: GameSpec) -> list[str]:
    """All player-0 information states reachable under the betting grammar."""
    n = spec.rank_count
    turns1, closed1 = _round_grammar(spec.raise_caps[0])
    turns2, _ = _round_grammar(spec.raise_caps[1])
    keys = []
    for priv in range(n):
        for h in turns1:
            keys.append(f"{priv}:{h}")
        for done in closed1:
            for pub in range(n):
                for h in turns2:
                    keys.append(f"{priv}:{done}/{pub}:{h}")
    return sorted(keys)


def legal_for_key(spec: GameSpec, key: str) -> tuple[int, ...]:
    """Legal actions at an information-state key (betting position only)."""
    in_round2 = "/" in key
    hist = key.split("/")[-1].split(":")[-1]
    cap = spec.raise_caps[1 if in_round2 else 0]
    raises = hist.count("r")
    if hist.endswith("r"):
        return (FOLD, CALL, RAISE) if raises < cap else (FOLD, CALL)
    return (CALL, RAISE) if raises < cap else (CALL,)
