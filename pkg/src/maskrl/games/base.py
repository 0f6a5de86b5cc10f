"""Game specifications and action constants shared by all environments.

Every environment is a two-player zero-sum game with seeded chance and
deterministic rules.  A :class:`GameSpec` pins everything needed to
reconstruct a game exactly (deck size, betting schedule, grid geometry),
and exposes the reward bounds used for cross-game normalisation.
"""

from __future__ import annotations

from dataclasses import dataclass

KUHN = "kuhn"
LEDUC = "leduc"
GRIDWORLD = "gridworld"
RESOURCE = "resource"

POKER_GAMES = (KUHN, LEDUC)
ALL_GAMES = (KUHN, LEDUC, GRIDWORLD, RESOURCE)

# Poker actions.
PASS, BET = 0, 1
FOLD, CALL, RAISE = 0, 1, 2
# Grid actions.
UP, DOWN, LEFT, RIGHT, STAY = 0, 1, 2, 3, 4

ACTION_NAMES = {
    KUHN: ("PASS", "BET"),
    LEDUC: ("FOLD", "CALL", "RAISE"),
    GRIDWORLD: ("UP", "DOWN", "LEFT", "RIGHT", "STAY"),
    RESOURCE: ("UP", "DOWN", "LEFT", "RIGHT"),
}

# Default (round bet sizes, raise caps) per deck size, chosen so the
# worst-case single-hand loss equals the documented normalisation bound
# for that scale: ante 1 + caps[0]*bets[0] + caps[1]*bets[1].
LEDUC_SCHEDULES = {
    3: ((4, 8), (1, 1)),    # max loss 13
    5: ((2, 6), (2, 2)),    # max loss 17
    10: ((2, 8), (2, 2)),   # max loss 21
    20: ((2, 18), (2, 2)),  # max loss 41
}


@dataclass(frozen=True)
class GameSpec:
    """Immutable description of one environment instance."""

    game: str
    rank_count: int = 3
    bet_sizes: tuple[int, int] = (4, 8)
    raise_caps: tuple[int, int] = (1, 1)
    grid_size: int = 5
    max_steps: int = 30
    n_resources: int = 4

    def __post_init__(self):
        if self.game not in ALL_GAMES:
            raise ValueError(f"unknown game {self.game!r}")
        if self.game == KUHN and self.rank_count != 3:
            raise ValueError("kuhn poker uses exactly 3 ranks")
        if self.game == LEDUC:
            if self.rank_count < 2:
                raise ValueError("leduc needs at least 2 ranks")
            if any(b <= 0 for b in self.bet_sizes):
                raise ValueError("bet sizes must be positive")
            if any(c < 0 for c in self.raise_caps):
                raise ValueError("raise caps must be non-negative")
        if self.game in (GRIDWORLD, RESOURCE):
            if self.grid_size < 2:
                raise ValueError("grid size must be at least 2")
            if self.max_steps <= 0:
                raise ValueError("max_steps must be positive")
        if self.game == RESOURCE:
            free = self.grid_size * self.grid_size - 2
            if not (1 <= self.n_resources <= free):
                raise ValueError("n_resources must fit on the grid")
        rmin, rmax = self.reward_bounds
        if not rmin < rmax:
            raise ValueError("degenerate reward bounds")

    # -- constructors ------------------------------------------------------

    @classmethod
    def kuhn(cls) -> "GameSpec":
        return cls(game=KUHN, rank_count=3)

    @classmethod
    def leduc(cls, rank_count: int = 3, bet_sizes=None, raise_caps=None) -> "GameSpec":
        default_bets, default_caps = LEDUC_SCHEDULES.get(rank_count, ((2, 4), (2, 2)))
        return cls(
            game=LEDUC,
            rank_count=rank_count,
            bet_sizes=tuple(bet_sizes) if bet_sizes else default_bets,
            raise_caps=tuple(raise_caps) if raise_caps else default_caps,
        )

    @classmethod
    def gridworld(cls, grid_size: int = 5, max_steps: int = 30) -> "GameSpec":
        return cls(game=GRIDWORLD, grid_size=grid_size, max_steps=max_steps)

    @classmethod
    def resource(cls, grid_size: int = 4, max_steps: int = 40, n_resources: int = 4) -> "GameSpec":
        return cls(game=RESOURCE, grid_size=grid_size, max_steps=max_steps,
                   n_resources=n_resources)

    # -- derived quantities ------------------------------------------------

    @property
    def reward_bounds(self) -> tuple[float, float]:
        """(r_min, r_max): the worst/best single-episode return for player 0."""
        if self.game == KUHN:
            return (-2.0, 2.0)
        if self.game == LEDUC:
            m = 1 + self.raise_caps[0] * self.bet_sizes[0] + self.raise_caps[1] * self.bet_sizes[1]
            return (-float(m), float(m))
        if self.game == GRIDWORLD:
            return (-1.0, 1.0)
        return (-float(self.n_resources), float(self.n_resources))

    @property
    def n_actions(self) -> int:
        return len(ACTION_NAMES[self.game])

    @property
    def feature_dim(self) -> int:
        if self.game == KUHN:
            return 7  # card one-hot (3) + history one-hot (4)
        if self.game == LEDUC:
            return 2 * self.rank_count + 31
        cells = self.grid_size * self.grid_size
        if self.game == GRIDWORLD:
            return 2 * cells + 1
        return 3 * cells + 3

    def action_name(self, action: int) -> str:
        return ACTION_NAMES[self.game][action]
