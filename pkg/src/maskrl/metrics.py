"""Diagnostics: reach estimation, contingent action capacity, damage bounds.

Contingent action capacity (CAC) measures the decision freedom a mask
leaves behind.  The reach-weighted form sums on-policy visit rates over
states that retain at least two actions; the value-weighted form
additionally weights each state by its Q-value gap, so it concentrates on
strategically pivotal states.  Reach is expected visits per episode (not
a normalised distribution), making both capacities per-episode numbers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from .masking import MaskTable

__all__ = [
    "ReachMap", "GapMap", "norm_bounds", "normalize", "estimate_reach",
    "cac_w", "cac_v", "gaps_for_mask", "gaps_oracle", "cacv_greedy",
    "damage_bound", "DamageBound", "mean_ci", "pearson", "log_linear_fit",
    "dea_check",
]

log = logging.getLogger(__name__)


@dataclass
class ReachMap:
    """Expected visits per episode for each player-0 information state."""

    rho: dict[str, float]
    episodes: int
    checkpoint: str = ""


@dataclass
class GapMap:
    """Q-value gap (best minus forced/alternative action) per state."""

    delta: dict[str, float]
    checkpoint: str = ""


def norm_bounds(spec) -> tuple[float, float]:
    """(r_min, r_max) for cross-game reward normalisation."""
    return spec.reward_bounds


def normalize(r: float, bounds: tuple[float, float]) -> float:
    """Affine map of a raw reward onto [0, 1]; clips (with a warning) outside."""
    rmin, rmax = bounds
    if r < rmin or r > rmax:
        log.warning("reward %.4f outside bounds [%s, %s]; clipping", r, rmin, rmax)
        r = min(max(r, rmin), rmax)
    return (r - rmin) / (rmax - rmin)


def estimate_reach(agent, mask, spec, episodes: int, seed: int,
                   checkpoint: str = "") -> ReachMap:
    """On-policy visit rates from frozen evaluation rollouts."""
    if episodes <= 0:
        raise ValueError("need at least one rollout episode")
    from . import harness  # local import: harness depends on this module

    report = harness.evaluate(agent, mask, spec, episodes, seed)
    rho = {k: v / episodes for k, v in report.visits.items()}
    return ReachMap(rho=rho, episodes=episodes, checkpoint=checkpoint)


def _retained_size(mask: MaskTable | None, key: str, legal) -> int:
    if mask is None:
        return len(legal)
    return len(mask.retained(key, legal))


def cac_w(mask: MaskTable | None, reach: ReachMap,
          legal_by_key: dict[str, tuple]) -> float:
    """Reach mass over states whose retained set keeps at least two actions."""
    total = 0.0
    for key, rho in reach.rho.items():
        legal = legal_by_key.get(key)
        if legal is None:
            continue
        if _retained_size(mask, key, legal) > 1:
            total += rho
    return total


def cac_v(mask: MaskTable | None, reach: ReachMap, gaps: GapMap,
          legal_by_key: dict[str, tuple]) -> float:
    """Value-weighted capacity: reach times Q-gap over multi-action states."""
    if gaps.checkpoint and reach.checkpoint and gaps.checkpoint != reach.checkpoint:
        log.warning("gap checkpoint %r differs from reach checkpoint %r",
                    gaps.checkpoint, reach.checkpoint)
    total = 0.0
    for key, rho in reach.rho.items():
        legal = legal_by_key.get(key)
        if legal is None:
            continue
        if _retained_size(mask, key, legal) > 1:
            total += rho * gaps.delta.get(key, 0.0)
    return total


def _best_action(row: dict[int, float], actions) -> int:
    best, best_v = actions[0], row.get(actions[0], 0.0)
    for a in actions[1:]:
        v = row.get(a, 0.0)
        if v > best_v:
            best, best_v = a, v
    return best


def gaps_for_mask(q_by_key: dict[str, dict[int, float]],
                  legal_by_key: dict[str, tuple],
                  mask: MaskTable | None, checkpoint: str = "") -> GapMap:
    """Gap of the best action over the worst retained alternative under a mask."""
    delta = {}
    for key, legal in legal_by_key.items():
        row = q_by_key.get(key)
        if row is None or len(legal) < 2:
            continue
        best = _best_action(row, legal)
        retained = mask.retained(key, legal) if mask is not None else legal
        others = [a for a in retained if a != best] or [a for a in legal if a != best]
        delta[key] = row.get(best, 0.0) - min(row.get(a, 0.0) for a in others)
    return GapMap(delta=delta, checkpoint=checkpoint)


def gaps_oracle(q_by_key: dict[str, dict[int, float]],
                legal_by_key: dict[str, tuple], checkpoint: str = "") -> GapMap:
    """Mask-free gap proxy: best minus second-best Q over the legal set."""
    delta = {}
    for key, legal in legal_by_key.items():
        row = q_by_key.get(key)
        if row is None or len(legal) < 2:
            continue
        vals = sorted((row.get(a, 0.0) for a in legal), reverse=True)
        delta[key] = vals[0] - vals[1]
    return GapMap(delta=delta, checkpoint=checkpoint)


def cacv_greedy(k: int, reach: ReachMap, gaps: GapMap,
                q_by_key: dict[str, dict[int, float]],
                legal_by_key: dict[str, tuple]) -> MaskTable:
    """Mask the top-k states by reach times gap, removing the best action."""
    if k < 1:
        raise ValueError("k must be at least 1")
    scored = []
    for key, rho in reach.rho.items():
        legal = legal_by_key.get(key)
        row = q_by_key.get(key)
        if legal is None or row is None or len(legal) < 2:
            continue
        scored.append((-(rho * gaps.delta.get(key, 0.0)), key))
    scored.sort()
    removed, conf = {}, {}
    for score, key in scored[:k]:
        removed[key] = _best_action(q_by_key[key], legal_by_key[key])
        conf[key] = -score
    return MaskTable(removed=removed, budget=k, confidence=conf)


@dataclass
class DamageBound:
    """Per-state and aggregate value-loss bounds for a singleton-forcing mask."""

    per_state: dict[str, float] = field(default_factory=dict)
    additive: float = 0.0
    upper: float = 0.0


def damage_bound(mask: MaskTable, q_by_key: dict[str, dict[int, float]],
                 reach: ReachMap, legal_by_key: dict[str, tuple]) -> DamageBound:
    """Value-loss estimates from forcing states in the mask's support.

    States whose retained set keeps several actions contribute zero to the
    per-state and additive terms; the upper bound uses the worst
    alternative at every supported state.
    """
    out = DamageBound()
    for key in sorted(mask.removed):
        legal = legal_by_key.get(key)
        row = q_by_key.get(key)
        rho = reach.rho.get(key, 0.0)
        if legal is None or row is None:
            continue
        retained = mask.retained(key, legal)
        best = _best_action(row, legal)
        alternatives = [a for a in legal if a != best]
        if alternatives:
            worst_gap = max(row.get(best, 0.0) - row.get(a, 0.0) for a in alternatives)
            out.upper += rho * worst_gap
        if len(retained) == 1:
            forced = retained[0]
            contribution = rho * (row.get(best, 0.0) - row.get(forced, 0.0))
            out.per_state[key] = contribution
            out.additive += contribution
        else:
            out.per_state[key] = 0.0
    return out


# -- statistics ---------------------------------------------------------------

def mean_ci(samples) -> tuple[float, float, bool]:
    """(mean, 95% Student-t half-width, degenerate-variance flag)."""
    xs = np.asarray(list(samples), dtype=float)
    if xs.size < 2:
        raise ValueError("need at least two samples")
    mean = float(xs.mean())
    sd = float(xs.std(ddof=1))
    if sd == 0.0:
        return mean, 0.0, True
    half = float(sstats.t.ppf(0.975, xs.size - 1) * sd / math.sqrt(xs.size))
    return mean, half, False


def pearson(xs, ys) -> tuple[float, float, bool]:
    """(r, p-value, degenerate flag); degenerate when either series is constant."""
    xs = np.asarray(list(xs), dtype=float)
    ys = np.asarray(list(ys), dtype=float)
    if xs.size != ys.size or xs.size < 2:
        raise ValueError("paired series of equal length >= 2 required")
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        return float("nan"), float("nan"), True
    r, p = sstats.pearsonr(xs, ys)
    return float(r), float(p), False


def log_linear_fit(sizes, values) -> tuple[float, float, float]:
    """(slope, intercept, R^2) of values regressed on log10(sizes)."""
    x = np.log10(np.asarray(list(sizes), dtype=float))
    y = np.asarray(list(values), dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points")
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


# -- forced-policy fixed point -------------------------------------------------

def dea_check(agent, mask: MaskTable, spec, episodes: int, seed: int,
              window: int = 500, std_threshold: float = 0.10) -> dict:
    """Diagnose the all-forced fixed point under a singleton-complete mask.

    Requires the mask to force a single action at every enumerable victim
    state.  Trains the agent under the fixed mask, then verifies that the
    victim plays the forced action at 100% of evaluated decisions and that
    the opponent's reward has stabilised: the std of its last five training
    windows must sit inside the band converged unmasked self-play shows
    (measured at 0.02-0.08 on this game's reward scale, hence the 0.10
    default).
    """
    from . import games, harness

    keys = games.enumerate_info_states(spec)
    for key in keys:
        legal = games.legal_for_key(spec, key)
        if len(mask.retained(key, legal)) != 1:
            raise ValueError(f"mask does not force a singleton at {key!r}")

    windows = harness.train_fixed_mask(agent, mask, spec, episodes, seed,
                                       window=window)
    report = harness.evaluate(agent, mask, spec, 2000, seed + 1,
                              record_actions=True)
    forced_hits = 0
    for key, action in report.actions:
        legal = games.legal_for_key(spec, key)
        if action == mask.retained(key, legal)[0]:
            forced_hits += 1
    total = len(report.actions)
    tail = windows[-5:]
    opp_std = float(np.std([-w for w in tail], ddof=0)) if len(tail) > 1 else 0.0
    return {
        "forced_fraction": forced_hits / total if total else 1.0,
        "decisions": total,
        "opponent_window_std": opp_std,
        "windows": windows,
        "std_threshold": std_threshold,
        "stationary": opp_std <= std_threshold,
    }
