"""Action-removal masks and the non-learned masking strategies.

A mask removes at most one action per information state and applies to
player 0 only.  Removal never empties an action set: whenever dropping
the selected action would leave nothing, the original legal set is kept.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

__all__ = [
    "MaskTable", "MaskStrategy", "MaskDiagnostics", "apply_mask",
    "value_heuristic_mask", "matched_random", "diagnostics",
]


@dataclass
class MaskTable:
    """Per-information-state removals, at most one action per state."""

    removed: dict[str, int] = field(default_factory=dict)
    budget: int | None = None
    confidence: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.budget is not None:
            if self.budget < 0:
                raise ValueError("budget must be non-negative")
            if len(self.removed) > self.budget:
                raise ValueError(
                    f"support {len(self.removed)} exceeds budget {self.budget}")

    @property
    def support(self) -> set[str]:
        return set(self.removed)

    def retained(self, key: str, legal: tuple[int, ...]) -> tuple[int, ...]:
        """Legal actions left after this table's removal at ``key``."""
        a = self.removed.get(key)
        if a is None or a not in legal or len(legal) == 1:
            return legal
        return tuple(x for x in legal if x != a)

    def save(self, path: str | Path) -> None:
        lines = ["# key\tremoved_action\tconfidence"]
        if self.budget is not None:
            lines.append(f"# budget\t{self.budget}")
        for key in sorted(self.removed):
            conf = self.confidence.get(key, 0.0)
            lines.append(f"{key}\t{self.removed[key]}\t{conf:.6f}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "MaskTable":
        removed, confidence, budget = {}, {}, None
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if parts[:1] == ["budget"]:
                    budget = int(parts[1])
                continue
            try:
                key, action, conf = line.split("\t")
                removed[key] = int(action)
                confidence[key] = float(conf)
            except ValueError as exc:
                raise ValueError(f"bad mask line {line!r}") from exc
        return cls(removed=removed, budget=budget, confidence=confidence)


@dataclass
class MaskDiagnostics:
    masked_states: int
    seen_states: int
    decision_mask_rate: float

    def as_dict(self) -> dict:
        return {
            "masked_states": self.masked_states,
            "seen_states": self.seen_states,
            "decision_mask_rate": self.decision_mask_rate,
        }


@dataclass
class MaskStrategy:
    """One of the masking strategies: identity, random, fixed, table-driven,
    value heuristic, or adversary-driven."""

    kind: str                      # none|random|fixed|table|value_heuristic|adversary
    p: float = 0.0
    action: int | None = None
    table: MaskTable | None = None
    adversary: object | None = None
    mode: str = "greedy"           # adversary decision mode: sample|greedy
    k: int | None = None           # value-heuristic budget

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("removal probability must lie in [0, 1]")

    @classmethod
    def none(cls):
        return cls(kind="none")

    @classmethod
    def random(cls, p: float):
        return cls(kind="random", p=p)

    @classmethod
    def fixed(cls, action: int):
        return cls(kind="fixed", action=action)

    @classmethod
    def lookup(cls, table: MaskTable):
        return cls(kind="table", table=table)

    @classmethod
    def value_heuristic(cls, k: int):
        return cls(kind="value_heuristic", k=k)

    @classmethod
    def adversary_driven(cls, adversary, mode: str = "greedy"):
        return cls(kind="adversary", adversary=adversary, mode=mode)


def apply_mask(strategy: MaskStrategy, key: str, legal: tuple[int, ...], rng,
               features=None) -> tuple[int, ...]:
    """Retained action set for player 0 at ``key``; never empty."""
    kind = strategy.kind
    if kind == "none":
        return legal
    if kind == "random":
        p = strategy.p
        kept = tuple(a for a in legal if rng.random() >= p)
        return kept if kept else legal
    if kind == "fixed":
        if strategy.action in legal and len(legal) > 1:
            return tuple(a for a in legal if a != strategy.action)
        return legal
    if kind == "table":
        return strategy.table.retained(key, legal)
    if kind == "adversary":
        removed = strategy.adversary.decide(key, features, legal, strategy.mode, rng)
        if removed is None:
            return legal
        return tuple(a for a in legal if a != removed)
    if kind == "value_heuristic":
        raise ValueError("value_heuristic must be materialised into a table first "
                         "(see value_heuristic_mask)")
    raise ValueError(f"unknown strategy kind {kind!r}")


def value_heuristic_mask(q, k: int, legal_by_key=None) -> MaskTable:
    """Mask the k states with the largest |Q|, removing the argmax action.

    ``q`` is a tabular Q learner (``q.values`` maps key -> {action: value}).
    Ties break lexicographically on the key so repeated runs agree.
    """
    if not q.values:
        raise ValueError("Q-table is empty")
    universe = sorted(legal_by_key) if legal_by_key else sorted(q.values)
    scored = []
    for key in universe:
        row = q.values.get(key, {})
        actions = legal_by_key.get(key) if legal_by_key else sorted(row)
        if not actions:
            continue
        score = max(abs(row.get(a, 0.0)) for a in actions)
        best = max(actions, key=lambda a: (row.get(a, 0.0), -a))
        scored.append((-score, key, best))
    scored.sort()
    chosen = scored[:k]
    return MaskTable(
        removed={key: best for _, key, best in chosen},
        budget=k,
        confidence={key: -score for score, key, best in chosen},
    )


def matched_random(reference: MaskTable, seen_legal: dict[str, tuple[int, ...]],
                   rng) -> MaskTable:
    """Random mask with exactly the reference's support size.

    States are sampled uniformly without replacement from the seen set and
    the removed action uniformly from that state's legal actions.
    """
    size = len(reference.removed)
    keys = sorted(seen_legal)
    if len(keys) < size:
        raise ValueError(f"only {len(keys)} seen states for support {size}")
    if size == 0:
        return MaskTable(removed={}, budget=0)
    picks = rng.choice(len(keys), size=size, replace=False)
    removed = {}
    for i in picks:
        key = keys[int(i)]
        legal = seen_legal[key]
        removed[key] = int(legal[int(rng.integers(len(legal)))])
    return MaskTable(removed=removed, budget=size)


def diagnostics(mask: MaskTable | None, visit_log) -> MaskDiagnostics:
    """Support statistics over an evaluation visit log.

    ``visit_log`` yields (key, removal_applied) pairs, one per player-0
    decision.
    """
    seen, masked = set(), set()
    decisions = 0
    applied = 0
    for key, hit in visit_log:
        decisions += 1
        seen.add(key)
        if hit:
            applied += 1
            masked.add(key)
    if decisions == 0:
        raise ValueError("empty visit log")
    return MaskDiagnostics(
        masked_states=len(masked),
        seen_states=len(seen),
        decision_mask_rate=applied / decisions,
    )
