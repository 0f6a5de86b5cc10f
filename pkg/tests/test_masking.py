"""Mask layer: strategies, budget projection, matched support, diagnostics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskrl.masking import (MaskStrategy, MaskTable, apply_mask, diagnostics,
                            matched_random, value_heuristic_mask)
from maskrl.tabular import QLearner


def test_none_strategy_is_identity():
    rng = np.random.default_rng(0)
    assert apply_mask(MaskStrategy.none(), "k", (0, 1), rng) == (0, 1)


def test_fixed_removes_named_action():
    rng = np.random.default_rng(0)
    assert apply_mask(MaskStrategy.fixed(2), "k", (0, 1, 2), rng) == (0, 1)
    # removal that would empty the set keeps the original legal set
    assert apply_mask(MaskStrategy.fixed(2), "k", (2,), rng) == (2,)
    assert apply_mask(MaskStrategy.fixed(5), "k", (0, 1), rng) == (0, 1)


def test_table_lookup_removal():
    table = MaskTable(removed={"0pb": 0})
    rng = np.random.default_rng(0)
    strat = MaskStrategy.lookup(table)
    assert apply_mask(strat, "0pb", (0, 1), rng) == (1,)
    assert apply_mask(strat, "2", (0, 1), rng) == (0, 1)


def test_random_strategy_redraws_per_visit():
    rng = np.random.default_rng(1)
    strat = MaskStrategy.random(0.5)
    outcomes = {apply_mask(strat, "k", (0, 1, 2), rng) for _ in range(200)}
    assert len(outcomes) > 1
    for kept in outcomes:
        assert len(kept) >= 1
    assert apply_mask(MaskStrategy.random(1.0), "k", (0, 1), rng) == (0, 1)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=5, unique=True),
       st.floats(0.0, 1.0), st.integers(0, 2 ** 31 - 1))
def test_apply_mask_never_empties(legal, p, seed):
    legal = tuple(sorted(legal))
    rng = np.random.default_rng(seed)
    strategies = [MaskStrategy.none(), MaskStrategy.random(p),
                  MaskStrategy.fixed(legal[0]),
                  MaskStrategy.lookup(MaskTable(removed={"k": legal[-1]}))]
    for strat in strategies:
        kept = apply_mask(strat, "k", legal, rng)
        assert len(kept) >= 1
        assert set(kept) <= set(legal)


def test_mask_table_budget_enforced():
    with pytest.raises(ValueError):
        MaskTable(removed={"a": 0, "b": 1}, budget=1)
    MaskTable(removed={"a": 0}, budget=1)


def test_value_heuristic_lexicographic_on_uniform():
    q = QLearner()
    for key in ("b", "a", "c"):
        q.values[key] = {0: 0.0, 1: 0.0}
    mask = value_heuristic_mask(q, k=2)
    assert sorted(mask.removed) == ["a", "b"]


def test_value_heuristic_prefers_dominant_state():
    q = QLearner()
    q.values["weak"] = {0: 0.1, 1: -0.1}
    q.values["strong"] = {0: 2.0, 1: 0.5}
    mask = value_heuristic_mask(q, k=1)
    assert set(mask.removed) == {"strong"}
    assert mask.removed["strong"] == 0  # removes the argmax action


def test_value_heuristic_matches_sort_oracle():
    rng = np.random.default_rng(2)
    q = QLearner()
    for i in range(12):
        q.values[f"s{i:02d}"] = {0: float(rng.normal()), 1: float(rng.normal())}
    mask = value_heuristic_mask(q, k=3)
    scores = sorted(q.values, key=lambda k: (-max(abs(v) for v in q.values[k].values()), k))
    assert set(mask.removed) == set(scores[:3])


def test_value_heuristic_k_above_state_count_masks_all():
    q = QLearner()
    q.values["a"] = {0: 1.0}
    mask = value_heuristic_mask(q, k=10)
    assert set(mask.removed) == {"a"}


def test_matched_random_support_and_determinism():
    seen = {f"s{i}": (0, 1, 2) for i in range(10)}
    reference = MaskTable(removed={"s0": 0, "s1": 1, "s2": 0})
    a = matched_random(reference, seen, np.random.default_rng(3))
    b = matched_random(reference, seen, np.random.default_rng(3))
    assert len(a.removed) == 3
    assert a.removed == b.removed
    for key, action in a.removed.items():
        assert action in seen[key]
    assert matched_random(MaskTable(), seen, np.random.default_rng(0)).removed == {}
    with pytest.raises(ValueError):
        matched_random(MaskTable(removed={"x": 0, "y": 0}), {"only": (0, 1)},
                       np.random.default_rng(0))


def test_diagnostics_counts():
    log = [("a", True), ("a", True), ("b", False), ("c", True), ("b", False)]
    d = diagnostics(None, log)
    assert d.masked_states == 2
    assert d.seen_states == 3
    assert d.decision_mask_rate == 3 / 5
    empty = diagnostics(None, [("a", False)])
    assert empty.masked_states == 0 and empty.decision_mask_rate == 0.0
    with pytest.raises(ValueError):
        diagnostics(None, [])


def test_mask_table_roundtrip(tmp_path):
    table = MaskTable(removed={"0pb": 0, "2": 1}, budget=3,
                      confidence={"0pb": 0.49, "2": 0.25})
    path = tmp_path / "mask.txt"
    table.save(path)
    loaded = MaskTable.load(path)
    assert loaded.removed == table.removed
    assert loaded.budget == 3
    assert loaded.confidence["0pb"] == pytest.approx(0.49)
    with pytest.raises(ValueError):
        bad = tmp_path / "bad.txt"
        bad.write_text("not a mask line\n")
        MaskTable.load(bad)
