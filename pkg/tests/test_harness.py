"""Harness: determinism, regimes, mask scoping, records."""

import copy

import numpy as np
import pytest

from maskrl.adversary import TabularAdversary
from maskrl.games import GameSpec
from maskrl.harness import (Defense, Regime, RunRecord, TrainingSchedule,
                            FIXED_OPPONENT, derive_seed, evaluate, pretrain,
                            run_bilevel, run_bilevel_perturb, train_fixed_mask,
                            transfer_mask)
from maskrl.masking import MaskStrategy, MaskTable
from maskrl.tabular import QLearner

SPEC = GameSpec.kuhn()


def small_schedule(**kw):
    args = dict(pretrain_episodes=1000, outer_iterations=4, inner_episodes=250,
                eval_episodes=500)
    args.update(kw)
    return TrainingSchedule(**args)


def test_identical_seed_and_config_identical_record():
    records = []
    for _ in range(2):
        agent = QLearner()
        pretrain(agent, SPEC, 2000, derive_seed(5, 1))
        adv = TabularAdversary()
        rec = run_bilevel(agent, adv, SPEC, small_schedule(), derive_seed(5, 2),
                          condition="x")
        records.append(rec.to_json())
    assert records[0] == records[1]


def test_pretrain_zero_episodes_leaves_agent_unchanged():
    agent = QLearner()
    agent.values["k"] = {0: 1.0}
    windows = pretrain(agent, SPEC, 0, 7)
    assert windows == []
    assert agent.values == {"k": {0: 1.0}}


def test_pretrain_same_seed_identical_windows():
    w1 = pretrain(QLearner(), SPEC, 3000, 9)
    w2 = pretrain(QLearner(), SPEC, 3000, 9)
    assert w1 == w2
    assert len(w1) == 6  # 3000 episodes / 500 window


def test_evaluation_does_not_learn():
    agent = QLearner()
    pretrain(agent, SPEC, 2000, 11)
    before = copy.deepcopy(agent.values)
    evaluate(agent, None, SPEC, 1000, 12)
    assert agent.values == before


class RecordingAdversary(TabularAdversary):
    def __init__(self):
        super().__init__()
        self.seen_calls = []

    def decide(self, key, features, legal, mode, rng):
        self.seen_calls.append(key)
        return super().decide(key, features, legal, mode, rng)


def test_only_player_zero_is_masked():
    agent = QLearner()
    pretrain(agent, SPEC, 1000, 13)
    adv = RecordingAdversary()
    run_bilevel(agent, adv, SPEC, small_schedule(pretrain_episodes=0),
                derive_seed(13, 2), condition="scope")
    # player-0 keys in this game have an even-length betting history
    assert adv.seen_calls
    for key in adv.seen_calls:
        assert len(key) % 2 == 1  # rank digit + even history length


def test_fixed_opponent_snapshot_does_not_learn():
    agent = QLearner()
    pretrain(agent, SPEC, 2000, 15)
    snapshot_values = copy.deepcopy(agent.values)
    adv = TabularAdversary()
    rec = run_bilevel(agent, adv, SPEC, small_schedule(pretrain_episodes=0),
                      derive_seed(15, 2), regime=Regime(FIXED_OPPONENT),
                      condition="fixed")
    assert rec.metadata["regime"] == FIXED_OPPONENT
    # the learner's table moved away from the snapshot
    assert agent.values != snapshot_values


def test_bilevel_window_count_and_capacity_trace():
    agent = QLearner()
    pretrain(agent, SPEC, 1000, 17)
    adv = TabularAdversary()
    sched = small_schedule(pretrain_episodes=0, outer_iterations=3,
                           inner_episodes=500)
    rec = run_bilevel(agent, adv, SPEC, sched, derive_seed(17, 2), condition="w")
    assert len(rec.windows["attack"]) == 3
    assert len(rec.cac_w_trace) == 3
    assert all(w >= 0 for w in rec.cac_w_trace)
    assert rec.mask_support >= 1
    assert 0 <= rec.diagnostics["decision_mask_rate"] <= 1


def test_eval_budget_projects_support():
    agent = QLearner()
    pretrain(agent, SPEC, 1000, 19)
    adv = TabularAdversary()
    rec = run_bilevel(agent, adv, SPEC, small_schedule(pretrain_episodes=0),
                      derive_seed(19, 2), eval_budget=2, condition="b")
    assert rec.mask_support <= 2


def test_extension_windows_recorded():
    agent = QLearner()
    pretrain(agent, SPEC, 1000, 21)
    adv = TabularAdversary()
    sched = small_schedule(pretrain_episodes=0, extension_episodes=1000)
    rec = run_bilevel(agent, adv, SPEC, sched, derive_seed(21, 2), condition="e")
    # window size follows the inner block length (250 here)
    assert len(rec.windows["extension"]) == 4


def test_null_adversary_matches_unmasked_baseline():
    class NullAdversary(TabularAdversary):
        def decide(self, key, features, legal, mode, rng):
            super().decide(key, features, legal, mode, rng)
            return None

    base = QLearner()
    pretrain(base, SPEC, 3000, 23)
    attacked = copy.deepcopy(base)
    adv = NullAdversary()
    rec = run_bilevel(attacked, adv, SPEC, small_schedule(pretrain_episodes=0),
                      derive_seed(23, 2), condition="null")
    unmasked = evaluate(base, None, SPEC, 2000, 99)
    # no removals ever applied: outcome stays within the baseline's noise band
    assert abs(rec.eval_mean - unmasked.mean) < 0.35
    assert rec.diagnostics["decision_mask_rate"] == 0.0


def test_perturb_run_shapes():
    from maskrl.adversary import PerturbationAdversary
    agent = QLearner()
    pretrain(agent, SPEC, 1000, 25)
    rec = run_bilevel_perturb(agent, PerturbationAdversary(attack_rate=0.5),
                              SPEC, small_schedule(pretrain_episodes=0),
                              derive_seed(25, 2), condition="p")
    assert rec.metadata["attack"] == "perturbation"
    assert len(rec.windows["attack"]) == 4


def test_train_fixed_mask_and_eval_only_degradation():
    agent = QLearner()
    pretrain(agent, SPEC, 4000, 27)
    mask = MaskTable(removed={"0": 1, "0pb": 0, "1": 0, "2": 1, "2pb": 1})
    base = evaluate(agent, None, SPEC, 2000, 28).mean
    masked = evaluate(agent, mask, SPEC, 2000, 28).mean
    assert masked < base  # eval-only masking already hurts
    windows = train_fixed_mask(agent, mask, SPEC, 2000, 29)
    assert len(windows) == 4


def test_transfer_mask_runs_fresh_victims(tmp_path):
    mask = MaskTable(removed={"0": 1, "1": 0})
    path = tmp_path / "mask.txt"
    mask.save(path)
    records = transfer_mask(path, SPEC, lambda s: QLearner(), [1, 2],
                            pretrain_episodes=500, train_episodes=500,
                            eval_episodes=400)
    assert [r.seed for r in records] == [1, 2]
    assert all(r.mask_support == 2 for r in records)


def test_transfer_empty_mask_is_baselineish():
    records = transfer_mask(MaskTable(), SPEC, lambda s: QLearner(), [3],
                            pretrain_episodes=3000, train_episodes=1000,
                            eval_episodes=2000)
    assert records[0].diagnostics["decision_mask_rate"] == 0.0
    assert abs(records[0].eval_mean) < 0.45


def test_defense_keeps_actions_available():
    rng = np.random.default_rng(31)
    dropout = Defense("dropout", p=1.0)
    for _ in range(100):
        kept = dropout.apply("k", (0, 1, 2), (0, 1, 2), rng)
        assert len(kept) == 2
    assert dropout.apply("k", (0,), (0,), rng) == (0,)
    ensemble = Defense("ensemble", n=3)
    ensemble.begin_episode()
    first = ensemble.apply("k", (0, 1, 2), (0, 1, 2), rng)
    again = ensemble.apply("k", (0, 1, 2), (0, 1, 2), rng)
    assert first == again  # persistent within the active mask
    with pytest.raises(ValueError):
        Defense("nope")


def test_run_record_roundtrip(tmp_path):
    rec = RunRecord(seed=1, game="kuhn", condition="x", eval_mean=-0.5,
                    eval_ci95=0.1, eval_episodes=100,
                    windows={"attack": [0.1, -0.2]},
                    diagnostics={"masked_states": 2, "seen_states": 4,
                                 "decision_mask_rate": 0.5},
                    cac_w=1.0, cac_v=0.5, mask_support=2,
                    confidence_table={"0": [1, 0.4]},
                    metadata={"note": "t"})
    path = tmp_path / "run.json"
    rec.save(path)
    loaded = RunRecord.load(path)
    assert loaded.eval_mean == rec.eval_mean
    assert loaded.windows == rec.windows
    assert loaded.confidence_table == rec.confidence_table


def test_schedule_validation():
    with pytest.raises(ValueError):
        TrainingSchedule(pretrain_episodes=-1)
    with pytest.raises(ValueError):
        Regime("bogus")
