"""Tabular learners: acting restricted to retained sets, update arithmetic."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskrl.tabular import QLearner, TabularNfsp, TabularPpo


def test_ql_forced_singleton():
    q = QLearner()
    q.values["k"] = {0: 5.0, 1: 0.0}
    rng = np.random.default_rng(0)
    assert q.act(0, "k", None, (1,), rng, eval_mode=False) == 1


def test_ql_greedy_argmax_with_tie_break():
    q = QLearner(eps=0.0)
    q.values["2"] = {0: 0.0, 1: 1.0}
    rng = np.random.default_rng(0)
    assert q.act(0, "2", None, (0, 1), rng, eval_mode=False) == 1
    q.values["t"] = {0: 0.5, 1: 0.5}
    assert q.act(0, "t", None, (0, 1), rng, eval_mode=True) == 0  # smallest id


def test_ql_full_exploration_is_uniform():
    q = QLearner(eps=1.0)
    rng = np.random.default_rng(1)
    n = 10_000
    count = sum(q.act(0, "k", None, (0, 1), rng, eval_mode=False) for _ in range(n))
    # binomial: mean n/2, sd sqrt(n)/2; accept within 3 sigma
    assert abs(count - n / 2) <= 3 * np.sqrt(n) / 2


def test_ql_update_arithmetic():
    q = QLearner(alpha=0.1)
    q.update("k", 0, 1.0, None, None, True)
    assert q.values["k"][0] == pytest.approx(0.1)
    q2 = QLearner(alpha=0.1)
    q2.update("k", 0, 0.0, "next", (0, 1), False)
    assert q2.values["k"][0] == 0.0  # zero reward, zero bootstrap: fixed point


def test_ql_repeated_terminal_updates_converge_geometrically():
    q = QLearner(alpha=0.1)
    n = 25
    for _ in range(n):
        q.update("k", 0, 1.0, None, None, True)
    assert q.values["k"][0] == pytest.approx(1.0 - 0.9 ** n)


def test_ql_bootstrap_uses_retained_set_only():
    q = QLearner(alpha=0.5, gamma=1.0)
    q.values["next"] = {0: -1.0, 1: 9.0}
    q.update("k", 0, 0.0, "next", (0,), False)  # action 1 masked out
    assert q.values["k"][0] == pytest.approx(0.5 * -1.0)


def test_ql_eval_mode_never_explores():
    q = QLearner(eps=1.0)
    q.values["k"] = {0: 0.0, 1: 1.0}
    rng = np.random.default_rng(2)
    assert all(q.act(0, "k", None, (0, 1), rng, eval_mode=True) == 1
               for _ in range(50))


def test_ppo_policy_normalises_over_retained():
    ppo = TabularPpo()
    ppo.theta["k"] = {0: 1.0, 1: -2.0, 2: 0.5}
    probs = ppo.policy("k", (0, 2))
    assert sum(probs) == pytest.approx(1.0)
    assert all(p > 0 for p in probs)


def test_ppo_zero_advantage_leaves_only_entropy_update():
    ppo = TabularPpo(entropy_coef=0.0)
    ppo.baseline_mean, ppo.baseline_n = 1.0, 5
    rng = np.random.default_rng(3)
    ppo.act(0, "k", None, (0, 1), rng, eval_mode=False)
    before = dict(ppo.theta.get("k", {}))
    ppo.end_episode(0, 1.0)  # return equals baseline -> advantage 0
    after = ppo.theta.get("k", {})
    for a in after:
        assert after[a] == pytest.approx(before.get(a, 0.0))


def test_ppo_positive_advantage_increases_action_probability():
    ppo = TabularPpo(lr=0.05, entropy_coef=0.0)
    rng = np.random.default_rng(4)
    probs = []
    for _ in range(60):
        # force the trajectory to pick action 0 by rejection
        while True:
            a = ppo.act(0, "k", None, (0, 1), rng, eval_mode=False)
            if a == 0:
                break
            ppo._traj[0].pop()
        ppo.end_episode(0, 1.0)
        ppo.baseline_mean, ppo.baseline_n = 0.0, 0  # keep the advantage positive
        probs.append(ppo.policy("k", (0, 1))[0])
    assert all(b >= a - 1e-9 for a, b in zip(probs, probs[1:]))
    assert probs[-1] > probs[0]


def test_ppo_ratio_is_one_at_update_start():
    ppo = TabularPpo()
    rng = np.random.default_rng(5)
    a = ppo.act(0, "k", None, (0, 1), rng, eval_mode=False)
    key, action, retained, pi_old = ppo._traj[0][0]
    assert ppo.policy(key, retained)[retained.index(action)] == pytest.approx(pi_old)


def test_nfsp_pure_br_mode_matches_qlearner():
    nfsp = TabularNfsp(eta=1.0, eps=0.0)
    nfsp.br.values["k"] = {0: 0.0, 1: 2.0}
    rng = np.random.default_rng(6)
    nfsp.begin_episode((0,), rng)
    assert nfsp.act(0, "k", None, (0, 1), rng, eval_mode=False) == 1
    assert nfsp.counts["k"][1] == 1


def test_nfsp_average_policy_count_normalisation():
    nfsp = TabularNfsp()
    nfsp.counts["k"] = {0: 3, 1: 1}
    assert nfsp.average_policy("k", (0, 1)) == [0.75, 0.25]


def test_nfsp_renormalises_over_retained():
    nfsp = TabularNfsp()
    nfsp.counts["k"] = {0: 7, 1: 0}
    # all mass on the removed action: uniform over what remains
    assert nfsp.average_policy("k", (1, 2)) == [0.5, 0.5]


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.integers(0, 4), st.integers(0, 50), min_size=0, max_size=5),
       st.lists(st.integers(0, 4), min_size=1, max_size=5, unique=True))
def test_nfsp_average_policy_always_a_distribution(counts, retained):
    nfsp = TabularNfsp()
    nfsp.counts["k"] = counts
    probs = nfsp.average_policy("k", tuple(sorted(retained)))
    assert sum(probs) == pytest.approx(1.0)
    assert all(p >= 0 for p in probs)


@pytest.mark.parametrize("make", [
    lambda: QLearner(),
    lambda: TabularPpo(),
    lambda: TabularNfsp(),
], ids=["ql", "ppo", "nfsp"])
def test_policies_never_leave_retained_set(make):
    agent = make()
    rng = np.random.default_rng(7)
    for trial in range(300):
        agent.begin_episode((0,), rng)
        legal = tuple(sorted(rng.choice(5, size=int(rng.integers(1, 5)),
                                        replace=False).tolist()))
        key = f"s{trial % 17}"
        a = agent.act(0, key, None, legal, rng, eval_mode=bool(trial % 2))
        assert a in legal


def test_ql_values_bounded_by_episode_returns():
    # gamma = 1 with terminal-only rewards keeps |Q| within the return range
    from maskrl.games import GameSpec
    from maskrl.harness import pretrain
    q = QLearner()
    pretrain(q, GameSpec.kuhn(), 5000, 11)
    bound = GameSpec.kuhn().reward_bounds[1]
    for row in q.values.values():
        for v in row.values():
            assert abs(v) <= bound + 1e-9


def test_qtable_roundtrip(tmp_path):
    q = QLearner()
    q.values["0pb"] = {0: -1.25, 1: 0.5}
    q.values["2"] = {1: 2.0}
    path = tmp_path / "q.tsv"
    q.save(path)
    q2 = QLearner()
    q2.load(path)
    assert q2.values == q.values
