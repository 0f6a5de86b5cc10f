"""Adversaries: decision mechanics, score-function updates, projection."""

import math

import numpy as np
import pytest

from maskrl.adversary import (BudgetedAdversary, NeuralAdversary,
                              PerturbationAdversary, TabularAdversary,
                              leduc_public_key)
from maskrl.masking import MaskTable


def test_greedy_removal_uniform_prefs_breaks_ties_low():
    adv = TabularAdversary()
    rng = np.random.default_rng(0)
    removed = adv.decide("k", None, (0, 1, 2), "greedy", rng)
    assert removed == 0


def test_singleton_legal_set_is_never_removed():
    adv = TabularAdversary()
    rng = np.random.default_rng(1)
    assert adv.decide("k", None, (1,), "sample", rng) is None
    adv.begin_episode()
    adv.decide("k", None, (1,), "sample", rng)
    adv.end_episode(-1.0)
    assert not adv.table.pending_batch()  # nothing logged


def test_sampled_decisions_are_logged_greedy_ones_are_not():
    adv = TabularAdversary()
    rng = np.random.default_rng(2)
    adv.begin_episode()
    adv.decide("k", None, (0, 1), "greedy", rng)
    adv.end_episode(-1.0)
    assert not adv.table.pending_batch()
    adv.begin_episode()
    adv.decide("k", None, (0, 1), "sample", rng)
    adv.end_episode(-1.0)
    assert len(adv.table.pending_batch()) == 1


def test_tabular_reinforce_closed_form_single_decision():
    adv = TabularAdversary(lr=0.01)
    rng = np.random.default_rng(3)
    adv.begin_episode()
    removed = adv.decide("h", None, (0, 1), "sample", rng)
    adv.end_episode(-1.0)  # reward -V0 = 1
    p = 0.5  # uniform prefs at log time
    adv.reinforce_update()
    idx = removed
    assert adv.table.prefs["h"][idx] == pytest.approx(0.01 * (1 - p))
    assert adv.table.prefs["h"][1 - idx] == pytest.approx(-0.01 * p)


def test_reinforce_update_requires_logged_episodes():
    adv = TabularAdversary()
    with pytest.raises(ValueError):
        adv.reinforce_update()


def test_two_state_bandit_removal_probability_increases():
    # removing action 1 costs the victim 1; removing action 0 costs nothing
    adv = TabularAdversary(lr=0.05)
    rng = np.random.default_rng(4)
    history = []
    for _ in range(200):
        adv.begin_episode()
        removed = adv.decide("h", None, (0, 1), "sample", rng)
        v0 = -1.0 if removed == 1 else 0.0
        adv.end_episode(v0)
        adv.reinforce_update()
        history.append(adv.table.probs("h")[1])
    assert history[-1] > 0.9
    assert history[-1] > history[0]


def test_reinforce_estimator_unbiased_on_analytic_bandit():
    # E[grad log p(a) * r(a)] under p must match the closed-form gradient of
    # E[r]: for a 2-armed softmax with rewards (0, 1), d/dtheta_1 E[r] =
    # p1 * (1 - p1).
    theta = (0.3, -0.2)
    p1 = math.exp(theta[1]) / (math.exp(theta[0]) + math.exp(theta[1]))
    rng = np.random.default_rng(5)
    n = 100_000
    draws = rng.random(n) < p1
    rewards = draws.astype(float)  # arm 1 pays 1, arm 0 pays 0
    grad_samples = rewards * (draws.astype(float) - p1)
    closed_form = p1 * (1 - p1)
    se = grad_samples.std(ddof=1) / math.sqrt(n)
    assert abs(grad_samples.mean() - closed_form) <= 3 * se


def test_confidence_values():
    adv = TabularAdversary()
    rng = np.random.default_rng(6)
    adv.decide("u", None, (0, 1), "greedy", rng)
    assert adv.confidence("u") == pytest.approx(0.0)
    adv.table.prefs["sharp"] = [math.log(0.99), math.log(0.01)]
    adv.table.choices["sharp"] = (0, 1)
    assert adv.confidence("sharp") == pytest.approx(0.49, abs=1e-6)
    assert adv.confidence("unknown") == 0.0
    for key in ("u", "sharp"):
        c = adv.confidence(key)
        assert 0.0 <= c <= 0.5


def test_project_top_k_edges_and_order():
    adv = TabularAdversary()
    rng = np.random.default_rng(7)
    sharpness = {"a": 3.0, "b": 1.0, "c": 2.0, "d": 0.1}
    for key, s in sharpness.items():
        adv.table.prefs[key] = [s, 0.0]
        adv.table.choices[key] = (0, 1)
    assert adv.project_top_k(0).removed == {}
    full = adv.project_top_k(10)
    assert set(full.removed) == set(sharpness)
    top = adv.project_top_k(3)
    ranked = sorted(sharpness, key=lambda k: (-adv.confidence(k), k))
    assert set(top.removed) == set(ranked[:3])
    assert top.budget == 3
    assert len(top.removed) <= 3


def test_public_key_adversary_pools_private_ranks():
    adv = TabularAdversary(key_fn=leduc_public_key)
    rng = np.random.default_rng(8)
    adv.decide("0:cr", None, (0, 1), "sample", rng)
    adv.decide("2:cr", None, (0, 1), "sample", rng)
    assert adv.known_keys() == ["?:cr"]
    mask = adv.project_top_k(2, keys=["0:cr", "2:cr"])
    assert set(mask.removed) == {"0:cr", "2:cr"}


def test_perturb_mechanics():
    padv = PerturbationAdversary(attack_rate=1.0)
    rng = np.random.default_rng(9)
    padv.table.prefs["h"] = [0.0, 10.0, -10.0]  # choices (0, 1, noop)
    padv.table.choices["h"] = (0, 1, "noop")
    # deterministic replace-with-action-1 policy always executes action 1
    for chosen in (0, 1):
        assert padv.perturb("h", chosen, (0, 1), "greedy", rng) == 1
    padv.table.prefs["h"] = [-10.0, -10.0, 10.0]  # no-op dominant
    assert padv.perturb("h", 0, (0, 1), "greedy", rng) == 0
    with pytest.raises(ValueError):
        padv.perturb("h", 5, (0, 1), "greedy", rng)


def test_perturb_attack_rate_bounds_interception():
    padv = PerturbationAdversary(attack_rate=0.0)
    rng = np.random.default_rng(10)
    assert all(padv.perturb("h", 0, (0, 1), "sample", rng) == 0
               for _ in range(50))
    with pytest.raises(ValueError):
        PerturbationAdversary(attack_rate=1.5)


def test_neural_adversary_noop_and_logging():
    adv = NeuralAdversary(feature_dim=4, n_actions=2, hidden=(6,),
                          rng=np.random.default_rng(11))
    rng = np.random.default_rng(12)
    x = np.zeros(4)
    outcomes = set()
    adv.begin_episode()
    for _ in range(100):
        outcomes.add(adv.decide("k", x, (0, 1), "sample", rng))
    adv.end_episode(-1.0)
    assert None in outcomes  # the explicit no-removal head fires sometimes
    assert outcomes - {None} <= {0, 1}
    assert adv.decide("k", None, (0,), "sample", rng) is None
    with pytest.raises(ValueError):
        adv.decide("k2", None, (0, 1), "sample", rng)


def test_neural_adversary_zero_advantage_keeps_weights():
    adv = NeuralAdversary(feature_dim=4, n_actions=2, hidden=(6,),
                          rng=np.random.default_rng(13))
    adv.baseline_mean, adv.baseline_n = 1.0, 10  # matches -V0 below
    rng = np.random.default_rng(14)
    adv.begin_episode()
    adv.decide("k", np.ones(4), (0, 1), "sample", rng)
    adv.end_episode(-1.0)
    before = [w.copy() for w in adv.net.weights]
    adv.reinforce_update()
    assert all(np.allclose(a, b) for a, b in zip(before, adv.net.weights))


def test_neural_adversary_learns_damaging_removal():
    adv = NeuralAdversary(feature_dim=3, n_actions=2, hidden=(8,), lr=0.05,
                          rng=np.random.default_rng(15))
    rng = np.random.default_rng(16)
    x = np.array([1.0, 0.0, 0.0])
    for _ in range(80):
        adv.begin_episode()
        removed = adv.decide("k", x, (0, 1), "sample", rng)
        adv.end_episode(-1.0 if removed == 1 else 0.0)
        adv.reinforce_update()
    probs = adv.net.forward(x)
    assert probs[1] > 0.6


def test_budgeted_adversary_limits_applications():
    inner = TabularAdversary()
    badv = BudgetedAdversary(inner, k=1)
    rng = np.random.default_rng(17)
    badv.begin_episode()
    # nothing allowed before the first refresh
    assert badv.decide("a", None, (0, 1), "sample", rng) is None
    badv.end_episode(-1.0)
    badv.reinforce_update()
    assert len(badv._allowed) == 1
    applied = {key: badv.decide(key, None, (0, 1), "greedy", rng)
               for key in ("a", "b")}
    assert sum(v is not None for v in applied.values()) <= 1
    with pytest.raises(ValueError):
        BudgetedAdversary(inner, k=-1)


def test_removal_never_empties_fuzz():
    adv = TabularAdversary()
    rng = np.random.default_rng(18)
    for trial in range(2000):
        legal = tuple(sorted(rng.choice(5, size=int(rng.integers(1, 6)),
                                        replace=False).tolist()))
        removed = adv.decide(f"s{trial % 29}", None, legal, "sample", rng)
        retained = tuple(a for a in legal if a != removed)
        assert len(retained) >= 1
    _ = MaskTable
