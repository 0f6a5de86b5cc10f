"""Learned adversaries that pick per-state action removals.

Both variants train by REINFORCE on the score function of their sampled
decisions with reward equal to the negated victim return: the tabular
preference table uses plain REINFORCE, the network adversary subtracts a
running mean-reward baseline.  Training samples removals for exploration;
evaluation removes the argmax-probability choice.  A removal that would
empty the legal set is skipped entirely (and not logged).

The perturbation baseline shares the same machinery but acts after the
victim: it swaps the chosen action for another legal action (or no-op).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .masking import MaskTable
from .nets import Adam, Mlp

__all__ = [
    "AdversaryEpisodeLog", "TabularAdversary", "NeuralAdversary",
    "PerturbationAdversary", "BudgetedAdversary", "leduc_public_key",
]


@dataclass
class AdversaryEpisodeLog:
    """Sampled decisions of one episode plus the victim's return."""

    decisions: list = field(default_factory=list)
    victim_return: float = 0.0


def leduc_public_key(key: str) -> str:
    """Strip the private rank, keeping betting history and public card."""
    return "?:" + key.split(":", 1)[1]


def _softmax_list(prefs: list[float]) -> list[float]:
    m = max(prefs)
    exps = [math.exp(v - m) for v in prefs]
    z = sum(exps)
    return [e / z for e in exps]


def _pick(probs: list[float], mode: str, rng) -> int:
    if mode == "greedy":
        best, best_p = 0, probs[0]
        for i in range(1, len(probs)):
            if probs[i] > best_p:
                best, best_p = i, probs[i]
        return best
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


class _ScoreTable:
    """Preference table with REINFORCE updates over per-key choice sets."""

    def __init__(self, lr: float):
        self.lr = lr
        self.prefs: dict[str, list[float]] = {}
        self.choices: dict[str, tuple] = {}
        self._pending: list = []
        self._batch: list[AdversaryEpisodeLog] = []

    def _ensure(self, key: str, choices: tuple) -> None:
        if key not in self.prefs:
            self.prefs[key] = [0.0] * len(choices)
            self.choices[key] = choices

    def probs(self, key: str) -> list[float]:
        return _softmax_list(self.prefs[key])

    def begin_episode(self) -> None:
        self._pending = []

    def end_episode(self, victim_return: float) -> None:
        if self._pending:
            self._batch.append(AdversaryEpisodeLog(self._pending, victim_return))
        self._pending = []

    def pending_batch(self) -> list[AdversaryEpisodeLog]:
        return self._batch

    def reinforce_update(self) -> None:
        """One summed REINFORCE step over every episode logged since the last."""
        if not self._batch:
            raise ValueError("no episodes logged since the last update")
        grads: dict[str, list[float]] = {}
        cache: dict[str, list[float]] = {}
        for log in self._batch:
            reward = -log.victim_return
            for key, idx in log.decisions:
                p = cache.get(key)
                if p is None:
                    p = cache[key] = self.probs(key)
                g = grads.setdefault(key, [0.0] * len(p))
                for j in range(len(p)):
                    g[j] += reward * ((1.0 if j == idx else 0.0) - p[j])
        for key, g in grads.items():
            prefs = self.prefs[key]
            for j in range(len(g)):
                prefs[j] += self.lr * g[j]
        self._batch = []


class TabularAdversary:
    """Per-state removal preferences trained by REINFORCE (no baseline).

    ``key_fn`` lets the adversary observe a coarser key than the victim's
    (e.g. public information only).
    """

    uses_features = False

    def __init__(self, lr: float = 0.01, key_fn=None):
        self.table = _ScoreTable(lr)
        self.key_fn = key_fn

    def begin_episode(self):
        self.table.begin_episode()

    def end_episode(self, victim_return: float):
        self.table.end_episode(victim_return)

    def decide(self, key, features, legal, mode, rng):
        """Removal choice at a victim decision point, or None for no removal."""
        if len(legal) <= 1:
            return None
        if self.key_fn is not None:
            key = self.key_fn(key)
        self.table._ensure(key, tuple(legal))
        probs = self.table.probs(key)
        idx = _pick(probs, mode, rng)
        if mode == "sample":
            self.table._pending.append((key, idx))
        return self.table.choices[key][idx]

    def reinforce_update(self):
        self.table.reinforce_update()

    def confidence(self, key) -> float:
        if self.key_fn is not None:
            key = self.key_fn(key)
        if key not in self.table.prefs:
            return 0.0
        probs = self.table.probs(key)
        return max(probs) - 1.0 / len(probs)

    def known_keys(self) -> list[str]:
        return sorted(self.table.prefs)

    def greedy_removal(self, key) -> int:
        if self.key_fn is not None:
            key = self.key_fn(key)
        probs = self.table.probs(key)
        return self.table.choices[key][_pick(probs, "greedy", None)]

    def project_top_k(self, k: int, keys=None) -> MaskTable:
        """Mask only the k highest-confidence states (greedy removals there).

        ``keys`` optionally supplies victim keys to project onto (needed when
        the adversary observes a coarser key space); defaults to every state
        the adversary has seen.
        """
        if k < 0:
            raise ValueError("k must be non-negative")
        candidates = list(keys) if keys is not None else self.known_keys()
        ranked = sorted(candidates, key=lambda key: (-self.confidence(key), key))
        removed, conf = {}, {}
        for key in ranked[:k]:
            adv_key = self.key_fn(key) if self.key_fn is not None else key
            if adv_key not in self.table.prefs:
                continue
            removed[key] = self.greedy_removal(key)
            conf[key] = self.confidence(key)
        return MaskTable(removed=removed, budget=k, confidence=conf)


class PerturbationAdversary:
    """Post-hoc action replacement with the same REINFORCE training.

    Choices at each state are every legal action plus a no-op that lets the
    victim's own pick stand.  Like standard action-perturbation attackers,
    interception is budgeted: each decision is intercepted only with
    probability ``attack_rate`` (1.0 intercepts everything).  Replacements
    stay within the legal set, so the victim keeps its full action space.
    """

    uses_features = False

    def __init__(self, lr: float = 0.01, attack_rate: float = 0.2):
        if not 0.0 <= attack_rate <= 1.0:
            raise ValueError("attack_rate must lie in [0, 1]")
        self.table = _ScoreTable(lr)
        self.attack_rate = attack_rate

    def begin_episode(self):
        self.table.begin_episode()

    def end_episode(self, victim_return: float):
        self.table.end_episode(victim_return)

    def perturb(self, key, chosen, legal, mode, rng) -> int:
        """Executed action after (possibly) replacing the victim's choice."""
        if chosen not in legal:
            raise ValueError("chosen action must be legal")
        if self.attack_rate < 1.0 and rng.random() >= self.attack_rate:
            return chosen
        choices = tuple(legal) + ("noop",)
        self.table._ensure(key, choices)
        probs = self.table.probs(key)
        idx = _pick(probs, mode, rng)
        if mode == "sample":
            self.table._pending.append((key, idx))
        picked = choices[idx]
        return chosen if picked == "noop" else picked

    def reinforce_update(self):
        self.table.reinforce_update()


class BudgetedAdversary:
    """Hard support budget wrapped around a learned adversary.

    The inner adversary trains over every state (its sampled decisions are
    logged and updated everywhere), but removals only take effect at the
    current top-k states by confidence, re-projected after every update.
    """

    def __init__(self, inner, k: int):
        if k < 0:
            raise ValueError("k must be non-negative")
        self.inner = inner
        self.k = k
        self._allowed: set[str] = set()

    @property
    def uses_features(self):
        return self.inner.uses_features

    def _refresh(self):
        keys = self.inner.known_keys()
        ranked = sorted(keys, key=lambda key: (-self.inner.confidence(key), key))
        self._allowed = set(ranked[:self.k])

    def begin_episode(self):
        self.inner.begin_episode()

    def end_episode(self, victim_return: float):
        self.inner.end_episode(victim_return)

    def decide(self, key, features, legal, mode, rng):
        removal = self.inner.decide(key, features, legal, mode, rng)
        if key not in self._allowed:
            return None
        return removal

    def reinforce_update(self):
        self.inner.reinforce_update()
        self._refresh()

    def confidence(self, key) -> float:
        return self.inner.confidence(key)

    def known_keys(self) -> list[str]:
        return self.inner.known_keys()

    def greedy_removal(self, key):
        return self.inner.greedy_removal(key)

    def project_top_k(self, k: int, keys=None) -> MaskTable:
        return self.inner.project_top_k(k, keys=keys)


class NeuralAdversary:
    """Network policy over removal choices plus an explicit no-removal head.

    Output is a simplex of size ``n_actions + 1``; entries for illegal
    removals are masked out and the rest renormalised.  REINFORCE with a
    running mean-reward baseline, optimised by Adam.
    """

    uses_features = True

    def __init__(self, feature_dim: int, n_actions: int, hidden=(32,),
                 lr: float = 1e-3, rng: np.random.Generator | None = None):
        self.n_actions = n_actions
        self.noop = n_actions
        self.net = Mlp((feature_dim, *hidden, n_actions + 1), head="softmax", rng=rng)
        self.opt = Adam(self.net, lr=lr)
        self.baseline_mean = 0.0
        self.baseline_n = 0
        self.seen: dict[str, tuple] = {}      # victim key -> (features, legal)
        self._pending: list = []
        self._batch: list[AdversaryEpisodeLog] = []

    def begin_episode(self):
        self._pending = []

    def end_episode(self, victim_return: float):
        if self._pending:
            self._batch.append(AdversaryEpisodeLog(self._pending, victim_return))
        self._pending = []

    def _restricted(self, probs: np.ndarray, legal) -> tuple[list[int], np.ndarray]:
        valid = list(legal) + [self.noop]
        p = np.array([probs[i] for i in valid])
        total = p.sum()
        if total <= 0.0:
            p = np.full(len(valid), 1.0 / len(valid))
        else:
            p = p / total
        return valid, p

    def decide(self, key, features, legal, mode, rng):
        if len(legal) <= 1:
            return None
        if features is None:
            raise ValueError("neural adversary needs state features")
        if key not in self.seen:
            self.seen[key] = (features, tuple(legal))
        probs = self.net.forward(features)
        valid, p = self._restricted(probs, legal)
        idx = _pick(list(p), mode, rng)
        if mode == "sample":
            self._pending.append((features, valid[idx], tuple(valid)))
        choice = valid[idx]
        return None if choice == self.noop else choice

    def reinforce_update(self):
        if not self._batch:
            raise ValueError("no episodes logged since the last update")
        feats, choices, valids, advs = [], [], [], []
        baseline = self.baseline_mean if self.baseline_n else 0.0
        for log in self._batch:
            reward = -log.victim_return
            for f, choice, valid in log.decisions:
                feats.append(f)
                choices.append(choice)
                valids.append(valid)
                advs.append(reward - baseline)
        xs = np.stack(feats)
        probs = self.net.forward(xs)
        upstream = np.zeros_like(probs)
        for i, (choice, valid, adv) in enumerate(zip(choices, valids, advs)):
            row = probs[i]
            p = np.array([row[j] for j in valid])
            p = p / p.sum()
            for slot, j in enumerate(valid):
                indicator = 1.0 if j == choice else 0.0
                upstream[i, j] = adv * (p[slot] - indicator)
        grads_w, grads_b = self.net.backward(upstream)
        self.opt.step(self.net, grads_w, grads_b)
        for log in self._batch:
            self.baseline_n += 1
            self.baseline_mean += ((-log.victim_return) - self.baseline_mean) / self.baseline_n
        self._batch = []

    def confidence(self, key) -> float:
        if key not in self.seen:
            return 0.0
        features, legal = self.seen[key]
        probs = self.net.forward(features)
        valid, p = self._restricted(probs, legal)
        best = max(p[i] for i in range(len(legal)))
        return max(0.0, float(best) - 1.0 / len(legal))

    def greedy_removal(self, key) -> int | None:
        features, legal = self.seen[key]
        probs = self.net.forward(features)
        best, best_p = None, -1.0
        for a in legal:
            if probs[a] > best_p:
                best, best_p = a, probs[a]
        return best

    def known_keys(self) -> list[str]:
        return sorted(self.seen)

    def project_top_k(self, k: int, keys=None) -> MaskTable:
        if k < 0:
            raise ValueError("k must be non-negative")
        candidates = list(keys) if keys is not None else self.known_keys()
        candidates = [key for key in candidates if key in self.seen]
        ranked = sorted(candidates, key=lambda key: (-self.confidence(key), key))
        removed, conf = {}, {}
        for key in ranked[:k]:
            removed[key] = self.greedy_removal(key)
            conf[key] = self.confidence(key)
        return MaskTable(removed=removed, budget=k, confidence=conf)
