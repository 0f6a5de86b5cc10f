"""Tabular victims: Q-learning, preference-table PPO, and NFSP.

All act over the retained action set handed to them, so masked actions
never receive probability mass.  The common agent protocol (used by the
training harness) is:

    begin_episode(seats, rng)         once per episode per agent object
    act(seat, key, feats, retained, rng, eval_mode) -> action
    observe(seat, key, feats, action, reward,
            next_key, next_feats, next_retained, terminal, rng)
    end_episode(seat, episode_return)
    snapshot() -> frozen deep copy

Evaluation mode turns off exploration and learning: Q-learners act by pure
argmax, PPO and NFSP act by their policy's own sampling.
"""

from __future__ import annotations

import copy
import math
from pathlib import Path

__all__ = ["Agent", "QLearner", "TabularPpo", "TabularNfsp"]


class Agent:
    """No-op default implementation of the episode protocol."""

    uses_features = False

    def begin_episode(self, seats, rng):
        pass

    def act(self, seat, key, feats, retained, rng, eval_mode):
        raise NotImplementedError

    def observe(self, seat, key, feats, action, reward, next_key, next_feats,
                next_retained, terminal, rng):
        pass

    def end_episode(self, seat, episode_return):
        pass

    def snapshot(self):
        return copy.deepcopy(self)

    def q_values(self, key, feats=None) -> dict[int, float] | None:
        """Per-action value estimates at a state, when the agent has them."""
        return None


def _argmax(row: dict[int, float] | None, retained) -> int:
    """Largest-value action, smallest action id on ties."""
    if row is None:
        return retained[0]
    best, best_v = retained[0], row.get(retained[0], 0.0)
    for a in retained[1:]:
        v = row.get(a, 0.0)
        if v > best_v:
            best, best_v = a, v
    return best


def _sample(probs, retained, rng) -> int:
    u = rng.random()
    acc = 0.0
    for a, p in zip(retained, probs):
        acc += p
        if u < acc:
            return a
    return retained[-1]


class QLearner(Agent):
    """Epsilon-greedy tabular Q-learning over retained actions."""

    def __init__(self, alpha: float = 0.1, eps: float = 0.15, gamma: float = 1.0):
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if not 0.0 <= eps <= 1.0:
            raise ValueError("eps must be in [0, 1]")
        if not 0.0 < gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        self.alpha = alpha
        self.eps = eps
        self.gamma = gamma
        self.values: dict[str, dict[int, float]] = {}

    def greedy(self, key, retained) -> int:
        return _argmax(self.values.get(key), retained)

    def act(self, seat, key, feats, retained, rng, eval_mode):
        if len(retained) == 1:
            return retained[0]
        if not eval_mode and rng.random() < self.eps:
            return retained[int(rng.integers(len(retained)))]
        return _argmax(self.values.get(key), retained)

    def update(self, key, action, reward, next_key, next_retained, terminal):
        row = self.values.setdefault(key, {})
        q = row.get(action, 0.0)
        if terminal:
            target = reward
        else:
            nxt = self.values.get(next_key)
            bootstrap = max((nxt.get(a, 0.0) for a in next_retained), default=0.0) \
                if nxt else 0.0
            target = reward + self.gamma * bootstrap
        row[action] = q + self.alpha * (target - q)

    def observe(self, seat, key, feats, action, reward, next_key, next_feats,
                next_retained, terminal, rng):
        self.update(key, action, reward, next_key, next_retained, terminal)

    def q_values(self, key, feats=None):
        return self.values.get(key)

    def save(self, path: str | Path) -> None:
        lines = ["# key\taction\tvalue"]
        for key in sorted(self.values):
            for a in sorted(self.values[key]):
                lines.append(f"{key}\t{a}\t{self.values[key][a]!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    def load(self, path: str | Path) -> None:
        self.values.clear()
        for line in Path(path).read_text().splitlines():
            if not line or line.startswith("#"):
                continue
            key, action, value = line.split("\t")
            self.values.setdefault(key, {})[int(action)] = float(value)


class TabularPpo(Agent):
    """Softmax policy over a preference table with a clipped update.

    One update per finished trajectory: per step the probability ratio
    against the behaviour policy is clipped, advantages are the episode
    return minus a running-mean baseline, and an entropy bonus keeps the
    policy stochastic.
    """

    def __init__(self, lr: float = 0.01, clip_eps: float = 0.2,
                 entropy_coef: float = 0.01):
        self.lr = lr
        self.clip_eps = clip_eps
        self.entropy_coef = entropy_coef
        self.theta: dict[str, dict[int, float]] = {}
        self.baseline_mean = 0.0
        self.baseline_n = 0
        self._traj: dict[int, list] = {0: [], 1: []}

    def policy(self, key, retained) -> list[float]:
        row = self.theta.get(key)
        prefs = [row.get(a, 0.0) if row else 0.0 for a in retained]
        m = max(prefs)
        exps = [math.exp(v - m) for v in prefs]
        z = sum(exps)
        return [e / z for e in exps]

    def act(self, seat, key, feats, retained, rng, eval_mode):
        probs = self.policy(key, retained)
        a = _sample(probs, retained, rng)
        if not eval_mode:
            pi_old = probs[retained.index(a)]
            self._traj[seat].append((key, a, retained, pi_old))
        return a

    def end_episode(self, seat, episode_return):
        traj = self._traj[seat]
        if not traj:
            return
        advantage = episode_return - self.baseline_mean
        for key, action, retained, pi_old in traj:
            self._step_update(key, action, retained, pi_old, advantage)
        self._traj[seat] = []
        self.baseline_n += 1
        self.baseline_mean += (episode_return - self.baseline_mean) / self.baseline_n

    def _step_update(self, key, action, retained, pi_old, advantage):
        probs = self.policy(key, retained)
        idx = retained.index(action)
        ratio = probs[idx] / pi_old
        clipped_out = (advantage >= 0 and ratio > 1 + self.clip_eps) or \
                      (advantage < 0 and ratio < 1 - self.clip_eps)
        entropy = -sum(p * math.log(p) for p in probs if p > 0)
        row = self.theta.setdefault(key, {})
        for j, a in enumerate(retained):
            g = 0.0
            if not clipped_out:
                indicator = 1.0 if j == idx else 0.0
                g += advantage * ratio * (indicator - probs[j])
            if probs[j] > 0:
                g -= self.entropy_coef * probs[j] * (math.log(probs[j]) + entropy)
            row[a] = row.get(a, 0.0) + self.lr * g


class TabularNfsp(Agent):
    """Best-response Q-learning mixed with a count-based average strategy.

    Each episode each seat plays the epsilon-greedy best response with
    probability eta (recording its actions into the average-strategy
    counts) and otherwise samples the average strategy restricted to the
    retained actions.  Evaluation always uses the average strategy.
    """

    def __init__(self, eta: float = 0.1, alpha: float = 0.1, eps: float = 0.15,
                 gamma: float = 1.0):
        if not 0.0 <= eta <= 1.0:
            raise ValueError("eta must be in [0, 1]")
        self.eta = eta
        self.br = QLearner(alpha=alpha, eps=eps, gamma=gamma)
        self.counts: dict[str, dict[int, int]] = {}
        self._mode: dict[int, str] = {}

    def begin_episode(self, seats, rng):
        for seat in seats:
            self._mode[seat] = "br" if rng.random() < self.eta else "avg"

    def average_policy(self, key, retained) -> list[float]:
        row = self.counts.get(key)
        if row:
            weights = [row.get(a, 0) for a in retained]
            total = sum(weights)
            if total > 0:
                return [w / total for w in weights]
        return [1.0 / len(retained)] * len(retained)

    def act(self, seat, key, feats, retained, rng, eval_mode):
        if not eval_mode and self._mode.get(seat) == "br":
            a = self.br.act(seat, key, feats, retained, rng, eval_mode=False)
            row = self.counts.setdefault(key, {})
            row[a] = row.get(a, 0) + 1
            return a
        return _sample(self.average_policy(key, retained), retained, rng)

    def observe(self, seat, key, feats, action, reward, next_key, next_feats,
                next_retained, terminal, rng):
        self.br.update(key, action, reward, next_key, next_retained, terminal)

    def q_values(self, key, feats=None):
        return self.br.values.get(key)
