"""Mask-aware neural victims: DQN and neural fictitious self-play.

The DQN computes Q-values for every action but restricts both argmax and
exploration to the retained subset; TD targets take their max over the
retained set stored with each transition, so bootstrapping honours the
mask that was active when the transition happened.
"""

from __future__ import annotations

import numpy as np

from .nets import Adam, Mlp, softmax
from .tabular import Agent

__all__ = ["ReplayBuffer", "ReservoirBuffer", "DqnAgent", "NeuralNfspAgent"]


class ReplayBuffer:
    """Uniform-sampling ring buffer of transitions."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: list = []
        self.pos = 0

    def __len__(self):
        return len(self.items)

    def push(self, item) -> None:
        if len(self.items) < self.capacity:
            self.items.append(item)
        else:
            self.items[self.pos] = item
        self.pos = (self.pos + 1) % self.capacity

    def sample(self, batch: int, rng: np.random.Generator) -> list:
        idx = rng.integers(0, len(self.items), size=batch)
        return [self.items[i] for i in idx]


class ReservoirBuffer:
    """Fixed-capacity uniform reservoir over an unbounded stream."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: list = []
        self.seen = 0

    def __len__(self):
        return len(self.items)

    def insert(self, item, rng: np.random.Generator) -> None:
        self.seen += 1
        if len(self.items) < self.capacity:
            self.items.append(item)
            return
        j = int(rng.integers(0, self.seen))
        if j < self.capacity:
            self.items[j] = item

    def sample(self, batch: int, rng: np.random.Generator) -> list:
        idx = rng.integers(0, len(self.items), size=batch)
        return [self.items[i] for i in idx]


class DqnAgent(Agent):
    """DQN with replay and a periodically synced target network.

    The epsilon schedule decays multiplicatively per episode from 1.0 to a
    floor; the target network is refreshed every ``sync_every`` episodes.
    One training step runs per stored transition once the buffer holds a
    full batch.
    """

    uses_features = True

    def __init__(self, feature_dim: int, n_actions: int, hidden=(64, 64),
                 lr: float = 1e-3, buffer_capacity: int = 20_000, batch: int = 64,
                 sync_every: int = 500, eps_start: float = 1.0, eps_min: float = 0.05,
                 eps_decay: float = 0.9999, gamma: float = 1.0,
                 rng: np.random.Generator | None = None):
        dims = (feature_dim, *hidden, n_actions)
        self.n_actions = n_actions
        self.online = Mlp(dims, head="linear", rng=rng)
        self.target = self.online.copy()
        self.opt = Adam(self.online, lr=lr)
        self.buffer = ReplayBuffer(buffer_capacity)
        self.batch = batch
        self.sync_every = sync_every
        self.eps_start = eps_start
        self.eps_min = eps_min
        self.eps_decay = eps_decay
        self.gamma = gamma
        self.episodes = 0
        self.train_steps = 0

    @property
    def epsilon(self) -> float:
        return max(self.eps_min, self.eps_start * self.eps_decay ** self.episodes)

    def begin_episode(self, seats, rng):
        self.episodes += 1
        if self.episodes % self.sync_every == 0:
            self.target.copy_weights_from(self.online)

    def greedy(self, feats, retained) -> int:
        q = self.online.forward(feats)
        best = retained[0]
        best_q = q[best]
        for a in retained[1:]:
            if q[a] > best_q:
                best, best_q = a, q[a]
        return best

    def act(self, seat, key, feats, retained, rng, eval_mode):
        if len(retained) == 1:
            return retained[0]
        if not eval_mode and rng.random() < self.epsilon:
            return retained[int(rng.integers(len(retained)))]
        return self.greedy(feats, retained)

    def observe(self, seat, key, feats, action, reward, next_key, next_feats,
                next_retained, terminal, rng):
        self.buffer.push((feats, action, reward, next_feats, next_retained, terminal))
        if len(self.buffer) >= self.batch:
            self.train_step(rng)

    def train_step(self, rng) -> float:
        """One squared-error TD step on a uniform minibatch; returns the loss."""
        if len(self.buffer) < self.batch:
            return 0.0
        batch = self.buffer.sample(self.batch, rng)
        xs = np.stack([t[0] for t in batch])
        actions = np.array([t[1] for t in batch])
        rewards = np.array([t[2] for t in batch], dtype=float)
        terminal = np.array([t[5] for t in batch])

        targets = rewards.copy()
        live = [i for i, t in enumerate(batch) if not t[5]]
        if live:
            nxt = np.stack([batch[i][3] for i in live])
            q_next = self.target.forward(nxt)
            mask = np.full_like(q_next, -np.inf)
            for row, i in enumerate(live):
                for a in batch[i][4]:
                    mask[row, a] = 0.0
            best = np.max(q_next + mask, axis=1)
            for row, i in enumerate(live):
                targets[i] += self.gamma * best[row]

        preds = self.online.forward(xs)
        taken = preds[np.arange(self.batch), actions]
        err = taken - targets
        loss = float(np.mean(err ** 2))
        upstream = np.zeros_like(preds)
        upstream[np.arange(self.batch), actions] = 2.0 * err / self.batch
        grads_w, grads_b = self.online.backward(upstream)
        self.opt.step(self.online, grads_w, grads_b)
        self.train_steps += 1
        _ = terminal
        return loss

    def q_values(self, key, feats=None):
        if feats is None:
            return None
        q = self.online.forward(feats)
        return {a: float(q[a]) for a in range(self.n_actions)}


class NeuralNfspAgent(Agent):
    """DQN best response plus a reservoir-trained average policy network.

    Each episode each seat is in best-response mode with probability eta;
    best-response actions feed the reservoir, and the average-policy
    network trains by cross-entropy on reservoir minibatches (one step per
    episode).  Evaluation samples the average policy restricted to the
    retained actions.
    """

    uses_features = True

    def __init__(self, feature_dim: int, n_actions: int, eta: float = 0.1,
                 br_hidden=(128, 64), avg_hidden=(128, 64), lr: float = 1e-3,
                 buffer_capacity: int = 20_000, reservoir_capacity: int = 50_000,
                 batch: int = 64, sync_every: int = 500,
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.eta = eta
        self.n_actions = n_actions
        self.br = DqnAgent(feature_dim, n_actions, hidden=br_hidden, lr=lr,
                           buffer_capacity=buffer_capacity, batch=batch,
                           sync_every=sync_every, rng=rng)
        self.avg = Mlp((feature_dim, *avg_hidden, n_actions), head="softmax", rng=rng)
        self.avg_opt = Adam(self.avg, lr=lr)
        self.reservoir = ReservoirBuffer(reservoir_capacity)
        self.batch = batch
        self._mode: dict[int, str] = {}

    def begin_episode(self, seats, rng):
        self.br.begin_episode(seats, rng)
        for seat in seats:
            self._mode[seat] = "br" if rng.random() < self.eta else "avg"
        if len(self.reservoir) >= self.batch:
            self._avg_train_step(rng)

    def average_policy(self, feats, retained) -> np.ndarray:
        probs = self.avg.forward(feats)
        restricted = np.array([probs[a] for a in retained])
        total = restricted.sum()
        if total <= 0.0:
            return np.full(len(retained), 1.0 / len(retained))
        return restricted / total

    def _sample_avg(self, feats, retained, rng) -> int:
        probs = self.average_policy(feats, retained)
        return retained[int(rng.choice(len(retained), p=probs))]

    def act(self, seat, key, feats, retained, rng, eval_mode):
        if eval_mode:
            if len(retained) == 1:
                return retained[0]
            return self._sample_avg(feats, retained, rng)
        if self._mode.get(seat) == "br":
            a = self.br.act(seat, key, feats, retained, rng, eval_mode=False)
            self.reservoir.insert((feats, a), rng)
            return a
        if len(retained) == 1:
            return retained[0]
        return self._sample_avg(feats, retained, rng)

    def observe(self, seat, key, feats, action, reward, next_key, next_feats,
                next_retained, terminal, rng):
        self.br.observe(seat, key, feats, action, reward, next_key, next_feats,
                        next_retained, terminal, rng)

    def _avg_train_step(self, rng) -> None:
        batch = self.reservoir.sample(self.batch, rng)
        xs = np.stack([b[0] for b in batch])
        actions = np.array([b[1] for b in batch])
        probs = self.avg.forward(xs)
        upstream = probs.copy()
        upstream[np.arange(len(batch)), actions] -= 1.0
        upstream /= len(batch)
        grads_w, grads_b = self.avg.backward(upstream)
        self.avg_opt.step(self.avg, grads_w, grads_b)

    def q_values(self, key, feats=None):
        return self.br.q_values(key, feats)
