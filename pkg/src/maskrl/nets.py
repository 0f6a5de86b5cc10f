"""Minimal dense feed-forward network with analytic gradients and Adam.

Hidden layers are rectified; the output head is either linear (value
heads) or softmax (policy heads).  The backward pass consumes the
gradient with respect to the network's raw output: for softmax heads
that is the gradient at the logits, which is what cross-entropy and
score-function losses produce directly.
"""

from __future__ import annotations

import copy
import logging
import struct
from pathlib import Path

import numpy as np

__all__ = ["Mlp", "Adam", "softmax"]

log = logging.getLogger(__name__)

_MAGIC = b"MLPW"
_HEADS = ("linear", "softmax")


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax, numerically stable."""
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


class Mlp:
    """Fully connected network: dims like (37, 64, 64, 3)."""

    def __init__(self, dims, head: str = "linear", rng: np.random.Generator | None = None):
        if len(dims) < 2:
            raise ValueError("need at least input and output dims")
        if head not in _HEADS:
            raise ValueError(f"head must be one of {_HEADS}")
        self.dims = tuple(int(d) for d in dims)
        self.head = head
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        rng = rng or np.random.default_rng(0)
        for fan_in, fan_out in zip(self.dims, self.dims[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self._cache = None

    # -- forward/backward ----------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Network output for a single input (d,) or a batch (B, d).

        Softmax heads return probabilities; ``backward`` still expects the
        gradient at the logits.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        h = x.reshape(1, -1) if single else x
        if h.shape[1] != self.dims[0]:
            raise ValueError(f"input dim {h.shape[1]} != {self.dims[0]}")
        acts = [h]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < len(self.weights) - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        self._cache = acts
        out = softmax(h) if self.head == "softmax" else h
        return out[0] if single else out

    def backward(self, grad_out: np.ndarray):
        """Parameter gradients given d(loss)/d(raw output), summed over the batch.

        Requires a cached forward pass on the matching input.
        """
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        acts = self._cache
        g = np.asarray(grad_out, dtype=float)
        if g.ndim == 1:
            g = g.reshape(1, -1)
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            grads_w[i] = acts[i].T @ g
            grads_b[i] = g.sum(axis=0)
            if i > 0:
                g = (g @ self.weights[i].T) * (acts[i] > 0.0)
        return grads_w, grads_b

    # -- parameter plumbing ----------------------------------------------------

    def copy(self) -> "Mlp":
        return copy.deepcopy(self)

    def copy_weights_from(self, other: "Mlp") -> None:
        for w, b, ow, ob in zip(self.weights, self.biases, other.weights, other.biases):
            w[...] = ow
            b[...] = ob

    def save(self, path: str | Path) -> None:
        """Flat binary snapshot: dims header + row-major float64 parameters."""
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<BB", _HEADS.index(self.head), len(self.dims)))
            fh.write(struct.pack(f"<{len(self.dims)}i", *self.dims))
            for w, b in zip(self.weights, self.biases):
                fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
                fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "Mlp":
        with open(path, "rb") as fh:
            if fh.read(4) != _MAGIC:
                raise ValueError("not a network snapshot file")
            head_idx, n_dims = struct.unpack("<BB", fh.read(2))
            dims = struct.unpack(f"<{n_dims}i", fh.read(4 * n_dims))
            net = cls(dims, head=_HEADS[head_idx])
            for i, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
                w = np.frombuffer(fh.read(8 * fan_in * fan_out), dtype="<f8")
                net.weights[i] = w.reshape(fan_in, fan_out).copy()
                net.biases[i] = np.frombuffer(fh.read(8 * fan_out), dtype="<f8").copy()
        return net


class Adam:
    """Bias-corrected Adam over an Mlp's parameters."""

    def __init__(self, net: Mlp, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in net.weights]
        self.v_w = [np.zeros_like(w) for w in net.weights]
        self.m_b = [np.zeros_like(b) for b in net.biases]
        self.v_b = [np.zeros_like(b) for b in net.biases]

    def step(self, net: Mlp, grads_w, grads_b) -> bool:
        """Apply one update; returns False (and changes nothing) on non-finite grads."""
        for g in grads_w + grads_b:
            if not np.all(np.isfinite(g)):
                log.warning("rejected optimiser step: non-finite gradient")
                return False
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for params, grads, ms, vs in (
            (net.weights, grads_w, self.m_w, self.v_w),
            (net.biases, grads_b, self.m_b, self.v_b),
        ):
            for p, g, m, v in zip(params, grads, ms, vs):
                m *= self.beta1
                m += (1 - self.beta1) * g
                v *= self.beta2
                v += (1 - self.beta2) * (g * g)
                p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return True
