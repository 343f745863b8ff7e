"""Per-agent policy and value MLPs with hand-written reverse passes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HIDDEN = 128


@dataclass
class Mlp:
    """Fully connected ReLU network; ``weights[k]`` has shape (in, out)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, rng: np.random.Generator, sizes, out_scale: float = 1.0) -> "Mlp":
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            a = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-a, a, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        weights[-1] *= out_scale
        return cls(weights, biases)

    @classmethod
    def zeros(cls, sizes) -> "Mlp":
        return cls([np.zeros((i, o)) for i, o in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(o) for o in sizes[1:]])


@dataclass
class MlpParams:
    policy: Mlp
    value: Mlp

    @classmethod
    def init(cls, rng: np.random.Generator, in_dim: int, n_actions: int,
             hidden: int = HIDDEN) -> "MlpParams":
        return cls(policy=Mlp.init(rng, [in_dim, hidden, hidden, n_actions], out_scale=0.01),
                   value=Mlp.init(rng, [in_dim, hidden, hidden, 1]))

    @classmethod
    def zeros(cls, in_dim: int, n_actions: int, hidden: int = HIDDEN) -> "MlpParams":
        return cls(policy=Mlp.zeros([in_dim, hidden, hidden, n_actions]),
                   value=Mlp.zeros([in_dim, hidden, hidden, 1]))


def mlp_forward(net: Mlp, x: np.ndarray):
    """Returns the linear output and the list of layer inputs for backprop."""
    acts = [x]
    h = x
    last = len(net.weights) - 1
    for k, (W, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ W + b
        if k < last:
            h = np.maximum(h, 0.0)
            acts.append(h)
    return h, acts


def mlp_backward(net: Mlp, acts, dout: np.ndarray):
    """Gradients for every weight and bias plus the input gradient."""
    dWs = [None] * len(net.weights)
    dbs = [None] * len(net.biases)
    g = dout
    for k in range(len(net.weights) - 1, -1, -1):
        a = acts[k]
        dWs[k] = a.T @ g if a.ndim == 2 else np.outer(a, g)
        dbs[k] = g.sum(axis=0) if g.ndim == 2 else g.copy()
        g = g @ net.weights[k].T
        if k > 0:
            g = g * (acts[k] > 0)
    return dWs, dbs, g


@dataclass
class ActionDistribution:
    probs: np.ndarray
    logits: np.ndarray

    @property
    def log_probs(self) -> np.ndarray:
        return log_softmax(self.logits)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def policy_forward(z: np.ndarray, params: MlpParams) -> ActionDistribution:
    logits, _ = mlp_forward(params.policy, z)
    return ActionDistribution(probs=softmax(logits), logits=logits)


def value_forward(z: np.ndarray, params: MlpParams):
    out, _ = mlp_forward(params.value, z)
    out = out[..., 0]
    return float(out) if np.ndim(out) == 0 else out


def sample_action(dist: ActionDistribution, rng: np.random.Generator) -> tuple[int, float]:
    """Inverse-CDF draw; returns the action and its log-probability."""
    cdf = np.cumsum(dist.probs)
    a = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    a = min(a, len(cdf) - 1)
    return a, float(dist.log_probs[a])


def dist_entropy(dist: ActionDistribution):
    """Shannon entropy in nats; 0 * log 0 counts as 0."""
    p = dist.probs
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    h = -terms.sum(axis=-1)
    return float(h) if np.ndim(h) == 0 else h


def log_prob_grad(dist: ActionDistribution, action: int) -> np.ndarray:
    """d log p[action] / d logits."""
    g = -dist.probs.copy()
    g[..., action] += 1.0
    return g


def entropy_grad(logits: np.ndarray) -> np.ndarray:
    """d H / d logits = -p (log p + H), rowwise."""
    logp = log_softmax(logits)
    p = np.exp(logp)
    h = -(p * logp).sum(axis=-1, keepdims=True)
    return -p * (logp + h)


def policy_backward(acts, dlogits: np.ndarray, params: MlpParams):
    """Gradients of the policy MLP from an upstream gradient on the logits."""
    return mlp_backward(params.policy, acts, dlogits)


def value_backward(acts, dvalue: np.ndarray, params: MlpParams):
    """Gradients of the value MLP from an upstream gradient on its scalar output."""
    return mlp_backward(params.value, acts, dvalue[..., None])
