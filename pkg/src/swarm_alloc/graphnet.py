"""Raw agent observations and the single-layer GraphSAGE embedding.

The agent graph is fully connected, so the neighbor aggregate of agent i
is simply the sum of every other agent's observation. Embeddings are

    z_i = tanh(W x_i + W' sum_{j != i} x_j)

with no bias terms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EMBED_DIM = 6


def obs_dim(m_tasks: int) -> int:
    return 1 + 2 * m_tasks


def build_observation(world, agent_index: int, cost_matrix) -> np.ndarray:
    """Vector [status, normalized costs (M), slot indicators (M)].

    status is +1 while the agent carries a task and -1 otherwise;
    indicators are +1 for waiting slots and -1 for anything else.
    """
    agent = world.agents[agent_index]
    status = 1.0 if agent.busy else -1.0
    indicators = np.where(world.waiting, 1.0, -1.0)
    return np.concatenate(([status], cost_matrix.normalized[agent_index], indicators))


def build_observations(world, cost_matrix) -> np.ndarray:
    """All agents' observations stacked into an (N, 1+2M) array."""
    n = len(world.agents)
    status = np.array([1.0 if a.busy else -1.0 for a in world.agents])
    indicators = np.where(world.waiting, 1.0, -1.0)
    return np.hstack([status[:, None], cost_matrix.normalized,
                      np.broadcast_to(indicators, (n, len(indicators)))])


def neighbor_sums(observations: np.ndarray) -> np.ndarray:
    """Row i holds sum_{j != i} x_j."""
    return observations.sum(axis=0, keepdims=True) - observations


def glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_out, fan_in))


@dataclass
class SageParams:
    W: np.ndarray        # (embed, obs)
    W_prime: np.ndarray  # (embed, obs)

    @classmethod
    def init(cls, rng: np.random.Generator, m_tasks: int, embed_dim: int = EMBED_DIM) -> "SageParams":
        d = obs_dim(m_tasks)
        return cls(W=glorot(rng, embed_dim, d), W_prime=glorot(rng, embed_dim, d))

    @classmethod
    def zeros(cls, m_tasks: int, embed_dim: int = EMBED_DIM) -> "SageParams":
        d = obs_dim(m_tasks)
        return cls(W=np.zeros((embed_dim, d)), W_prime=np.zeros((embed_dim, d)))


@dataclass
class SageCache:
    x_self: np.ndarray
    x_nbr: np.ndarray
    z: np.ndarray


def sage_embed(x_self: np.ndarray, x_nbr: np.ndarray, params: SageParams,
               use_neighbors: bool = True) -> tuple[np.ndarray, SageCache]:
    """Batched embedding from own features and pre-summed neighbor features.

    Rows of ``x_self`` / ``x_nbr`` are samples. With ``use_neighbors=False``
    the aggregate is dropped and only the self projection remains.
    """
    pre = x_self @ params.W.T
    if use_neighbors:
        pre = pre + x_nbr @ params.W_prime.T
    z = np.tanh(pre)
    return z, SageCache(x_self=x_self, x_nbr=x_nbr, z=z)


def sage_embed_backward(dz: np.ndarray, cache: SageCache, params: SageParams,
                        use_neighbors: bool = True):
    """Gradients of ``sage_embed`` w.r.t. (W, W', x_self, x_nbr)."""
    dpre = dz * (1.0 - cache.z ** 2)
    dW = dpre.T @ cache.x_self
    dx_self = dpre @ params.W
    if use_neighbors:
        dWp = dpre.T @ cache.x_nbr
        dx_nbr = dpre @ params.W_prime
    else:
        dWp = np.zeros_like(params.W_prime)
        dx_nbr = np.zeros_like(cache.x_nbr)
    return dW, dWp, dx_self, dx_nbr


def sage_forward(observations: np.ndarray, i: int, params: SageParams) -> np.ndarray:
    """Embedding of agent ``i`` given every agent's observation."""
    x = np.asarray(observations, dtype=float)
    nbr = x.sum(axis=0) - x[i]
    return np.tanh(params.W @ x[i] + params.W_prime @ nbr)


def sage_forward_all(observations: np.ndarray, params: SageParams) -> tuple[np.ndarray, SageCache]:
    """Embeddings of all agents under one shared parameter block."""
    x = np.asarray(observations, dtype=float)
    return sage_embed(x, neighbor_sums(x), params)


def sage_backward(dz: np.ndarray, cache: SageCache, params: SageParams):
    """Reverse pass of ``sage_forward_all``.

    Returns ``(dW, dW_prime, dX)`` where ``dX[k]`` collects agent k's
    contribution as both a self input and a neighbor of every other agent.
    """
    dW, dWp, dx_self, dx_nbr = sage_embed_backward(dz, cache, params)
    # x_k enters every other row's neighbor sum
    dX = dx_self + dx_nbr.sum(axis=0, keepdims=True) - dx_nbr
    return dW, dWp, dX
