"""Independent PPO: every agent trains its own embedding, policy and value
networks from its own trajectories only.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path as FilePath

import numpy as np

from .graphnet import (
    EMBED_DIM, SageParams, build_observations, neighbor_sums, obs_dim,
    sage_embed, sage_embed_backward,
)
from .pathing import build_cost_matrix
from .policy import (
    HIDDEN, ActionDistribution, Mlp, MlpParams, dist_entropy, entropy_grad,
    log_softmax, mlp_backward, mlp_forward, sample_action, softmax,
)
from .rewards import compute_rewards  # noqa: F401  (re-exported)
from .world import ConfigError, ScenarioConfig, init_world, step

CHECKPOINT_VERSION = 1
EMBEDDING = "embedding"
CONCAT = "concat"


@dataclass
class TrainConfig:
    lr: float = 1e-5
    gamma: float = 0.99
    gae_lambda: float = 0.95
    entropy_coef: float = 0.05
    sgd_iters: int = 10
    batch_size: int = 1000
    fragment_len: int = 100
    minibatch_size: int = 128
    clip_epsilon: float = 0.2
    value_coef: float = 0.5
    normalize_advantages: bool = True
    lambda_conflict: float = 1.0
    mu_idle: float = 0.5
    eta_bonus: float = 0.5
    bonus_threshold: float = -0.5
    use_graphsage: bool = True
    policy_input: str = EMBEDDING
    hidden: int = HIDDEN
    embed_dim: int = EMBED_DIM

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must satisfy 0 < gamma <= 1")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigError("gae_lambda must lie in [0, 1]")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.clip_epsilon <= 0:
            raise ConfigError("clip_epsilon must be positive")
        for name in ("sgd_iters", "batch_size", "fragment_len", "minibatch_size",
                     "hidden", "embed_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.policy_input not in (EMBEDDING, CONCAT):
            raise ConfigError("policy_input must be 'embedding' or 'concat'")

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown train config field: {sorted(unknown)[0]}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- model


@dataclass
class AgentModel:
    sage: SageParams
    nets: MlpParams
    use_graphsage: bool = True
    policy_input: str = EMBEDDING

    def arrays(self) -> dict[str, np.ndarray]:
        """Every learnable array by name; the arrays are the live parameters."""
        out = {"sage.W": self.sage.W, "sage.W_prime": self.sage.W_prime}
        for tag, net in (("pi", self.nets.policy), ("v", self.nets.value)):
            for k, (W, b) in enumerate(zip(net.weights, net.biases)):
                out[f"{tag}.W{k}"] = W
                out[f"{tag}.b{k}"] = b
        return out

    def features(self, x_self, x_nbr):
        z, cache = sage_embed(x_self, x_nbr, self.sage, self.use_graphsage)
        inp = np.concatenate([x_self, z], axis=-1) if self.policy_input == CONCAT else z
        return inp, cache

    def dist(self, x_self, x_nbr) -> ActionDistribution:
        inp, _ = self.features(x_self, x_nbr)
        logits, _ = mlp_forward(self.nets.policy, inp)
        return ActionDistribution(probs=softmax(logits), logits=logits)

    def act(self, x_self, x_nbr):
        """Action distribution and value estimate for one observation."""
        inp, _ = self.features(x_self, x_nbr)
        logits, _ = mlp_forward(self.nets.policy, inp)
        value, _ = mlp_forward(self.nets.value, inp)
        return ActionDistribution(probs=softmax(logits), logits=logits), float(value[0])

    def value(self, x_self, x_nbr) -> float:
        inp, _ = self.features(x_self, x_nbr)
        v, _ = mlp_forward(self.nets.value, inp)
        return float(v[..., 0])


@dataclass
class Model:
    agents: list[AgentModel]
    n_agents: int
    m_tasks: int
    embed_dim: int = EMBED_DIM
    hidden: int = HIDDEN
    use_graphsage: bool = True
    policy_input: str = EMBEDDING


def init_model(n_agents: int, m_tasks: int, rng: np.random.Generator,
               config: TrainConfig | None = None) -> Model:
    config = config or TrainConfig()
    d = obs_dim(m_tasks)
    in_dim = config.embed_dim + (d if config.policy_input == CONCAT else 0)
    agents = []
    for _ in range(n_agents):
        sage = SageParams.init(rng, m_tasks, config.embed_dim)
        nets = MlpParams.init(rng, in_dim, m_tasks + 1, config.hidden)
        agents.append(AgentModel(sage, nets, config.use_graphsage, config.policy_input))
    return Model(agents=agents, n_agents=n_agents, m_tasks=m_tasks,
                 embed_dim=config.embed_dim, hidden=config.hidden,
                 use_graphsage=config.use_graphsage, policy_input=config.policy_input)


def check_compatible(model: Model, scenario: ScenarioConfig) -> None:
    if model.n_agents != scenario.n_agents or model.m_tasks != scenario.task_slots:
        raise ConfigError(
            f"model is shaped for N={model.n_agents}, M={model.m_tasks} but scenario has "
            f"N={scenario.n_agents}, M={scenario.task_slots}")


def decide(model: Model, observations: np.ndarray, rngs=None) -> list[int]:
    """One decentralized decision round: each agent embeds and picks an action.

    Greedy (argmax) when ``rngs`` is None, sampled otherwise.
    """
    nbr = neighbor_sums(observations)
    actions = []
    for i, agent in enumerate(model.agents):
        dist = agent.dist(observations[i], nbr[i])
        if rngs is None:
            actions.append(int(np.argmax(dist.logits)))
        else:
            actions.append(sample_action(dist, rngs[i])[0])
    return actions


# ---------------------------------------------------------------- checkpoints


def _mlp_doc(net: Mlp) -> dict:
    return {"weights": [W.tolist() for W in net.weights],
            "biases": [b.tolist() for b in net.biases]}


def _mlp_from(doc: dict) -> Mlp:
    return Mlp([np.array(W, dtype=float) for W in doc["weights"]],
               [np.array(b, dtype=float) for b in doc["biases"]])


def model_to_dict(model: Model) -> dict:
    return {
        "version": CHECKPOINT_VERSION,
        "n_agents": model.n_agents,
        "m_tasks": model.m_tasks,
        "embed_dim": model.embed_dim,
        "hidden": model.hidden,
        "use_graphsage": model.use_graphsage,
        "policy_input": model.policy_input,
        "agents": [
            {"sage": {"W": a.sage.W.tolist(), "W_prime": a.sage.W_prime.tolist()},
             "policy": _mlp_doc(a.nets.policy),
             "value": _mlp_doc(a.nets.value)}
            for a in model.agents
        ],
    }


def model_from_dict(doc: dict) -> Model:
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {doc.get('version')!r}")
    use_graphsage = bool(doc.get("use_graphsage", True))
    policy_input = doc.get("policy_input", EMBEDDING)
    agents = []
    for a in doc["agents"]:
        sage = SageParams(W=np.array(a["sage"]["W"], dtype=float),
                          W_prime=np.array(a["sage"]["W_prime"], dtype=float))
        nets = MlpParams(policy=_mlp_from(a["policy"]), value=_mlp_from(a["value"]))
        agents.append(AgentModel(sage, nets, use_graphsage, policy_input))
    return Model(agents=agents, n_agents=int(doc["n_agents"]), m_tasks=int(doc["m_tasks"]),
                 embed_dim=int(doc["embed_dim"]), hidden=int(doc.get("hidden", HIDDEN)),
                 use_graphsage=use_graphsage, policy_input=policy_input)


def save_checkpoint(model: Model, path) -> None:
    FilePath(path).write_text(json.dumps(model_to_dict(model)))


def load_checkpoint(path) -> Model:
    try:
        doc = json.loads(FilePath(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"checkpoint not found: {path}") from None
    return model_from_dict(doc)


# ---------------------------------------------------------------- PPO pieces


def compute_gae(rewards, values, dones, bootstrap_value: float, gamma: float, lam: float):
    """Backward GAE recursion.

    ``dones[t]`` marks that the episode ended right after step t, which cuts
    both the bootstrap and the advantage trace. Returns ``(advantages, targets)``
    with ``targets = advantages + values``; no normalization here.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    T = len(rewards)
    adv = np.zeros(T)
    running = 0.0
    for t in range(T - 1, -1, -1):
        nxt = bootstrap_value if t == T - 1 else values[t + 1]
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * nxt * live - values[t]
        running = delta + gamma * lam * live * running
        adv[t] = running
    return adv, adv + values


@dataclass
class Batch:
    x_self: np.ndarray
    x_nbr: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    targets: np.ndarray

    def __len__(self):
        return len(self.actions)

    def take(self, idx) -> "Batch":
        return Batch(*(getattr(self, f.name)[idx] for f in fields(self)))


def ppo_loss(agent: AgentModel, batch: Batch, config: TrainConfig):
    """Clipped-surrogate PPO loss for one agent and its exact gradients.

    loss = -mean(min(r A, clip(r) A)) + value_coef * mean((V - target)^2)
           - entropy_coef * mean(H)

    Returns ``(loss, grads, info)``; ``grads`` is keyed like ``agent.arrays()``.
    """
    B = len(batch)
    eps = config.clip_epsilon
    inp, sage_cache = agent.features(batch.x_self, batch.x_nbr)
    logits, pi_acts = mlp_forward(agent.nets.policy, inp)
    v_out, v_acts = mlp_forward(agent.nets.value, inp)
    values = v_out[:, 0]

    logp_all = log_softmax(logits)
    probs = np.exp(logp_all)
    rows = np.arange(B)
    logp = logp_all[rows, batch.actions]
    ratio = np.exp(logp - batch.old_log_probs)
    A = batch.advantages
    surr1 = ratio * A
    surr2 = np.clip(ratio, 1.0 - eps, 1.0 + eps) * A
    policy_loss = -np.mean(np.minimum(surr1, surr2))
    value_loss = np.mean((values - batch.targets) ** 2)
    entropy = -(probs * logp_all).sum(axis=1)
    loss = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy.mean()

    # policy gradient flows only where the unclipped branch is the minimum
    d_logp = -A * ratio * (surr1 <= surr2) / B
    dlogits = -probs * d_logp[:, None]
    dlogits[rows, batch.actions] += d_logp
    dlogits -= config.entropy_coef / B * entropy_grad(logits)
    dvalues = 2.0 * config.value_coef * (values - batch.targets) / B

    dW_pi, db_pi, dinp_pi = mlp_backward(agent.nets.policy, pi_acts, dlogits)
    dW_v, db_v, dinp_v = mlp_backward(agent.nets.value, v_acts, dvalues[:, None])
    dinp = dinp_pi + dinp_v
    dz = dinp[:, -agent.sage.W.shape[0]:]
    dW, dWp, _, _ = sage_embed_backward(dz, sage_cache, agent.sage, agent.use_graphsage)

    grads = {"sage.W": dW, "sage.W_prime": dWp}
    for tag, dWs, dbs in (("pi", dW_pi, db_pi), ("v", dW_v, db_v)):
        for k, (gW, gb) in enumerate(zip(dWs, dbs)):
            grads[f"{tag}.W{k}"] = gW
            grads[f"{tag}.b{k}"] = gb
    info = {"policy_loss": float(policy_loss), "value_loss": float(value_loss),
            "entropy": float(entropy.mean()),
            "clip_frac": float(np.mean(np.abs(ratio - 1.0) > eps))}
    return float(loss), grads, info


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> dict:
    """Bias-corrected Adam update applied in place; returns ``params``."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for k, p in params.items():
        g = grads[k]
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        m, v = state.m[k], state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params


# ---------------------------------------------------------------- training


@dataclass
class RolloutBuffer:
    x_self: list = field(default_factory=list)
    x_nbr: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    values: list = field(default_factory=list)
    dones: list = field(default_factory=list)
    entropies: list = field(default_factory=list)
    advantages: list = field(default_factory=list)
    targets: list = field(default_factory=list)

    def add(self, x_self, x_nbr, action, log_prob, reward, value, done, entropy):
        self.x_self.append(x_self)
        self.x_nbr.append(x_nbr)
        self.actions.append(action)
        self.log_probs.append(log_prob)
        self.rewards.append(reward)
        self.values.append(value)
        self.dones.append(done)
        self.entropies.append(entropy)

    def __len__(self):
        return len(self.actions)

    def finish_fragment(self, start: int, bootstrap_value: float, config: TrainConfig) -> None:
        """GAE over the entries added since ``start``."""
        adv, tgt = compute_gae(self.rewards[start:], self.values[start:], self.dones[start:],
                               bootstrap_value, config.gamma, config.gae_lambda)
        self.advantages.extend(adv)
        self.targets.extend(tgt)

    def to_batch(self) -> Batch:
        return Batch(x_self=np.array(self.x_self), x_nbr=np.array(self.x_nbr),
                     actions=np.array(self.actions, dtype=int),
                     old_log_probs=np.array(self.log_probs),
                     advantages=np.array(self.advantages), targets=np.array(self.targets))


def update_agent(agent: AgentModel, buffer: RolloutBuffer, state: AdamState,
                 config: TrainConfig, rng: np.random.Generator) -> dict:
    """Several epochs of minibatch PPO on one agent's own experience."""
    batch = buffer.to_batch()
    if config.normalize_advantages and len(batch) > 1:
        a = batch.advantages
        batch.advantages = (a - a.mean()) / (a.std() + 1e-8)
    params = agent.arrays()
    stats = {"policy_loss": [], "value_loss": []}
    for _ in range(config.sgd_iters):
        order = rng.permutation(len(batch))
        for lo in range(0, len(batch), config.minibatch_size):
            loss, grads, info = ppo_loss(agent, batch.take(order[lo:lo + config.minibatch_size]), config)
            if not math.isfinite(loss):
                raise FloatingPointError("non-finite PPO loss; training diverged")
            adam_step(params, grads, state, config.lr)
            stats["policy_loss"].append(info["policy_loss"])
            stats["value_loss"].append(info["value_loss"])
    return {k: float(np.mean(v)) for k, v in stats.items()}


CURVE_COLUMNS = ("iteration", "env_steps", "mean_reward", "mean_entropy",
                 "mean_policy_loss", "mean_value_loss")


def train(config: TrainConfig, scenario: ScenarioConfig, total_steps: int, seed: int,
          model: Model | None = None, callback=None):
    """Run IPPO for ``total_steps`` environment steps.

    Returns ``(model, curve)`` where ``curve`` holds one dict per update
    iteration with the ``CURVE_COLUMNS`` keys. ``callback(row)`` is invoked
    after every iteration when given.
    """
    config.validate()
    n, m = scenario.n_agents, scenario.task_slots
    root = np.random.SeedSequence(int(seed))
    init_ss, env_ss, act_ss, shuffle_ss = root.spawn(4)
    if model is None:
        model = init_model(n, m, np.random.default_rng(init_ss), config)
    check_compatible(model, scenario)
    act_rngs = [np.random.default_rng(s) for s in act_ss.spawn(n)]
    shuffle_rngs = [np.random.default_rng(s) for s in shuffle_ss.spawn(n)]
    env_rng = np.random.default_rng(env_ss)
    adams = [AdamState() for _ in range(n)]

    def new_world():
        return init_world(scenario, int(env_rng.integers(2 ** 63)))

    world = new_world()
    curve = []
    done_steps = 0
    iteration = 0
    while done_steps < total_steps:
        n_batch = min(config.batch_size, total_steps - done_steps)
        buffers = [RolloutBuffer() for _ in range(n)]
        collected = 0
        while collected < n_batch:
            L = min(config.fragment_len, n_batch - collected)
            start = len(buffers[0])
            done = False
            for _ in range(L):
                cm = build_cost_matrix(world)
                X = build_observations(world, cm)
                S = neighbor_sums(X)
                actions, logps, vals, ents = [], [], [], []
                for i, agent in enumerate(model.agents):
                    dist, val = agent.act(X[i], S[i])
                    a, lp = sample_action(dist, act_rngs[i])
                    actions.append(a)
                    logps.append(lp)
                    vals.append(val)
                    ents.append(dist_entropy(dist))
                res = step(world, actions, config, cm)
                done = res.done
                for i in range(n):
                    buffers[i].add(X[i], S[i], actions[i], logps[i], float(res.rewards[i]),
                                   vals[i], done, ents[i])
                if done:
                    world = new_world()
            if done:
                boot = [0.0] * n
            else:
                cm = build_cost_matrix(world)
                X = build_observations(world, cm)
                S = neighbor_sums(X)
                boot = [agent.value(X[i], S[i]) for i, agent in enumerate(model.agents)]
            for i in range(n):
                buffers[i].finish_fragment(start, boot[i], config)
            collected += L

        stats = [update_agent(agent, buffers[i], adams[i], config, shuffle_rngs[i])
                 for i, agent in enumerate(model.agents)]
        done_steps += n_batch
        iteration += 1
        row = {
            "iteration": iteration,
            "env_steps": done_steps,
            "mean_reward": float(np.mean([np.mean(b.rewards) for b in buffers])),
            "mean_entropy": float(np.mean([np.mean(b.entropies) for b in buffers])),
            "mean_policy_loss": float(np.mean([s["policy_loss"] for s in stats])),
            "mean_value_loss": float(np.mean([s["value_loss"] for s in stats])),
        }
        curve.append(row)
        if callback is not None:
            callback(row)
    return model, curve


def evaluate(model: Model, scenario: ScenarioConfig, episodes: int, seed: int):
    """Greedy decentralized execution; no parameter updates."""
    from .bench import run_scenario

    check_compatible(model, scenario)
    return run_scenario(scenario, "policy", episodes, seed, model=model)
