"""Per-agent rewards for one decision round."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RewardConfig:
    lambda_conflict: float = 1.0
    mu_idle: float = 0.5
    eta_bonus: float = 0.5
    bonus_threshold: float = -0.5


def compute_rewards(outcome, cost_matrix, config=None) -> tuple[np.ndarray, float]:
    """Return ``(r, R)`` where ``r[i]`` is agent i's reward and ``R = sum(r)``.

    ``config`` is anything carrying ``lambda_conflict``, ``mu_idle``,
    ``eta_bonus`` and ``bonus_threshold`` (``RewardConfig`` or a
    ``TrainConfig``). Winners earn minus their normalized cost plus the
    bonus when that cost is below ``bonus_threshold``; conflict losers and
    invalid requests pay ``lambda_conflict``; eligible agents idling while
    tasks wait pay ``mu_idle``; busy agents that request again pay an extra
    ``lambda_conflict``.
    """
    config = config or RewardConfig()
    n = len(outcome.requests)
    r = np.zeros(n)
    for agent, task in outcome.assignments:
        c = cost_matrix.normalized[agent, task]
        r[agent] += -c
        if c < config.bonus_threshold:
            r[agent] += config.eta_bonus
    for _, losers in outcome.conflicts:
        for agent in losers:
            r[agent] -= config.lambda_conflict
    for agent in outcome.invalid:
        r[agent] -= config.lambda_conflict
    for agent in outcome.busy_requests:
        r[agent] -= config.lambda_conflict
    for agent in outcome.idle_agents:
        r[agent] -= config.mu_idle
    return r, float(r.sum())
