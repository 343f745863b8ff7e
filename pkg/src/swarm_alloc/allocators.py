"""Conflict resolution for simultaneous requests and baseline assignment solvers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AllocationOutcome:
    """What happened to every agent's request in one decision round.

    ``requests[i]`` is the raw action (0 = no request, j = slot j-1).
    ``assignments`` and ``conflicts`` use 0-based slot indices.
    """

    requests: list[int]
    assignments: list[tuple[int, int]] = field(default_factory=list)
    conflicts: list[tuple[int, list[int]]] = field(default_factory=list)
    idle_agents: list[int] = field(default_factory=list)
    invalid: list[int] = field(default_factory=list)
    busy_requests: list[int] = field(default_factory=list)

    @property
    def contested(self) -> bool:
        """True when two or more agents asked for the same slot (pre-resolution)."""
        asked = [a for a in self.requests if a > 0]
        return len(asked) != len(set(asked))

    @property
    def any_request(self) -> bool:
        return any(a > 0 for a in self.requests)


def resolve_conflicts(requests, cost_matrix, eligible, waiting=None) -> AllocationOutcome:
    """Turn simultaneous requests into a one-to-one assignment.

    ``eligible[i]`` is False for agents already carrying a task; their
    requests are recorded in ``busy_requests`` and otherwise ignored.
    ``waiting[j]`` marks slots that can be requested (default: all).
    Requests for non-waiting or unreachable slots go to ``invalid``.
    Each contested slot goes to the requester with the smallest normalized
    cost, ties to the lowest agent id; the rest are listed as conflicts.
    """
    requests = [int(a) for a in requests]
    norm = cost_matrix.normalized
    m = norm.shape[1]
    reachable = getattr(cost_matrix, "reachable", None)
    if waiting is None:
        waiting = [True] * m
    out = AllocationOutcome(requests=requests)

    by_task: dict[int, list[int]] = {}
    for i, a in enumerate(requests):
        if a < 0 or a > m:
            raise ValueError(f"action {a} outside 0..{m}")
        if not eligible[i]:
            if a > 0:
                out.busy_requests.append(i)
            continue
        if a == 0:
            if any(waiting):
                out.idle_agents.append(i)
            continue
        j = a - 1
        if not waiting[j] or (reachable is not None and not reachable[i, j]):
            out.invalid.append(i)
            continue
        by_task.setdefault(j, []).append(i)

    for j in sorted(by_task):
        agents = by_task[j]
        winner = min(agents, key=lambda i: (norm[i, j], i))
        out.assignments.append((winner, j))
        if len(agents) > 1:
            out.conflicts.append((j, [i for i in agents if i != winner]))
    out.assignments.sort()
    return out


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimum-total-cost assignment as sorted ``(row, col)`` pairs.

    Rectangular inputs are padded to square with a constant larger than
    any real entry; padded pairs are dropped. Shortest augmenting paths
    with row/column potentials, O(n^3).
    """
    cost = np.asarray(cost, dtype=float)
    n_rows, n_cols = cost.shape
    if n_rows == 0 or n_cols == 0:
        return []
    n = max(n_rows, n_cols)
    if n_rows != n_cols:
        pad = 10.0 * np.abs(cost).max() + 1.0
        square = np.full((n, n), pad)
        square[:n_rows, :n_cols] = cost
    else:
        square = cost

    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    row_of = np.zeros(n + 1, dtype=int)   # row_of[col] = row (1-based), 0 = free
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        row_of[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of[j0]
            free = ~used[1:]
            cur = square[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            cols = np.flatnonzero(used)
            u[row_of[cols]] += delta
            v[cols] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if row_of[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            row_of[j0] = row_of[j1]
            j0 = j1

    pairs = [(int(row_of[j]) - 1, j - 1) for j in range(1, n + 1)]
    return sorted((r, c) for r, c in pairs if r < n_rows and c < n_cols)


def greedy_assign(cost) -> list[tuple[int, int]]:
    """Repeatedly take the cheapest remaining (agent, task) entry."""
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    order = np.argsort(cost, axis=None, kind="stable")
    used_r, used_c = set(), set()
    pairs = []
    for flat in order:
        r, c = divmod(int(flat), m)
        if r in used_r or c in used_c:
            continue
        pairs.append((r, c))
        used_r.add(r)
        used_c.add(c)
        if len(pairs) == min(n, m):
            break
    return sorted(pairs)


def random_assign(n_agents: int, m_tasks: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform random matching of ``min(n_agents, m_tasks)`` pairs."""
    if n_agents <= m_tasks:
        cols = rng.permutation(m_tasks)[:n_agents]
        return [(i, int(c)) for i, c in enumerate(cols)]
    rows = rng.permutation(n_agents)[:m_tasks]
    return sorted((int(r), j) for j, r in enumerate(rows))


def assignment_total(cost, pairs) -> float:
    cost = np.asarray(cost, dtype=float)
    return float(sum(cost[r, c] for r, c in pairs))
