"""Grid shortest paths, travel costs and reservation-based movement.

Ground agents move 4-connected in the z=0 plane, aerial agents move
6-connected through the whole volume. Every move is 1 m, so a path of
``k`` moves has metric length ``k``.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

GROUND = "ground"
AERIAL = "aerial"

Cell = tuple[int, int, int]

_PLANAR = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0))
_SPATIAL = _PLANAR + ((0, 0, 1), (0, 0, -1))

MOVED = "moved"
BLOCKED = "blocked"
REPLANNED = "replanned"


@dataclass
class Path:
    cells: list[Cell]

    @property
    def length_m(self) -> int:
        return len(self.cells) - 1


def moves_for(kind: str):
    if kind == GROUND:
        return _PLANAR
    if kind == AERIAL:
        return _SPATIAL
    raise ValueError(f"unknown agent kind {kind!r}")


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) + abs(a[2] - b[2])


def _walkable(occupied: np.ndarray, cell: Cell, kind: str) -> bool:
    x, y, z = cell
    nx, ny, nz = occupied.shape
    if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
        return False
    if kind == GROUND and z != 0:
        return False
    return not occupied[x, y, z]


def astar(occupied: np.ndarray, start: Cell, goal: Cell, kind: str,
          blocked: set[Cell] | frozenset = frozenset()) -> Path | None:
    """Shortest path from ``start`` to ``goal`` or ``None`` when unreachable.

    ``occupied`` is the static obstacle grid; ``blocked`` holds extra cells
    treated as obstacles for this query only (other agents when replanning).
    The start cell is never considered blocked.

    Open-list ties on f are broken by the smaller (x, y, z) cell.
    """
    start = tuple(int(c) for c in start)
    goal = tuple(int(c) for c in goal)
    if start == goal:
        return Path([start])
    if not _walkable(occupied, start, kind) or not _walkable(occupied, goal, kind):
        return None
    if goal in blocked:
        return None
    moves = moves_for(kind)

    g_score = {start: 0}
    parent: dict[Cell, Cell] = {}
    h0 = manhattan(start, goal)
    open_heap = [(h0, start)]
    closed = set()
    while open_heap:
        _, cell = heapq.heappop(open_heap)
        if cell in closed:
            continue
        if cell == goal:
            out = [cell]
            while cell in parent:
                cell = parent[cell]
                out.append(cell)
            out.reverse()
            return Path(out)
        closed.add(cell)
        g_next = g_score[cell] + 1
        x, y, z = cell
        for dx, dy, dz in moves:
            nb = (x + dx, y + dy, z + dz)
            if nb in closed or nb in blocked or not _walkable(occupied, nb, kind):
                continue
            if g_next < g_score.get(nb, 1 << 60):
                g_score[nb] = g_next
                parent[nb] = cell
                heapq.heappush(open_heap, (g_next + manhattan(nb, goal), nb))
    return None


def distance_field(occupied: np.ndarray, goal: Cell, kind: str) -> np.ndarray:
    """Shortest move counts from every cell to ``goal`` (inf where unreachable).

    Breadth-first wavefront over the whole grid, vectorized per ring.
    Moves are reversible, so distance to the goal equals distance from it.
    """
    dist = np.full(occupied.shape, np.inf)
    if not _walkable(occupied, goal, kind):
        return dist
    if kind == GROUND:
        plane = distance_field(occupied[:, :, :1], goal, AERIAL)
        dist[:, :, :1] = plane
        return dist

    free = ~occupied
    frontier = np.zeros(occupied.shape, dtype=bool)
    frontier[goal] = True
    seen = frontier.copy()
    dist[goal] = 0.0
    d = 0
    while frontier.any():
        d += 1
        grown = np.zeros_like(frontier)
        grown[1:] |= frontier[:-1]
        grown[:-1] |= frontier[1:]
        grown[:, 1:] |= frontier[:, :-1]
        grown[:, :-1] |= frontier[:, 1:]
        grown[:, :, 1:] |= frontier[:, :, :-1]
        grown[:, :, :-1] |= frontier[:, :, 1:]
        grown &= free
        grown &= ~seen
        dist[grown] = d
        seen |= grown
        frontier = grown
    return dist


def travel_cost(distance_m: float, velocity: float) -> float:
    """Travel time in seconds for ``distance_m`` meters at ``velocity`` m/s."""
    if velocity <= 0:
        raise ValueError("velocity must be positive")
    return distance_m / velocity


def normalize_cost(raw, c_max: float):
    """Clip to [0, c_max] and map linearly onto [-1, 1]. Works elementwise."""
    if c_max <= 0:
        raise ValueError("c_max must be positive")
    clipped = np.minimum(np.maximum(raw, 0.0), c_max)
    out = 2.0 * clipped / c_max - 1.0
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class CostMatrix:
    raw: np.ndarray
    normalized: np.ndarray
    c_max: float
    reachable: np.ndarray


def build_cost_matrix(world, method: str = "field") -> CostMatrix:
    """Agent-by-slot travel times for the current world state.

    ``method="field"`` reads cached per-task distance fields (fast);
    ``method="astar"`` runs one A* search per pair. Both give the same
    shortest-path lengths. Inactive slots and unreachable pairs carry
    ``c_max`` and are flagged unreachable.
    """
    n, m = len(world.agents), len(world.tasks)
    c_max = world.c_max
    raw = np.full((n, m), c_max)
    reachable = np.zeros((n, m), dtype=bool)
    for j, task in enumerate(world.tasks):
        if task is None:
            continue
        for i, agent in enumerate(world.agents):
            if method == "field":
                d = world.distance_field(task.location, agent.kind)[agent.position]
            elif method == "astar":
                p = astar(world.occupied, agent.position, task.location, agent.kind)
                d = np.inf if p is None else p.length_m
            else:
                raise ValueError(f"unknown method {method!r}")
            if np.isfinite(d):
                raw[i, j] = travel_cost(float(d), agent.velocity)
                reachable[i, j] = True
    return CostMatrix(raw=raw, normalized=normalize_cost(raw, c_max),
                      c_max=c_max, reachable=reachable)


@dataclass
class ReservationTable:
    """Time-indexed cell claims: (cell, step) -> agent id."""

    entries: dict[tuple[Cell, int], int] = field(default_factory=dict)
    _owned: dict[int, list[tuple[Cell, int]]] = field(default_factory=dict)

    def holder(self, cell: Cell, step: int) -> int | None:
        return self.entries.get((cell, step))

    def is_free(self, cell: Cell, step: int, agent_id: int) -> bool:
        h = self.entries.get((cell, step))
        return h is None or h == agent_id

    def reserve_path(self, agent_id: int, cells, first_step: int) -> None:
        """Claim ``cells[k]`` at ``first_step + k``; slots held by others are skipped."""
        owned = self._owned.setdefault(agent_id, [])
        for k, cell in enumerate(cells):
            key = (cell, first_step + k)
            if key not in self.entries:
                self.entries[key] = agent_id
                owned.append(key)

    def release(self, agent_id: int) -> None:
        for key in self._owned.pop(agent_id, []):
            if self.entries.get(key) == agent_id:
                del self.entries[key]

    def purge(self, before_step: int) -> None:
        stale = [k for k in self.entries if k[1] < before_step]
        for k in stale:
            del self.entries[k]
        for aid, keys in self._owned.items():
            self._owned[aid] = [k for k in keys if k[1] >= before_step]


def advance(agent, reservations: ReservationTable, occupied: np.ndarray,
            agent_cells: dict[Cell, int], clock: int, threshold: int = 3) -> str:
    """Try to move ``agent`` one cell along its queued path.

    ``agent_cells`` maps currently occupied cells to agent ids and is
    updated in place. The move happens during step ``clock`` and lands at
    ``clock + 1``. After ``threshold`` consecutive blockages the path is
    recomputed with every other agent's cell treated as an obstacle.
    """
    nxt = agent.path[0]
    other = agent_cells.get(nxt)
    if (not occupied[nxt] and (other is None or other == agent.id)
            and reservations.is_free(nxt, clock + 1, agent.id)):
        del agent_cells[agent.position]
        agent.position = nxt
        agent_cells[nxt] = agent.id
        agent.path.pop(0)
        agent.blockage_count = 0
        return MOVED

    agent.blockage_count += 1
    outcome = BLOCKED
    if agent.blockage_count >= threshold:
        agent.blockage_count = 0
        others = {c for c, aid in agent_cells.items() if aid != agent.id}
        goal = agent.path[-1]
        fresh = astar(occupied, agent.position, goal, agent.kind, blocked=others)
        if fresh is not None:
            agent.path = fresh.cells[1:]
            outcome = REPLANNED
    reservations.release(agent.id)
    reservations.reserve_path(agent.id, agent.path, clock + 2)
    return outcome
