"""Discrete 3D grid world with heterogeneous agents and a task pool."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path as FilePath

import numpy as np

from .allocators import AllocationOutcome, resolve_conflicts
from .pathing import (
    AERIAL, GROUND, Cell, CostMatrix, ReservationTable, advance, astar,
    build_cost_matrix, distance_field,
)
from .rewards import compute_rewards

VELOCITY = {GROUND: 3.0, AERIAL: 5.0}

IDLE = "idle"
ACCEPT = "accept"
ASSIGN = "assign"
COMPLETE = "complete"

WAITING = "waiting"
ASSIGNED = "assigned"

FIXED = "fixed"
CONTINUOUS = "continuous"

MAX_PLACEMENT_TRIES = 10_000


class ConfigError(ValueError):
    """Invalid or incomplete scenario / training configuration."""


@dataclass
class AgentGroup:
    kind: str
    count: int


@dataclass
class ScenarioConfig:
    dims: tuple[int, int, int]
    agents: list[AgentGroup]
    task_slots: int
    obstacle_density: float = 0.05
    mode: str = CONTINUOUS
    episode_len: int = 500
    blockage_threshold: int = 3

    REQUIRED = ("dims", "agents", "task_slots")

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.agents = [g if isinstance(g, AgentGroup) else AgentGroup(**g) for g in self.agents]
        self.validate()

    def validate(self) -> None:
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ConfigError("dims must be three positive integers")
        for g in self.agents:
            if g.kind not in VELOCITY:
                raise ConfigError(f"agents.kind must be 'ground' or 'aerial', got {g.kind!r}")
            if g.count < 0:
                raise ConfigError("agents.count must be non-negative")
        if self.n_agents < 1:
            raise ConfigError("agents: need at least one agent")
        if self.task_slots < 1:
            raise ConfigError("task_slots must be >= 1")
        if not 0.0 <= self.obstacle_density <= 0.3:
            raise ConfigError("obstacle_density must lie in [0, 0.3]")
        if self.mode not in (FIXED, CONTINUOUS):
            raise ConfigError("mode must be 'fixed' or 'continuous'")
        if self.episode_len < 1:
            raise ConfigError("episode_len must be >= 1")
        if self.blockage_threshold < 1:
            raise ConfigError("blockage_threshold must be >= 1")

    @property
    def n_agents(self) -> int:
        return sum(g.count for g in self.agents)

    @property
    def kinds(self) -> list[str]:
        return [g.kind for g in self.agents for _ in range(g.count)]

    @property
    def c_max(self) -> float:
        slowest = min(VELOCITY[k] for k in self.kinds)
        return sum(self.dims) / slowest

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        missing = [k for k in cls.REQUIRED if k not in doc]
        if missing:
            raise ConfigError(f"missing config field: {missing[0]}")
        known = {"dims", "agents", "task_slots", "obstacle_density", "mode",
                 "episode_len", "blockage_threshold"}
        unknown = set(doc) - known - {"train"}
        if unknown:
            raise ConfigError(f"unknown config field: {sorted(unknown)[0]}")
        try:
            groups = [AgentGroup(kind=str(g["kind"]), count=int(g["count"])) for g in doc["agents"]]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"agents entries need 'kind' and 'count' ({exc})") from None
        kwargs = {k: doc[k] for k in known - {"agents"} if k in doc}
        return cls(agents=groups, **kwargs)

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        try:
            doc = json.loads(FilePath(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "agents": [{"kind": g.kind, "count": g.count} for g in self.agents],
            "task_slots": self.task_slots,
            "obstacle_density": self.obstacle_density,
            "mode": self.mode,
            "episode_len": self.episode_len,
            "blockage_threshold": self.blockage_threshold,
        }


@dataclass
class Agent:
    id: int
    kind: str
    position: Cell
    velocity: float
    status: str = IDLE
    assigned_task: int | None = None
    goal: Cell | None = None
    assigned_cost: float = 0.0
    assigned_from: Cell | None = None
    assigned_step: int = 0
    path: list[Cell] = field(default_factory=list)
    blockage_count: int = 0

    @property
    def eligible(self) -> bool:
        return self.status in (IDLE, COMPLETE)

    @property
    def busy(self) -> bool:
        return self.status in (ACCEPT, ASSIGN)


@dataclass
class Task:
    id: int
    location: Cell
    status: str = WAITING
    spawn_step: int = 0


@dataclass
class CompletedAssignment:
    agent: int
    task: int
    start: Cell
    goal: Cell
    kind: str
    velocity: float
    cost: float
    assigned_step: int
    completed_step: int


@dataclass
class StepResult:
    outcome: AllocationOutcome
    rewards: np.ndarray
    global_reward: float
    cost_matrix: CostMatrix
    completed: list[CompletedAssignment]
    done: bool


@dataclass
class GridWorld:
    config: ScenarioConfig
    occupied: np.ndarray
    agents: list[Agent]
    tasks: list[Task | None]
    rng_seed: int
    clock: int = 0
    next_task_id: int = 0
    reservations: ReservationTable = field(default_factory=ReservationTable)
    completed: list[CompletedAssignment] = field(default_factory=list)
    placement_rng: np.random.Generator | None = None
    replacement_rng: np.random.Generator | None = None
    _fields: dict = field(default_factory=dict, repr=False)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.config.dims

    @property
    def c_max(self) -> float:
        return self.config.c_max

    @property
    def obstacles(self) -> set[Cell]:
        return {tuple(int(v) for v in c) for c in np.argwhere(self.occupied)}

    @property
    def waiting(self) -> list[bool]:
        return [t is not None and t.status == WAITING for t in self.tasks]

    @property
    def travel_cost_total(self) -> float:
        return float(sum(c.cost for c in self.completed))

    def distance_field(self, goal: Cell, kind: str) -> np.ndarray:
        key = (goal, kind)
        if key not in self._fields:
            self._fields[key] = distance_field(self.occupied, goal, kind)
        return self._fields[key]

    def agent_cells(self) -> dict[Cell, int]:
        return {a.position: a.id for a in self.agents}

    def snapshot(self) -> tuple:
        """Hashable summary of the full mutable state, for determinism checks."""
        agents = tuple((a.kind, a.position, a.status, a.assigned_task, a.goal,
                        tuple(a.path), a.blockage_count) for a in self.agents)
        tasks = tuple(None if t is None else (t.id, t.location, t.status, t.spawn_step)
                      for t in self.tasks)
        return (self.clock, self.occupied.tobytes(), agents, tasks, self.next_task_id,
                tuple((c.agent, c.task, c.cost) for c in self.completed))

    def copy(self) -> "GridWorld":
        return copy.deepcopy(self)


def _free_cells(occupied: np.ndarray, ground_only: bool) -> np.ndarray:
    free = ~occupied
    if ground_only:
        mask = np.zeros_like(free)
        mask[:, :, 0] = free[:, :, 0]
        free = mask
    return np.argwhere(free)


def _draw_cell(rng, occupied, taken: set, ground_only: bool) -> Cell:
    nx, ny, nz = occupied.shape
    for _ in range(MAX_PLACEMENT_TRIES):
        z = 0 if ground_only else int(rng.integers(nz))
        cell = (int(rng.integers(nx)), int(rng.integers(ny)), z)
        if not occupied[cell] and cell not in taken:
            return cell
    # dense worlds: fall back to an exhaustive draw
    cands = [tuple(int(v) for v in c) for c in _free_cells(occupied, ground_only)]
    cands = [c for c in cands if c not in taken]
    if not cands:
        raise ConfigError("world too dense: no free cell left for placement")
    return cands[int(rng.integers(len(cands)))]


def init_world(config: ScenarioConfig, seed: int) -> GridWorld:
    """Random obstacles, agents and tasks, all on distinct free cells.

    Ground agents and all tasks sit on the z=0 plane; aerial agents may
    start at any height.
    """
    ss = np.random.SeedSequence(int(seed))
    place_ss, replace_ss = ss.spawn(2)
    rng = np.random.default_rng(place_ss)

    n_cells = int(np.prod(config.dims))
    n_obst = int(round(config.obstacle_density * n_cells))
    occupied = np.zeros(config.dims, dtype=bool)
    if n_obst:
        flat = rng.choice(n_cells, size=n_obst, replace=False)
        occupied.flat[flat] = True

    taken: set[Cell] = set()
    agents = []
    for i, kind in enumerate(config.kinds):
        cell = _draw_cell(rng, occupied, taken, ground_only=(kind == GROUND))
        taken.add(cell)
        agents.append(Agent(id=i, kind=kind, position=cell, velocity=VELOCITY[kind]))
    tasks = []
    for j in range(config.task_slots):
        cell = _draw_cell(rng, occupied, taken, ground_only=True)
        taken.add(cell)
        tasks.append(Task(id=j, location=cell, spawn_step=0))

    return GridWorld(config=config, occupied=occupied, agents=agents, tasks=tasks,
                     rng_seed=int(seed), next_task_id=len(tasks),
                     placement_rng=rng, replacement_rng=np.random.default_rng(replace_ss))


def replace_task(world: GridWorld, slot: int) -> Task | None:
    """Refill an assigned slot with a fresh waiting task.

    In fixed-task mode the slot is deactivated instead and ``None`` is returned.
    """
    current = world.tasks[slot]
    if current is None or current.status != ASSIGNED:
        raise ValueError(f"slot {slot} does not hold an assigned task")
    for kind in (GROUND, AERIAL):
        world._fields.pop((current.location, kind), None)
    if world.config.mode == FIXED:
        world.tasks[slot] = None
        return None
    # keep new tasks off agent cells, active tasks and pending goals
    taken = {a.position for a in world.agents}
    taken |= {a.goal for a in world.agents if a.goal is not None}
    taken |= {t.location for t in world.tasks if t is not None}
    cell = _draw_cell(world.replacement_rng, world.occupied, taken, ground_only=True)
    task = Task(id=world.next_task_id, location=cell, spawn_step=world.clock)
    world.next_task_id += 1
    world.tasks[slot] = task
    return task


def assign(world: GridWorld, agent_idx: int, slot: int, cost_matrix: CostMatrix) -> None:
    """Hand slot ``slot`` to agent ``agent_idx`` and plan its route."""
    agent = world.agents[agent_idx]
    task = world.tasks[slot]
    task.status = ASSIGNED
    agent.status = ACCEPT
    agent.assigned_task = task.id
    agent.goal = task.location
    agent.assigned_cost = float(cost_matrix.raw[agent_idx, slot])
    agent.assigned_step = world.clock
    agent.assigned_from = agent.position
    path = astar(world.occupied, agent.position, task.location, agent.kind)
    agent.path = [] if path is None else path.cells[1:]
    agent.blockage_count = 0
    world.reservations.release(agent.id)
    world.reservations.reserve_path(agent.id, agent.path, world.clock + 1)


def _finish(world: GridWorld, agent: Agent) -> CompletedAssignment:
    rec = CompletedAssignment(
        agent=agent.id, task=agent.assigned_task, start=agent.assigned_from,
        goal=agent.goal, kind=agent.kind, velocity=agent.velocity,
        cost=agent.assigned_cost, assigned_step=agent.assigned_step,
        completed_step=world.clock + 1)
    world.completed.append(rec)
    world.reservations.release(agent.id)
    agent.status = COMPLETE
    agent.assigned_task = None
    agent.goal = None
    agent.path = []
    agent.blockage_count = 0
    return rec


def is_done(world: GridWorld) -> bool:
    if world.clock >= world.config.episode_len:
        return True
    if world.config.mode == FIXED:
        return all(t is None for t in world.tasks) and not any(a.busy for a in world.agents)
    return False


def step(world: GridWorld, actions, reward_config=None,
         cost_matrix: CostMatrix | None = None) -> StepResult:
    """Advance the world by one decision round.

    ``actions[i]`` is 0 (no request) or j in 1..M (request slot j-1).
    ``cost_matrix`` must describe the current state when given; it is
    computed otherwise. Invalid requests are penalized, never rejected.
    """
    if len(actions) != len(world.agents):
        raise ValueError("need exactly one action per agent")
    for a in world.agents:
        if a.status == COMPLETE:
            a.status = IDLE
    cm = cost_matrix if cost_matrix is not None else build_cost_matrix(world)
    eligible = [a.eligible for a in world.agents]
    outcome = resolve_conflicts(actions, cm, eligible, world.waiting)
    rewards, total = compute_rewards(outcome, cm, reward_config)

    for agent_idx, slot in outcome.assignments:
        assign(world, agent_idx, slot, cm)

    world.reservations.purge(world.clock + 1)
    cells = world.agent_cells()
    finished = []
    for agent in world.agents:
        if not agent.busy:
            continue
        if agent.position != agent.goal:
            if not agent.path:
                path = astar(world.occupied, agent.position, agent.goal, agent.kind)
                if path is not None:
                    agent.path = path.cells[1:]
            if agent.path:
                advance(agent, world.reservations, world.occupied, cells, world.clock,
                        world.config.blockage_threshold)
        agent.status = ASSIGN
        if agent.position == agent.goal:
            finished.append(_finish(world, agent))

    for _, slot in outcome.assignments:
        replace_task(world, slot)

    world.clock += 1
    return StepResult(outcome=outcome, rewards=rewards, global_reward=total,
                      cost_matrix=cm, completed=finished, done=is_done(world))
