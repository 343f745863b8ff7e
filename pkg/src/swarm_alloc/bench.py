"""Scenario runner, metrics and table reports for allocator comparisons.

Allocation time counts only the decision itself: the forward passes plus
conflict resolution for the learned policy, the solver call for the
centralized baselines. Path planning and cost-matrix construction are
excluded.
"""
from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path as FilePath

import numpy as np

from .allocators import greedy_assign, hungarian, random_assign, resolve_conflicts
from .graphnet import build_observations
from .ippo import Model, TrainConfig, check_compatible, decide, train
from .pathing import astar, build_cost_matrix, travel_cost
from .world import ConfigError, GridWorld, ScenarioConfig, init_world, step

ALLOCATORS = ("policy", "hungarian", "greedy", "random")

RUN_COLUMNS = ("allocator", "n_agents", "m_tasks", "mode", "seed", "total_travel_cost",
               "success_rate", "alloc_time_mean_s", "tasks_completed", "mean_global_reward")
# wall-clock columns; everything else in the reports is a pure function of the inputs
TIMING_COLUMNS = ("alloc_time_mean_s", "alloc_time_total_s")


@dataclass
class EpisodeLog:
    total_travel_cost: float
    decision_rounds: int
    contested_rounds: int
    alloc_times: list[float]
    tasks_completed: int
    global_rewards: list[float]
    completed: list = field(default_factory=list)
    steps: int = 0


@dataclass
class MetricsRecord:
    total_travel_cost: float
    success_rate: float
    alloc_time_mean_s: float
    alloc_time_total_s: float
    episodes: int
    tasks_completed: float
    mean_global_reward: float
    per_episode: list[EpisodeLog] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("per_episode")
        return d


def _centralized_actions(world, cm, allocator: str, rng) -> tuple[list[int], float]:
    """Assign idle agents to waiting slots with a central solver; times the solve."""
    n = len(world.agents)
    actions = [0] * n
    idle = [i for i, a in enumerate(world.agents) if a.eligible]
    slots = [j for j, w in enumerate(world.waiting) if w]
    if not idle or not slots:
        return actions, 0.0
    sub = cm.raw[np.ix_(idle, slots)]
    t0 = time.perf_counter()
    if allocator == "hungarian":
        pairs = hungarian(sub)
    elif allocator == "greedy":
        pairs = greedy_assign(sub)
    else:
        pairs = random_assign(len(idle), len(slots), rng)
    elapsed = time.perf_counter() - t0
    for r, c in pairs:
        i, j = idle[r], slots[c]
        if cm.reachable[i, j]:
            actions[i] = j + 1
    return actions, elapsed


def run_episode(scenario: ScenarioConfig, allocator: str, seed: int,
                model: Model | None = None, world: GridWorld | None = None) -> EpisodeLog:
    """One full episode. ``world`` replaces the seeded initial state when given."""
    if allocator not in ALLOCATORS:
        raise ValueError(f"unknown allocator {allocator!r}")
    if allocator == "policy":
        if model is None:
            raise ValueError("the policy allocator needs a trained model")
        check_compatible(model, scenario)
    world_seed, alloc_seed = np.random.SeedSequence(int(seed)).generate_state(2, dtype=np.uint64)
    if world is None:
        world = init_world(scenario, int(world_seed))
    rng = np.random.default_rng(int(alloc_seed))
    log = EpisodeLog(0.0, 0, 0, [], 0, [])
    done = False
    while not done:
        cm = build_cost_matrix(world)
        if allocator == "policy":
            X = build_observations(world, cm)
            t0 = time.perf_counter()
            actions = decide(model, X)
            resolve_conflicts(actions, cm, [a.eligible for a in world.agents], world.waiting)
            elapsed = time.perf_counter() - t0
        else:
            actions, elapsed = _centralized_actions(world, cm, allocator, rng)
        res = step(world, actions, cost_matrix=cm)
        if res.outcome.any_request:
            log.decision_rounds += 1
            log.contested_rounds += int(res.outcome.contested)
            log.alloc_times.append(elapsed)
        log.global_rewards.append(res.global_reward)
        done = res.done
    log.completed = list(world.completed)
    log.tasks_completed = len(world.completed)
    log.total_travel_cost = world.travel_cost_total
    log.steps = world.clock
    return log


def audit_travel_cost(scenario: ScenarioConfig, seed: int, log: EpisodeLog) -> float:
    """Recompute the episode's travel cost from its logged assignments alone."""
    world = init_world(scenario, int(np.random.SeedSequence(int(seed)).generate_state(2, dtype=np.uint64)[0]))
    total = 0.0
    for rec in log.completed:
        path = astar(world.occupied, rec.start, rec.goal, rec.kind)
        total += travel_cost(path.length_m, rec.velocity)
    return total


def summarize(logs: list[EpisodeLog]) -> MetricsRecord:
    rounds = sum(l.decision_rounds for l in logs)
    contested = sum(l.contested_rounds for l in logs)
    times = [t for l in logs for t in l.alloc_times]
    return MetricsRecord(
        total_travel_cost=float(np.mean([l.total_travel_cost for l in logs])),
        success_rate=1.0 if rounds == 0 else 1.0 - contested / rounds,
        alloc_time_mean_s=float(np.mean(times)) if times else 0.0,
        alloc_time_total_s=float(np.mean([sum(l.alloc_times) for l in logs])),
        episodes=len(logs),
        tasks_completed=float(np.mean([l.tasks_completed for l in logs])),
        mean_global_reward=float(np.mean([np.mean(l.global_rewards) for l in logs])),
        per_episode=logs,
    )


def run_scenario(config: ScenarioConfig, allocator: str, episodes: int, seed: int,
                 model: Model | None = None) -> MetricsRecord:
    """Run ``episodes`` full episodes and average their metrics.

    Fixed mode runs until every task is complete (or the horizon); continuous
    mode runs the fixed horizon ``episode_len``.
    """
    seeds = np.random.SeedSequence(int(seed)).generate_state(episodes, dtype=np.uint64)
    if episodes == 1:
        seeds = [seed]
    logs = [run_episode(config, allocator, int(s), model) for s in seeds]
    return summarize(logs)


# ---------------------------------------------------------------- reports


def _fmt(values) -> str:
    return f"{np.mean(values):.4f} ± {np.std(values):.4f}"


@dataclass
class TableReport:
    runs: list[dict]
    cost_table: list[list[str]]
    secondary_table: list[list[str]]

    def cost_csv(self) -> str:
        return _to_csv(self.cost_table)

    def secondary_csv(self) -> str:
        return _to_csv(self.secondary_table)

    def runs_csv(self, include_timing: bool = True) -> str:
        cols = [c for c in RUN_COLUMNS if include_timing or c not in TIMING_COLUMNS]
        rows = [cols] + [[_cell(r[c]) for c in cols] for r in self.runs]
        return _to_csv(rows)

    def write(self, out_dir) -> list[FilePath]:
        out = FilePath(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {"runs.csv": self.runs_csv(), "table_cost.csv": self.cost_csv(),
                 "table_success_time.csv": self.secondary_csv()}
        for name, text in files.items():
            (out / name).write_text(text)
        return [out / n for n in files]


def _cell(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _to_csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def worker_count() -> int:
    """Process cap from ``SWARM_ALLOC_THREADS``; 1 (serial) when unset."""
    raw = os.environ.get("SWARM_ALLOC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"SWARM_ALLOC_THREADS must be an integer, got {raw!r}") from None


def _one_run(args) -> MetricsRecord:
    cfg, name, s, model = args
    return run_scenario(cfg, name, 1, s, model=model)


def compare_table(configs: list[ScenarioConfig], allocators: list[str], seeds: list[int],
                  models: dict[int, Model] | None = None, workers: int | None = None) -> TableReport:
    """Every allocator on every config for every seed.

    Cost table: rows are allocators, columns follow ``configs`` order and
    are labelled by agent count; cells are ``mean ± std`` over seeds. The
    secondary table holds success rate and allocation time in the same
    layout. ``models[k]`` supplies the policy for ``configs[k]``.

    Independent runs fan out over ``workers`` processes (default from
    ``SWARM_ALLOC_THREADS``). Results are identical to the serial order
    except for the wall-clock columns, which contention can inflate, so
    timing comparisons should use the serial default.
    """
    models = models or {}
    workers = worker_count() if workers is None else workers
    jobs = [(cfg, name, s, models.get(k)) for k, cfg in enumerate(configs)
            for name in allocators for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_one_run, jobs))
    else:
        records = [_one_run(j) for j in jobs]
    runs = []
    cells: dict[tuple[str, int], list[MetricsRecord]] = {}
    it = iter(records)
    for k, cfg in enumerate(configs):
        for name in allocators:
            for s in seeds:
                rec = next(it)
                cells.setdefault((name, k), []).append(rec)
                runs.append({
                    "allocator": name, "n_agents": cfg.n_agents, "m_tasks": cfg.task_slots,
                    "mode": cfg.mode, "seed": s, "total_travel_cost": rec.total_travel_cost,
                    "success_rate": rec.success_rate, "alloc_time_mean_s": rec.alloc_time_mean_s,
                    "tasks_completed": rec.tasks_completed,
                    "mean_global_reward": rec.mean_global_reward,
                })
    header = ["method"] + [str(c.n_agents) for c in configs]
    cost = [header] + [
        [name] + [_fmt([r.total_travel_cost for r in cells[(name, k)]]) for k in range(len(configs))]
        for name in allocators]
    secondary = [["metric"] + header]
    for metric, attr in (("success_rate", "success_rate"), ("alloc_time_s", "alloc_time_mean_s")):
        for name in allocators:
            secondary.append([metric, name] + [_fmt([getattr(r, attr) for r in cells[(name, k)]])
                                               for k in range(len(configs))])
    return TableReport(runs=runs, cost_table=cost, secondary_table=secondary)


def ablation_no_graphsage(config: ScenarioConfig, seed: int, train_config: TrainConfig | None = None,
                          total_steps: int = 50_000, episodes: int = 10,
                          models: tuple[Model, Model] | None = None) -> dict:
    """Full model versus a variant that embeds only its own observation.

    Both variants are trained (unless ``models`` is given) and evaluated on
    identical seeds. Returns absolute metrics for each and their deltas
    (full minus ablated).
    """
    train_config = train_config or TrainConfig()
    if models is None:
        full, _ = train(replace(train_config, use_graphsage=True), config, total_steps, seed)
        local, _ = train(replace(train_config, use_graphsage=False), config, total_steps, seed)
    else:
        full, local = models
    m_full = run_scenario(config, "policy", episodes, seed, model=full)
    m_local = run_scenario(config, "policy", episodes, seed, model=local)
    a, b = m_full.summary(), m_local.summary()
    return {"full": a, "no_graphsage": b,
            "delta": {k: a[k] - b[k] for k in a if k != "episodes"}}
