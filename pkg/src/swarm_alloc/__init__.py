"""Decentralized multi-agent task allocation on a 3D grid.

GraphSAGE agent embeddings feed independently trained PPO policies; a
reservation-based A* planner moves agents, and Hungarian / greedy / random
allocators serve as baselines.
"""
__version__ = "0.1.0"

from .allocators import (
    AllocationOutcome, assignment_total, greedy_assign, hungarian, random_assign,
    resolve_conflicts,
)
from .bench import (
    MetricsRecord, TableReport, ablation_no_graphsage, compare_table, run_episode, run_scenario,
)
from .graphnet import SageParams, build_observation, build_observations, sage_forward
from .ippo import (
    Model, TrainConfig, compute_gae, decide, evaluate, init_model, load_checkpoint,
    save_checkpoint, train,
)
from .pathing import (
    CostMatrix, Path, ReservationTable, advance, astar, build_cost_matrix,
    normalize_cost, travel_cost,
)
from .policy import MlpParams, policy_forward, sample_action, value_forward
from .rewards import RewardConfig, compute_rewards
from .world import (
    ConfigError, GridWorld, ScenarioConfig, init_world, replace_task, step,
)
