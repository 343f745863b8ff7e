"""Walk through a single allocation round by hand.

Builds a small mixed ground/aerial world, prints the travel-time matrix,
then lets the three centralized baselines and one (untrained) set of
decentralized policies allocate the same state.
"""
import numpy as np

from swarm_alloc import (
    ScenarioConfig, assignment_total, build_cost_matrix, build_observations, decide,
    greedy_assign, hungarian, init_model, init_world, random_assign, resolve_conflicts,
)

cfg = ScenarioConfig(dims=(12, 12, 4), task_slots=4,
                     agents=[{"kind": "ground", "count": 2}, {"kind": "aerial", "count": 2}])
world = init_world(cfg, seed=3)

for a in world.agents:
    print(f"agent {a.id}: {a.kind:6s} at {a.position}, speed {a.velocity} m/step")
for j, t in enumerate(world.tasks):
    print(f"slot {j}: task {t.id} at {t.location}")

cm = build_cost_matrix(world)
np.set_printoptions(precision=2, suppress=True)
print("\ntravel time (s), rows = agents, cols = slots")
print(cm.raw)
print("normalized to [-1, 1]")
print(cm.normalized)

rng = np.random.default_rng(0)
for name, pairs in (("hungarian", hungarian(cm.raw)), ("greedy", greedy_assign(cm.raw)),
                    ("random", random_assign(4, 4, rng))):
    print(f"{name:9s} {pairs}  total {assignment_total(cm.raw, pairs):.2f} s")

# decentralized: every agent picks a slot from its own embedding, then conflicts are settled
model = init_model(cfg.n_agents, cfg.task_slots, np.random.default_rng(1))
X = build_observations(world, cm)
requests = decide(model, X)
outcome = resolve_conflicts(requests, cm, [a.eligible for a in world.agents], world.waiting)
print("\npolicy requests (0 = wait):", requests)
print("granted:", outcome.assignments, " conflicts:", outcome.conflicts)
