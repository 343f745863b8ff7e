"""Centralized baselines side by side as the team grows.

Fixed-task episodes on a 20x20x5 volume with N agents and N tasks; each
cell of the printed table is mean +/- std travel cost over ten seeds.
"""
from swarm_alloc import ScenarioConfig, compare_table

configs = [
    ScenarioConfig(dims=(20, 20, 5), task_slots=n, mode="fixed",
                   agents=[{"kind": "ground", "count": n // 2}, {"kind": "aerial", "count": n - n // 2}])
    for n in (2, 4, 8)
]
report = compare_table(configs, ["hungarian", "greedy", "random"], seeds=list(range(1, 11)))
print(report.cost_csv())
print(report.secondary_csv())
