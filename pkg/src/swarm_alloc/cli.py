"""Command-line entry point: ``swarm-alloc {train,eval,bench,ablate}``.

The config document is the scenario JSON, optionally with a ``"train"``
object holding training hyperparameters. ``--set key=value`` overrides a
field by dotted path (``train.gamma=0.9``); bare keys are looked up in the
scenario first, then in ``train``. Exit codes: 0 ok, 1 configuration
error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import sys
from dataclasses import fields
from pathlib import Path as FilePath

from . import __version__
from .bench import ALLOCATORS, RUN_COLUMNS, ablation_no_graphsage, compare_table, run_scenario
from .ippo import (
    CURVE_COLUMNS, TrainConfig, check_compatible, load_checkpoint, save_checkpoint, train,
)
from .world import ConfigError, ScenarioConfig

SCENARIO_KEYS = ("dims", "agents", "task_slots", "obstacle_density", "mode",
                 "episode_len", "blockage_threshold")
TRAIN_KEYS = tuple(f.name for f in fields(TrainConfig))


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply ``key=value`` overrides in order (last one wins)."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value: {item!r}")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) == 1:
            if parts[0] in SCENARIO_KEYS:
                parts = parts
            elif parts[0] in TRAIN_KEYS:
                parts = ["train", parts[0]]
            else:
                raise ConfigError(f"unknown override key: {key}")
        elif parts[0] == "train":
            if len(parts) != 2 or parts[1] not in TRAIN_KEYS:
                raise ConfigError(f"unknown override key: {key}")
        elif parts[0] not in SCENARIO_KEYS:
            raise ConfigError(f"unknown override key: {key}")
        target = doc
        for p in parts[:-1]:
            if isinstance(target, list):
                target = target[int(p)]
            else:
                target = target.setdefault(p, {})
        last = parts[-1]
        if isinstance(target, list):
            target[int(last)] = parse_value(raw)
        else:
            target[last] = parse_value(raw)
    return doc


def load_document(path, overrides=()) -> tuple[dict, ScenarioConfig, TrainConfig]:
    try:
        doc = json.loads(FilePath(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    doc = apply_overrides(doc, list(overrides))
    return doc, *configs_from(doc)


def configs_from(doc: dict) -> tuple[ScenarioConfig, TrainConfig]:
    scenario = ScenarioConfig.from_dict(doc)
    try:
        tc = TrainConfig.from_dict(doc.get("train", {}))
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return scenario, tc


def parse_seeds(text: str) -> list[int]:
    """``"1..10"`` (inclusive range) or ``"1,2,5"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(s) for s in text.split(",") if s]
    except ValueError:
        raise ConfigError(f"cannot parse seeds {text!r}") from None


def _write_manifest(out: FilePath, subcommand: str, docs, seed, extra: dict) -> None:
    manifest = {"version": __version__, "subcommand": subcommand, "seed": seed,
                "config": docs, "args": extra}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _cell(v):
    return repr(v) if isinstance(v, float) else v


def cmd_train(doc, scenario, tc, seed, out: FilePath, steps: int) -> None:
    model, curve = train(tc, scenario, steps, seed)
    save_checkpoint(model, out / "checkpoint.json")
    rows = [list(CURVE_COLUMNS)] + [[_cell(r[c]) for c in CURVE_COLUMNS] for r in curve]
    (out / "curve.csv").write_text(_csv(rows))


def cmd_eval(scenario, seed, out: FilePath, checkpoint, episodes: int) -> None:
    model = load_checkpoint(checkpoint)
    check_compatible(model, scenario)
    rec = run_scenario(scenario, "policy", episodes, seed, model=model)
    rows = [list(RUN_COLUMNS)]
    for k, ep in enumerate(rec.per_episode):
        rows.append(["policy", scenario.n_agents, scenario.task_slots, scenario.mode, f"{seed}:{k}",
                     _cell(ep.total_travel_cost),
                     _cell(1.0 - ep.contested_rounds / ep.decision_rounds if ep.decision_rounds else 1.0),
                     _cell(sum(ep.alloc_times) / len(ep.alloc_times) if ep.alloc_times else 0.0),
                     ep.tasks_completed,
                     _cell(sum(ep.global_rewards) / len(ep.global_rewards))])
    (out / "metrics.csv").write_text(_csv(rows))
    (out / "summary.json").write_text(json.dumps(rec.summary(), indent=2, sort_keys=True))


def cmd_bench(scenarios, seeds, out: FilePath, allocators, checkpoint) -> None:
    models = {}
    if "policy" in allocators:
        if checkpoint is None:
            raise ConfigError("the policy allocator needs --checkpoint")
        model = load_checkpoint(checkpoint)
        for k, sc in enumerate(scenarios):
            check_compatible(model, sc)
            models[k] = model
    report = compare_table(scenarios, allocators, seeds, models)
    report.write(out)


def cmd_ablate(scenario, tc, seed, out: FilePath, steps, episodes, checkpoint, ablated) -> None:
    models = None
    if checkpoint or ablated:
        if not (checkpoint and ablated):
            raise ConfigError("ablate needs both --checkpoint and --ablated-checkpoint, or neither")
        models = (load_checkpoint(checkpoint), load_checkpoint(ablated))
    result = ablation_no_graphsage(scenario, seed, tc, total_steps=steps, episodes=episodes,
                                   models=models)
    keys = [k for k in result["full"] if k != "episodes"]
    rows = [["variant"] + keys]
    for variant in ("full", "no_graphsage", "delta"):
        rows.append([variant] + [_cell(result[variant][k]) for k in keys])
    (out / "ablation.csv").write_text(_csv(rows))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swarm-alloc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, multi_config=False):
        if multi_config:
            sp.add_argument("--config", action="append", required=True,
                            help="scenario JSON; repeat for several table columns")
        else:
            sp.add_argument("--config", required=True, help="scenario JSON")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field (repeatable)")

    sp = sub.add_parser("train", help="train IPPO policies")
    common(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--steps", type=int, default=50_000, help="environment steps")

    sp = sub.add_parser("eval", help="evaluate a checkpoint greedily")
    common(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--episodes", type=int, default=10)

    sp = sub.add_parser("bench", help="allocator comparison tables")
    common(sp, multi_config=True)
    sp.add_argument("--allocators", default="hungarian,greedy,random")
    sp.add_argument("--seeds", default="1..10")
    sp.add_argument("--checkpoint", default=None, help="model for the 'policy' allocator")

    sp = sub.add_parser("ablate", help="GraphSAGE vs local-only ablation")
    common(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--steps", type=int, default=50_000)
    sp.add_argument("--episodes", type=int, default=10)
    sp.add_argument("--checkpoint", default=None)
    sp.add_argument("--ablated-checkpoint", default=None)
    return p


def run(args) -> None:
    out = FilePath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.subcommand == "bench":
        allocators = [a.strip() for a in args.allocators.split(",") if a.strip()]
        bad = [a for a in allocators if a not in ALLOCATORS]
        if bad:
            raise ConfigError(f"unknown allocator: {bad[0]}")
        seeds = parse_seeds(args.seeds)
        loaded = [load_document(c, args.set) for c in args.config]
        scenarios = [sc for _, sc, _ in loaded]
        cmd_bench(scenarios, seeds, out, allocators, args.checkpoint)
        _write_manifest(out, "bench", [d for d, _, _ in loaded], None,
                        {"allocators": allocators, "seeds": seeds, "checkpoint": args.checkpoint})
        return

    doc, scenario, tc = load_document(args.config, args.set)
    if args.subcommand == "train":
        cmd_train(doc, scenario, tc, args.seed, out, args.steps)
        extra = {"steps": args.steps}
    elif args.subcommand == "eval":
        cmd_eval(scenario, args.seed, out, args.checkpoint, args.episodes)
        extra = {"checkpoint": args.checkpoint, "episodes": args.episodes}
    else:
        cmd_ablate(scenario, tc, args.seed, out, args.steps, args.episodes,
                   args.checkpoint, args.ablated_checkpoint)
        extra = {"steps": args.steps, "episodes": args.episodes, "checkpoint": args.checkpoint,
                 "ablated_checkpoint": args.ablated_checkpoint}
    _write_manifest(out, args.subcommand, doc, args.seed, extra)


def argv_from_manifest(manifest_path, out_dir) -> list[str]:
    """Rebuild a command line that repeats the run recorded in a manifest.

    Config documents are re-materialized next to the new outputs.
    """
    man = json.loads(FilePath(manifest_path).read_text())
    out = FilePath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    docs = man["config"] if man["subcommand"] == "bench" else [man["config"]]
    argv = [man["subcommand"]]
    for k, doc in enumerate(docs):
        path = out / f"config_{k}.json"
        path.write_text(json.dumps(doc, sort_keys=True))
        argv += ["--config", str(path)]
    argv += ["--out", str(out)]
    a = man["args"]
    if man["subcommand"] == "bench":
        argv += ["--allocators", ",".join(a["allocators"]),
                 "--seeds", ",".join(str(s) for s in a["seeds"])]
        if a.get("checkpoint"):
            argv += ["--checkpoint", a["checkpoint"]]
        return argv
    argv += ["--seed", str(man["seed"])]
    for key in ("steps", "episodes", "checkpoint"):
        if a.get(key) is not None:
            argv += [f"--{key}", str(a[key])]
    if a.get("ablated_checkpoint"):
        argv += ["--ablated-checkpoint", a["ablated_checkpoint"]]
    return argv


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
