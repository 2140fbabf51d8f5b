"""Solve / experiment / expand / eval orchestration behind the CLI.

Result files are a pure function of the inputs and seeds. Anything
wall-clock related (timestamps, run times, time-stamped traces) goes to
``manifest.json`` only.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import algorithms
from .config import AlgorithmConfig, config_to_text
from .distances import EUCLIDEAN, GRAPH
from .evaluation import Solution, check_solution, evaluate, mean_walk_distance
from .instance import CITIZENS, DEMAND, UNIFORM, Instance, InstanceValidationError, read_site_ids
from .stats import RunRecord, ecdf, pairwise_tests, percent_improvement, summarize

log = logging.getLogger(__name__)

ALL_SCENARIOS = tuple((d, w) for d in (EUCLIDEAN, GRAPH) for w in (UNIFORM, CITIZENS, DEMAND))


# ---------------------------------------------------------------- file helpers


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def write_manifest(out_dir, payload: dict) -> None:
    payload = dict(payload)
    payload["timestamp"] = datetime.now(timezone.utc).isoformat()
    payload["clock"] = "budgets are wall-clock seconds (CPU time approximated)"
    payload["python"] = platform.python_version()
    atomic_write(Path(out_dir) / "manifest.json", json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def report_view(instance: Instance) -> Instance:
    """Walking-distance view: street distances (if available) with citizen weights."""
    kind = GRAPH if instance.graph is not None or GRAPH in instance._matrices else EUCLIDEAN
    return instance.with_scenario(kind, CITIZENS)


# ---------------------------------------------------------------- solve


def solve(instance: Instance, config: AlgorithmConfig, warm: Sequence[int] | None = None, observer=None):
    return algorithms.run(instance, config, observer, warm)


def write_solution_files(out_dir, instance: Instance, result) -> None:
    out = Path(out_dir)
    ids = instance.site_ids(result.solution.sites)
    atomic_write(out / "solution.txt", "".join(f"{i}\n" for i in ids))
    rows = [(s.id, s.lat, s.lon) for s in (instance.sites[j] for j in result.solution.sites)]
    atomic_write(out / "solution.csv", csv_text(["id", "lat", "lon"], rows))
    atomic_write(out / "trace.csv", csv_text(["iteration", "best_fitness"], [(t.iteration, t.best_fitness) for t in result.trace]))


def cmd_solve(instance: Instance, config: AlgorithmConfig, out_dir) -> dict:
    result = solve(instance, config)
    write_solution_files(out_dir, instance, result)
    walk = mean_walk_distance(report_view(instance), result.solution, report_view(instance).weight_model)
    write_manifest(
        out_dir,
        {
            "command": "solve",
            "instance": str(instance.source),
            "config": config_to_text(config),
            "fitness": result.fitness,
            "mean_walk_m": walk,
            "iterations": result.iterations,
            "wall_time_s": result.wall_time_s,
            "trace_elapsed_ms": [(t.elapsed_ms, t.best_fitness) for t in result.trace],
        },
    )
    return {"fitness": result.fitness, "mean_walk_m": walk, "result": result}


# ---------------------------------------------------------------- eval


def read_solution_ids(instance: Instance, path) -> list[int]:
    ids = read_site_ids(path)
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise InstanceValidationError(f"duplicate site ids in {path}: {dup}")
    return instance.indices_for_ids(ids)


def cmd_eval(instance: Instance, solution_file) -> dict:
    """Objective under the instance's scenario plus the walking-distance report.

    A file whose length differs from p is evaluated with p set to its length.
    """
    idx = read_solution_ids(instance, solution_file)
    if not idx:
        raise InstanceValidationError("solution file lists no sites")
    fixed = list(instance.fixed_sites)
    if len(idx) == instance.p and idx[: len(fixed)] == fixed:
        inst = instance
    else:
        inst = instance.with_p(len(idx), ())
    sol = Solution(tuple(idx), len(inst.fixed_sites))
    fitness = evaluate(inst, sol)
    view = report_view(inst)
    walk = mean_walk_distance(view, sol, view.weight_model)
    return {"fitness": fitness, "mean_walk_m": walk, "p": len(idx), "walk_distance": view.distance_kind}


# ---------------------------------------------------------------- experiment


@dataclass
class ExperimentPlan:
    instance: Instance
    configs: list  # (name, AlgorithmConfig)
    scenarios: list = field(default_factory=lambda: list(ALL_SCENARIOS))
    runs: int = 30
    time_budget_s: float = 60.0
    base_seed: int = 0
    out_dir: Path = Path("results")
    workers: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not self.time_budget_s > 0:
            raise ValueError("time budget must be > 0")
        if not self.scenarios:
            raise ValueError("scenario matrix is empty")
        if not self.configs:
            raise ValueError("no algorithms given")
        self.out_dir = Path(self.out_dir)


_WORKER: dict = {}


def _init_worker(instance: Instance) -> None:
    _WORKER.clear()
    _WORKER["instance"] = instance


def _strip_caches(instance: Instance) -> Instance:
    instance._domains.clear()
    return instance


def _scenario_view(base: Instance, dist: str, weight: str) -> Instance:
    key = ("view", dist, weight)
    if key not in _WORKER:
        _WORKER[key] = base.with_scenario(dist, weight)
    return _WORKER[key]


def _run_cell(task) -> dict:
    dist, weight, name, config, warm, p, fixed = task
    base = _WORKER["instance"]
    inst = _scenario_view(base, dist, weight)
    if p is not None:
        inst = inst.with_p(p, fixed)
    try:
        result = solve(inst, config, warm)
        view = report_view(inst)
        walk = mean_walk_distance(view, result.solution, view.weight_model)
    except Exception as exc:  # a failed cell is recorded, not fatal
        log.exception("cell %s/%s/%s seed %s failed", dist, weight, name, config.seed)
        return {"ok": False, "distance": dist, "weight": weight, "algorithm": name, "seed": config.seed, "error": repr(exc)}
    return {
        "ok": True,
        "distance": dist,
        "weight": weight,
        "algorithm": name,
        "seed": config.seed,
        "fitness": result.fitness,
        "mean_walk_m": walk,
        "iterations": result.iterations,
        "wall_time_s": result.wall_time_s,
        "sites": list(result.solution.sites),
        "site_ids": inst.site_ids(result.solution.sites),
        "trace": [(t.iteration, t.elapsed_ms, t.best_fitness) for t in result.trace],
    }


def _execute(instance: Instance, tasks: list, workers: int) -> list[dict]:
    if workers <= 1 or len(tasks) <= 1:
        _init_worker(instance)
        return [_run_cell(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(_strip_caches(instance),)) as pool:
        return list(pool.map(_run_cell, tasks))


def _prepare(instance: Instance, scenarios) -> None:
    # compute every needed matrix once, before forking workers
    for dist, weight in scenarios:
        instance.with_scenario(dist, weight)


def _record_json(r: dict) -> str:
    payload = {
        "distance": r["distance"],
        "weight": r["weight"],
        "algorithm": r["algorithm"],
        "seed": r["seed"],
        "final_fitness": r["fitness"],
        "mean_walk_m": r["mean_walk_m"],
        "solution": r["site_ids"],
        "trace": [[it, f] for it, _, f in r["trace"]],
    }
    return json.dumps(payload, indent=1) + "\n"


def cmd_experiment(plan: ExperimentPlan) -> dict:
    instance = plan.instance
    _prepare(instance, plan.scenarios)
    tasks = []
    for dist, weight in plan.scenarios:
        for name, cfg in plan.configs:
            for r in range(plan.runs):
                seeded = cfg.replace(seed=plan.base_seed + r, time_budget_s=plan.time_budget_s)
                tasks.append((dist, weight, name, seeded, None, None, ()))
    results = _execute(instance, tasks, plan.workers)

    out = plan.out_dir
    records, failures, timing = [], [], {}
    for r in results:
        key = f"{r['distance']}_{r['weight']}/{r['algorithm']}/seed_{r['seed']}"
        if not r["ok"]:
            failures.append({"cell": key, "error": r["error"]})
            continue
        atomic_write(out / "runs" / f"{key}.json", _record_json(r))
        timing[key] = {"wall_time_s": r["wall_time_s"], "iterations": r["iterations"], "trace_elapsed_ms": [(e, f) for _, e, f in r["trace"]]}
        records.append(
            RunRecord(
                r["distance"], r["weight"], r["algorithm"], r["seed"], r["fitness"], r["mean_walk_m"], r["iterations"],
                r["wall_time_s"], [(e, f) for _, e, f in r["trace"]],
            )
        )

    if records:
        summary = summarize(records)
        header = list(summary[0].keys())
        atomic_write(out / "summary.csv", csv_text(header, [[row[h] for h in header] for row in summary]))
        tests = pairwise_tests(records)
        atomic_write(
            out / "tests.csv",
            csv_text(
                ["distance", "weight", "pair", "statistic", "raw_p", "corrected_p"],
                [[t["distance"], t["weight"], t["pair"], t["statistic"], t["raw_p"], t["corrected_p"]] for t in tests],
            ),
        )
        if instance.baseline is not None:
            atomic_write(out / "ecdf.csv", _baseline_ecdf(instance, records))
    write_manifest(
        out,
        {
            "command": "experiment",
            "instance": str(instance.source),
            "runs": plan.runs,
            "time_budget_s": plan.time_budget_s,
            "base_seed": plan.base_seed,
            "workers": plan.workers,
            "scenarios": plan.scenarios,
            "configs": {name: config_to_text(cfg) for name, cfg in plan.configs},
            "failures": failures,
            "timing": timing,
        },
    )
    return {"records": records, "failures": failures}


def baseline_fitness(instance: Instance, dist: str, weight: str) -> float:
    view = instance.with_scenario(dist, weight)
    base = list(instance.baseline)
    view = view.with_p(len(base), ())
    return evaluate(view, Solution(tuple(base), 0))


def _baseline_ecdf(instance: Instance, records) -> str:
    rows = []
    groups: dict = {}
    for r in records:
        groups.setdefault((r.distance, r.weight, r.algorithm), []).append(r.final_fitness)
    for dist, weight in sorted({(r.distance, r.weight) for r in records}):
        base = baseline_fitness(instance, dist, weight)
        algos = sorted(a for d, w, a in groups if (d, w) == (dist, weight))
        curves = [("baseline", [base])] + [(a, groups[(dist, weight, a)]) for a in algos]
        for name, fits in curves:
            for value, frac in ecdf(percent_improvement(base, f) for f in fits):
                rows.append((dist, weight, name, value, frac))
    return csv_text(["distance", "weight", "algorithm", "improvement_pct", "fraction"], rows)


# ---------------------------------------------------------------- expansion


def cmd_expand(
    instance: Instance,
    baseline: Sequence[int],
    targets: Sequence[int],
    config: AlgorithmConfig,
    seeds: int = 10,
    base_seed: int = 0,
    out_dir=None,
    workers: int = 1,
) -> dict:
    """Grow an existing deployment to each target size, keeping it fixed.

    Each target is warm-started from the best solution of the previous
    (smaller) target, so best fitness is non-increasing across targets.
    """
    baseline = [int(j) for j in baseline]
    if len(set(baseline)) != len(baseline):
        raise InstanceValidationError("baseline has duplicate sites")
    targets = sorted(int(t) for t in targets)
    if not targets:
        raise ValueError("no targets given")
    if targets[0] <= len(baseline):
        raise ValueError(f"target {targets[0]} must exceed the baseline size {len(baseline)}")
    if targets[-1] > instance.n_sites:
        raise ValueError(f"target {targets[-1]} exceeds the number of sites")
    if seeds < 1:
        raise ValueError("seeds must be >= 1")

    scenario = (instance.distance_kind, instance.weight_model.kind)
    base_inst = instance.with_p(len(baseline), baseline)
    base_sol = Solution(tuple(baseline), len(baseline))
    base_fit = evaluate(base_inst, base_sol)
    view = report_view(base_inst)
    base_walk = mean_walk_distance(view, base_sol, view.weight_model)

    rows = [
        {"target": len(baseline), "best_fitness": base_fit, "mean_walk_best_m": base_walk, "mean_walk_avg_m": base_walk,
         "reduction_best_pct": 0.0, "reduction_avg_pct": 0.0}
    ]
    solutions = {len(baseline): baseline}
    timing = {}
    warm = baseline
    _prepare(instance, [scenario])
    for t in targets:
        tasks = [
            (scenario[0], scenario[1], config.algorithm, config.replace(seed=base_seed + s), warm, t, tuple(baseline))
            for s in range(seeds)
        ]
        results = _execute(instance, tasks, workers)
        ok = [r for r in results if r["ok"]]
        if not ok:
            raise RuntimeError(f"every run failed for target {t}: {results[0].get('error')}")
        best = min(ok, key=lambda r: (r["fitness"], r["seed"]))
        walks = [r["mean_walk_m"] for r in ok]
        avg = float(np.mean(walks))
        rows.append(
            {
                "target": t,
                "best_fitness": best["fitness"],
                "mean_walk_best_m": best["mean_walk_m"],
                "mean_walk_avg_m": avg,
                "reduction_best_pct": percent_improvement(base_walk, best["mean_walk_m"]),
                "reduction_avg_pct": percent_improvement(base_walk, avg),
            }
        )
        solutions[t] = best["sites"]
        timing[t] = {r["seed"]: r["wall_time_s"] for r in ok}
        warm = best["sites"]

    if out_dir is not None:
        out = Path(out_dir)
        header = list(rows[0].keys())
        atomic_write(out / "expansion.csv", csv_text(header, [[r[h] for h in header] for r in rows]))
        for t, sites in solutions.items():
            atomic_write(out / "solutions" / f"stations_{t}.txt", "".join(f"{i}\n" for i in instance.site_ids(sites)))
        write_manifest(
            out,
            {
                "command": "expand",
                "instance": str(instance.source),
                "scenario": scenario,
                "seeds_per_target": seeds,
                "base_seed": base_seed,
                "config": config_to_text(config),
                "timing": timing,
            },
        )
    return {"rows": rows, "solutions": solutions, "baseline_fitness": base_fit, "baseline_walk_m": base_walk}
