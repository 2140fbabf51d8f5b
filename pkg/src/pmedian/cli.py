"""``pmedian`` command-line entry point.

Exit codes: 0 success, 1 run failure (including partial experiment
failures), 2 invalid input (bad flags, config keys, instance files).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, resolve_config
from .distances import GRAPH, DistanceError, MatrixFileError, save_matrix
from .experiment import ALL_SCENARIOS, ExperimentPlan, cmd_eval, cmd_expand, cmd_experiment, cmd_solve
from .instance import DISTANCE_KINDS, WEIGHT_KINDS, InstanceError, load_instance, matrix_cache_path, read_site_ids
from .synth import SyntheticCityError, generate_synthetic_city

EXIT_OK, EXIT_FAILED, EXIT_INVALID = 0, 1, 2

log = logging.getLogger("pmedian")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from exc


def _scenarios(text: str) -> list[tuple[str, str]]:
    """``all`` or a comma list of ``distance:weight`` pairs."""
    if text.strip().lower() == "all":
        return list(ALL_SCENARIOS)
    out = []
    for item in text.split(","):
        dist, sep, weight = item.strip().lower().partition(":")
        if not sep or dist not in DISTANCE_KINDS or weight not in WEIGHT_KINDS:
            raise argparse.ArgumentTypeError(f"bad scenario {item!r}; use distance:weight, e.g. graph:citizens")
        out.append((dist, weight))
    return out


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmedian", description="p-median station location solver and experiment runner")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def instance_args(p, scenario=True):
        p.add_argument("--instance", required=True, type=Path, help="instance directory")
        if scenario:
            p.add_argument("--distance", choices=DISTANCE_KINDS, help="override meta.json distance")
            p.add_argument("--weight", choices=WEIGHT_KINDS, help="override meta.json weight model")

    g = sub.add_parser("gen-instance", help="write a synthetic city instance")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--customers", type=int, default=363)
    g.add_argument("--sites", type=int, default=2000)
    g.add_argument("--graph-density", type=float, default=0.8)
    g.add_argument("--p", type=int, default=23)
    g.add_argument("--out", required=True, type=Path)

    d = sub.add_parser("precompute-distances", help="compute and cache a distance matrix")
    instance_args(d, scenario=False)
    d.add_argument("--distance", choices=DISTANCE_KINDS, default=GRAPH)
    d.add_argument("--out", type=Path, help="cache file (default: inside the instance directory)")

    s = sub.add_parser("solve", help="run one algorithm once")
    instance_args(s)
    s.add_argument("--config", required=True, help="config file or preset:NAME")
    s.add_argument("--seed", type=int)
    s.add_argument("--time-budget", type=_positive_float)
    s.add_argument("--out", required=True, type=Path)

    e = sub.add_parser("experiment", help="seeded runs over a scenario matrix")
    instance_args(e, scenario=False)
    e.add_argument("--config", action="append", required=True, help="config file or preset:NAME (repeatable)")
    e.add_argument("--scenarios", type=_scenarios, default=list(ALL_SCENARIOS), help="'all' or distance:weight,...")
    e.add_argument("--runs", type=int, default=30)
    e.add_argument("--time-budget", type=_positive_float, default=60.0)
    e.add_argument("--seed", type=int, default=0, help="base seed")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--out", required=True, type=Path)

    x = sub.add_parser("expand", help="grow a fixed deployment to larger sizes")
    instance_args(x)
    x.add_argument("--config", default="preset:GA")
    x.add_argument("--baseline", type=Path, help="site ids to keep (default: baseline.txt)")
    x.add_argument("--targets", type=_int_list, default=[30, 35, 40, 45, 50])
    x.add_argument("--seeds", type=int, default=10)
    x.add_argument("--seed", type=int, default=0, help="base seed")
    x.add_argument("--time-budget", type=_positive_float)
    x.add_argument("--workers", type=int, default=1)
    x.add_argument("--out", required=True, type=Path)

    v = sub.add_parser("eval", help="evaluate a site list")
    instance_args(v)
    v.add_argument("--solution", type=Path, help="site ids, one per line")
    v.add_argument("--baseline", type=Path, help="alias for --solution")
    return parser


def _config(spec: str, args):
    overrides = {}
    if getattr(args, "seed", None) is not None and args.command == "solve":
        overrides["seed"] = args.seed
    if getattr(args, "time_budget", None) is not None:
        overrides["time_budget_s"] = args.time_budget
    return resolve_config(spec, **overrides)


def _run(args) -> int:
    if args.command == "gen-instance":
        path = generate_synthetic_city(args.seed, args.customers, args.sites, args.graph_density, out_dir=args.out, p=args.p)
        print(path)
        return EXIT_OK

    if args.command == "precompute-distances":
        inst = load_instance(args.instance, distance=args.distance, use_cache=False)
        target = args.out or matrix_cache_path(args.instance, args.distance)
        save_matrix(inst.distances, target)
        print(target)
        return EXIT_OK

    inst = load_instance(args.instance, distance=args.distance, weight=args.weight) if hasattr(args, "weight") else load_instance(args.instance)

    if args.command == "solve":
        config = _config(args.config, args)
        out = cmd_solve(inst, config, args.out)
        print(json.dumps({"fitness": out["fitness"], "mean_walk_m": out["mean_walk_m"]}))
        return EXIT_OK

    if args.command == "experiment":
        configs = []
        for spec in args.config:
            cfg = _config(spec, args)
            configs.append((cfg.algorithm, cfg))
        names = [n for n, _ in configs]
        if len(set(names)) != len(names):
            configs = [(f"{n}_{k}", c) for k, (n, c) in enumerate(configs)]
        plan = ExperimentPlan(
            instance=inst,
            configs=configs,
            scenarios=args.scenarios,
            runs=args.runs,
            time_budget_s=args.time_budget,
            base_seed=args.seed,
            out_dir=args.out,
            workers=args.workers,
        )
        out = cmd_experiment(plan)
        print(json.dumps({"runs": len(out["records"]), "failures": len(out["failures"])}))
        return EXIT_FAILED if out["failures"] else EXIT_OK

    if args.command == "expand":
        config = _config(args.config, args)
        if args.baseline is not None:
            baseline = inst.indices_for_ids(read_site_ids(args.baseline))
        elif inst.baseline is not None:
            baseline = list(inst.baseline)
        else:
            raise InstanceError("no baseline: pass --baseline or add baseline.txt to the instance")
        out = cmd_expand(inst, baseline, args.targets, config, seeds=args.seeds, base_seed=args.seed, out_dir=args.out, workers=args.workers)
        for row in out["rows"]:
            print(json.dumps(row))
        return EXIT_OK

    if args.command == "eval":
        path = args.solution or args.baseline
        if path is None:
            raise InstanceError("eval needs --solution FILE")
        print(json.dumps(cmd_eval(inst, path)))
        return EXIT_OK

    raise AssertionError(args.command)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        where = f" (key: {exc.key})" if exc.key else ""
        print(f"pmedian: config error{where}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (InstanceError, SyntheticCityError, MatrixFileError, DistanceError, ValueError) as exc:
        print(f"pmedian: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"pmedian: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except RuntimeError as exc:
        print(f"pmedian: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
