"""The five metaheuristics and a name-based dispatcher."""

from .common import RunResult, Trace, TracePoint, generate_initial, next_k
from .ga import run_ga
from .ils import run_ils
from .pso import run_pso
from .sa import run_sa
from .vns import run_vns

RUNNERS = {"GA": run_ga, "ILS": run_ils, "PSO": run_pso, "SA": run_sa, "VNS": run_vns}


def run(instance, config, observer=None, warm=None) -> RunResult:
    return RUNNERS[config.algorithm](instance, config, observer, warm)


__all__ = [
    "RUNNERS",
    "RunResult",
    "Trace",
    "TracePoint",
    "generate_initial",
    "next_k",
    "run",
    "run_ga",
    "run_ils",
    "run_pso",
    "run_sa",
    "run_vns",
]
