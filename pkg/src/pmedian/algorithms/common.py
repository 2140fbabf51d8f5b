"""Shared run machinery: budgets, traces, initial solutions, next() rules."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..config import GEN_RAND, GEN_RAND100, GEN_START, AlgorithmConfig, iteration_budget
from ..evaluation import AssignmentState, Solution, fitness_of
from ..localsearch import LocalSearchConfig, run_local_search
from ..neighborhoods import domain_for, shake_sites

K_CAP = 20


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    elapsed_ms: float
    best_fitness: float


@dataclass
class Trace:
    points: list = field(default_factory=list)

    def record(self, iteration: int, elapsed_ms: float, fitness: float) -> None:
        if not self.points or fitness < self.points[-1].best_fitness:
            self.points.append(TracePoint(iteration, elapsed_ms, float(fitness)))

    def close(self, iteration: int, elapsed_ms: float) -> None:
        if self.points and self.points[-1].iteration != iteration:
            self.points.append(TracePoint(iteration, elapsed_ms, self.points[-1].best_fitness))

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


@dataclass
class RunResult:
    algorithm: str
    seed: int
    solution: Solution
    fitness: float
    trace: Trace
    iterations: int
    wall_time_s: float


class RunContext:
    """Per-run state: random stream, stop rule, best-ever and trace.

    ``observer`` (if given) is called with every solution the algorithm
    produces, as a list of site indices.
    """

    def __init__(self, instance, config: AlgorithmConfig, observer: Optional[Callable] = None, warm=None):
        self.instance = instance
        self.warm = None if warm is None else list(warm)
        self.config = config
        self.D = instance.D
        self.w = instance.weights
        self.n_sites = instance.n_sites
        self.p = instance.p
        self.fixed = list(instance.fixed_sites)
        self.k_fixed = len(self.fixed)
        self.rng = np.random.default_rng(config.seed)
        self.max_iter = iteration_budget(config.iter_budget, instance.n_customers, instance.p)
        self.start = time.perf_counter()
        self.deadline = self.start + config.time_budget_s
        self.observer = observer
        self.trace = Trace()
        self.best_sites: list | None = None
        self.best_fitness = np.inf
        self.iteration = 0
        self._domain = None

    def initial(self) -> list:
        """First call returns the warm start (if any), later calls generate."""
        if self.warm is not None:
            warm, self.warm = self.warm, None
            return warm_start_sites(self.instance, warm, self.rng)
        return list(generate_initial(self.instance, self.config.generation, self.rng).sites)

    def elapsed_ms(self) -> float:
        return (time.perf_counter() - self.start) * 1000.0

    def expired(self) -> bool:
        return time.perf_counter() >= self.deadline

    def keep_going(self, i: int) -> bool:
        return i <= self.max_iter and not self.expired()

    @property
    def domain(self):
        if self._domain is None and self.config.domain is not None:
            kind, d = self.config.domain
            self._domain = domain_for(self.instance, kind, d)
        return self._domain

    def fitness(self, sites) -> float:
        return fitness_of(self.D, self.w, sites)

    def observe(self, sites) -> None:
        if self.observer is not None:
            self.observer(list(sites))

    def offer(self, sites, fitness: float, iteration: int) -> bool:
        """Update best-ever; returns True on strict improvement."""
        self.observe(sites)
        if fitness < self.best_fitness:
            self.best_fitness = float(fitness)
            self.best_sites = list(sites)
            self.trace.record(iteration, self.elapsed_ms(), fitness)
            return True
        return False

    def state(self, sites) -> AssignmentState:
        return AssignmentState(self.D, self.w, sites, self.k_fixed)

    def local_search(self, state: AssignmentState, ls: LocalSearchConfig) -> AssignmentState:
        return run_local_search(state, ls, self.instance, self.domain, self.deadline)

    def shake(self, sites, k: int, mode: str) -> list:
        return shake_sites(sites, self.k_fixed, k, mode, self.domain, self.n_sites, self.rng)

    def finish(self, iterations: int) -> RunResult:
        self.trace.close(iterations, self.elapsed_ms())
        sol = Solution(tuple(self.best_sites), self.k_fixed)
        return RunResult(
            algorithm=self.config.algorithm,
            seed=self.config.seed,
            solution=sol,
            fitness=float(self.best_fitness),
            trace=self.trace,
            iterations=iterations,
            wall_time_s=time.perf_counter() - self.start,
        )


def warm_start_sites(instance, warm, rng) -> list:
    """Fixed prefix, then ``warm``'s other sites, padded with random unused sites."""
    fixed = list(instance.fixed_sites)
    taken = set(fixed)
    sites = fixed + [int(s) for s in warm if s not in taken][: instance.p - len(fixed)]
    taken = set(sites)
    while len(sites) < instance.p:
        j = int(rng.integers(instance.n_sites))
        if j not in taken:
            taken.add(j)
            sites.append(j)
    return sites


def random_sites(instance, rng) -> list:
    fixed = list(instance.fixed_sites)
    need = instance.p - len(fixed)
    if need == 0:
        return fixed
    taken = set(fixed)
    if instance.n_sites - len(fixed) <= 4 * need:
        pool = np.array([j for j in range(instance.n_sites) if j not in taken], dtype=np.intp)
        return fixed + [int(j) for j in rng.choice(pool, size=need, replace=False)]
    out = []
    while len(out) < need:
        j = int(rng.integers(instance.n_sites))
        if j not in taken:
            taken.add(j)
            out.append(j)
    return fixed + out


def greedy_add(D: np.ndarray, w: np.ndarray, start: list, p: int, n_sites: int, candidates=None) -> list:
    """Grow ``start`` to ``p`` sites, each time adding the site with the lowest
    resulting objective (lowest index on ties)."""
    sites = list(start)
    cur = D[:, sites].min(axis=1) if sites else np.full(D.shape[0], np.inf)
    pool = np.arange(n_sites, dtype=np.intp) if candidates is None else np.asarray(candidates, dtype=np.intp)
    pool = np.setdiff1d(pool, np.asarray(sites, dtype=np.intp))
    while len(sites) < p and pool.size:
        best_val, best_j = np.inf, -1
        for s in range(0, pool.size, 4096):
            chunk = pool[s : s + 4096]
            vals = w @ np.minimum(cur[:, None], D[:, chunk])
            k = int(np.argmin(vals))
            if vals[k] < best_val:
                best_val, best_j = vals[k], int(chunk[k])
        sites.append(best_j)
        cur = np.minimum(cur, D[:, best_j])
        pool = pool[pool != best_j]
    return sites


def generate_initial(instance, strategy: str, rng) -> Solution:
    """Initial solution: RAND, RAND100 (best of 100 random) or START (greedy add)."""
    k = len(instance.fixed_sites)
    if strategy == GEN_RAND:
        return Solution(tuple(random_sites(instance, rng)), k)
    if strategy == GEN_RAND100:
        best, best_f = None, np.inf
        for _ in range(100):
            sites = random_sites(instance, rng)
            f = fitness_of(instance.D, instance.weights, sites)
            if f < best_f:
                best, best_f = sites, f
        return Solution(tuple(best), k)
    if strategy == GEN_START:
        sites = greedy_add(instance.D, instance.weights, list(instance.fixed_sites), instance.p, instance.n_sites)
        return Solution(tuple(sites), k)
    raise ValueError(f"unknown generation strategy {strategy!r}")


def next_k(rule: str, i: int, cap: int, rng) -> int:
    """How many sites to shake at step ``i``.

    SEQ cycles 1..cap; DVNS draws from a geometric law (success 0.5)
    truncated to [1, cap].
    """
    cap = max(1, cap)
    if rule == "SEQ":
        return (i - 1) % cap + 1
    if rule == "DVNS":
        u = rng.random()
        # inverse CDF of P(k) proportional to 0.5**(k-1), k = 1..cap
        total = 1.0 - 0.5**cap
        k = int(np.ceil(np.log1p(-u * total) / np.log(0.5)))
        return min(max(k, 1), cap)
    raise ValueError(f"unknown next rule {rule!r}")
