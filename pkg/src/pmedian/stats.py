"""Run-set summaries, improvement over a baseline, and the rank-sum test."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

EXACT_MAX_TOTAL = 12


@dataclass
class RunRecord:
    distance: str
    weight: str
    algorithm: str
    seed: int
    final_fitness: float
    mean_walk_m: float
    iterations: int = 0
    wall_time_s: float = 0.0
    trace: list = field(default_factory=list)  # (elapsed_ms, best_fitness)

    @property
    def scenario(self) -> tuple[str, str]:
        return (self.distance, self.weight)


def percent_improvement(baseline_fitness: float, run_fitness: float) -> float:
    if not baseline_fitness > 0:
        raise ValueError("baseline fitness must be positive")
    return 100.0 * (baseline_fitness - run_fitness) / baseline_fitness


def ecdf(values) -> list[tuple[float, float]]:
    """Step points (value, fraction of samples <= value), one per distinct value."""
    xs = sorted(float(v) for v in values)
    if not xs:
        raise ValueError("ecdf of an empty sample")
    n = len(xs)
    out = []
    for k, x in enumerate(xs, start=1):
        if k < n and xs[k] == x:
            continue
        out.append((x, k / n))
    return out


def midranks(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_tails(ranks: np.ndarray, n_a: int, observed: float) -> tuple[float, float]:
    """P(W <= observed), P(W >= observed) for the rank sum of a random n_a-subset.

    Counts subsets by dynamic programming over doubled (integer) midranks.
    """
    r2 = np.rint(2 * ranks).astype(int)
    total2 = int(r2.sum())
    # ways[k][s]: number of k-subsets of the items seen so far with doubled sum s
    ways = np.zeros((n_a + 1, total2 + 1), dtype=object)
    ways[0][0] = 1
    for r in r2:
        for k in range(n_a, 0, -1):
            ways[k][r:] = ways[k][r:] + ways[k - 1][: total2 + 1 - r]
    dist = ways[n_a]
    obs2 = int(round(2 * observed))
    count = sum(dist)
    low = sum(dist[: obs2 + 1])
    high = sum(dist[obs2:])
    return low / count, high / count


def wilcoxon_rank_sum(a, b, alternative: str = "two-sided", exact: bool | None = None) -> tuple[float, float]:
    """Wilcoxon rank-sum (Mann-Whitney) test with midranks for ties.

    Returns (W, p) where W is the rank sum of ``a``. ``alternative`` is
    'two-sided', 'less' (a tends smaller) or 'greater'. Exact enumeration is
    used when len(a) + len(b) <= 12 unless ``exact`` says otherwise; larger
    samples use the tie-corrected normal approximation with continuity
    correction.
    """
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    if not a or not b:
        raise ValueError("both samples must be non-empty")
    n_a, n_b = len(a), len(b)
    n = n_a + n_b
    ranks = midranks(a + b)
    w = float(ranks[:n_a].sum())
    if exact is None:
        exact = n <= EXACT_MAX_TOTAL

    if exact:
        p_low, p_high = _exact_tails(ranks, n_a, w)
    else:
        mean = n_a * (n + 1) / 2.0
        _, counts = np.unique(ranks, return_counts=True)
        tie = float((counts**3 - counts).sum())
        var = n_a * n_b / 12.0 * ((n + 1) - tie / (n * (n - 1))) if n > 1 else 0.0
        if var <= 0:
            return w, 1.0
        sd = math.sqrt(var)
        norm = NormalDist()
        p_low = norm.cdf((w - mean + 0.5) / sd)
        p_high = 1.0 - norm.cdf((w - mean - 0.5) / sd)

    if alternative == "less":
        p = p_low
    elif alternative == "greater":
        p = p_high
    elif alternative == "two-sided":
        p = 2.0 * min(p_low, p_high)
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    return w, float(min(1.0, max(0.0, p)))


def bonferroni(p: float, comparisons: int) -> float:
    return min(1.0, p * max(1, comparisons))


def describe(values) -> dict:
    xs = np.asarray(list(values), dtype=float)
    return {
        "min": float(xs.min()),
        "max": float(xs.max()),
        "mean": float(xs.mean()),
        "median": float(np.median(xs)),
    }


def summarize(records) -> list[dict]:
    """Min/max/mean/median of walk distance and fitness per (scenario, algorithm)."""
    groups = defaultdict(list)
    for r in records:
        groups[(r.distance, r.weight, r.algorithm)].append(r)
    rows = []
    for (dist, weight, algo), recs in sorted(groups.items()):
        walk = describe(r.mean_walk_m for r in recs)
        fit = describe(r.final_fitness for r in recs)
        row = {"distance": dist, "weight": weight, "algorithm": algo, "runs": len(recs)}
        row.update({f"walk_{k}": v for k, v in walk.items()})
        row.update({f"fitness_{k}": v for k, v in fit.items()})
        rows.append(row)
    return rows


def pairwise_tests(records) -> list[dict]:
    """Two-sided rank-sum tests on final fitness for every algorithm pair in
    each scenario, Bonferroni-corrected by the number of pairs tested."""
    by_scenario = defaultdict(lambda: defaultdict(list))
    for r in records:
        by_scenario[(r.distance, r.weight)][r.algorithm].append(r.final_fitness)
    pending = []
    for (dist, weight), algos in sorted(by_scenario.items()):
        names = sorted(algos)
        for x in range(len(names)):
            for y in range(x + 1, len(names)):
                stat, p = wilcoxon_rank_sum(algos[names[x]], algos[names[y]])
                pending.append((dist, weight, names[x], names[y], stat, p))
    m = len(pending)
    return [
        {"distance": d, "weight": wt, "pair": f"{a} vs {b}", "statistic": s, "raw_p": p, "corrected_p": bonferroni(p, m)}
        for d, wt, a, b, s, p in pending
    ]
