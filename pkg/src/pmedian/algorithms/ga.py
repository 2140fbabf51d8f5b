"""Generational GA over p-subsets (selection, crossover, mutation, replacement)."""

from __future__ import annotations

import numpy as np

from ..evaluation import nearest_two
from .common import RunContext, greedy_add


def select(rule: str, fits: list, rng) -> tuple[int, int]:
    if rule == "RAND":
        a, b = rng.choice(len(fits), size=2, replace=False)
        return int(a), int(b)
    order = sorted(range(len(fits)), key=lambda j: (fits[j], j))
    if rule == "BETTER":
        pair = order[:2]
    elif rule == "WORSE":
        pair = order[-2:][::-1]
    else:
        raise ValueError(f"unknown selection {rule!r}")
    return pair[0], pair[-1]


def _fill_unique(child: list, n_sites: int, rng) -> list:
    seen = set()
    for pos, s in enumerate(child):
        if s in seen:
            child[pos] = None
        else:
            seen.add(s)
    for pos, s in enumerate(child):
        if s is None:
            while True:
                j = int(rng.integers(n_sites))
                if j not in seen:
                    seen.add(j)
                    child[pos] = j
                    break
    return child


def one_point(a: list, b: list, k_fixed: int, n_sites: int, rng) -> list:
    cut = int(rng.integers(k_fixed, len(a) + 1))
    return _fill_unique(a[:cut] + b[cut:], n_sites, rng)


def merging(a: list, b: list, k_fixed: int, D, w) -> list:
    """Union of both parents, shrunk by repeatedly dropping the cheapest site."""
    sites = list(a) + [s for s in b if s not in set(a)]
    p = len(a)
    while len(sites) > p:
        n1, d1, _, d2 = nearest_two(D, sites)
        best, drop = np.inf, None
        for s in sorted(sites[k_fixed:]):
            mask = n1 == s
            cost = float(w[mask] @ (d2[mask] - d1[mask])) if mask.any() else 0.0
            if cost < best:
                best, drop = cost, s
        sites.remove(drop)
    return sites


def cupcap(a: list, b: list, k_fixed: int, D, w, n_sites: int) -> list:
    """Keep the parents' intersection, then greedily add from their symmetric difference."""
    in_b = set(b)
    common = list(a[:k_fixed]) + [s for s in a[k_fixed:] if s in in_b]
    extra = sorted(set(a).symmetric_difference(in_b))
    return greedy_add(D, w, common, len(a), n_sites, candidates=extra)


def run_ga(instance, config, observer=None, warm=None):
    ctx = RunContext(instance, config, observer, warm)
    cfg, rng = config, ctx.rng
    mu, lam = cfg.population, cfg.lam

    pop, fits = [], []
    for _ in range(mu):
        sites = ctx.initial()
        f = ctx.fitness(sites)
        pop.append(sites)
        fits.append(f)
        ctx.offer(sites, f, 0)

    i = 1
    done = 0
    while ctx.keep_going(i):
        children, child_fits = [], []
        for _ in range(lam):
            a, b = select(cfg.selection, fits, rng)
            pa, pb = pop[a], pop[b]
            if cfg.crossover == "ONEPOINT":
                child = one_point(pa, pb, ctx.k_fixed, ctx.n_sites, rng)
            elif cfg.crossover == "RANDPARENT":
                child = list(pa if rng.random() < 0.5 else pb)
            elif cfg.crossover == "MERGING":
                child = merging(pa, pb, ctx.k_fixed, ctx.D, ctx.w)
            else:
                child = cupcap(pa, pb, ctx.k_fixed, ctx.D, ctx.w, ctx.n_sites)
            if rng.random() < cfg.mutation_prob:
                child = ctx.shake(child, 1, cfg.mutation_mode)
            f = ctx.fitness(child)
            ctx.offer(child, f, i)
            children.append(child)
            child_fits.append(f)
            if ctx.expired():
                break
        if len(children) < lam:
            break
        if cfg.replacement == "PLUS":
            merged = list(zip(fits, range(len(pop)), pop)) + list(zip(child_fits, range(len(pop), len(pop) + lam), children))
            merged.sort(key=lambda t: (t[0], t[1]))
            kept = merged[:mu]
        else:
            # (mu, lambda) with lambda < mu keeps the best mu - lambda incumbents
            if lam >= mu:
                ranked = sorted(zip(child_fits, range(lam), children), key=lambda t: (t[0], t[1]))
                kept = ranked[:mu]
            else:
                ranked = sorted(zip(fits, range(len(pop)), pop), key=lambda t: (t[0], t[1]))
                kept = ranked[: mu - lam] + list(zip(child_fits, range(lam), children))
        fits = [t[0] for t in kept]
        pop = [t[2] for t in kept]
        done = i
        i += 1
    return ctx.finish(done)
