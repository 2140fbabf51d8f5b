"""Simulated annealing over shake moves."""

from __future__ import annotations

import math

from .common import K_CAP, RunContext, next_k


def temperature(rule: str, t0: float, i: int, total: int, opt: float) -> float:
    """LIN decays to zero at ``total``; EXP is t0 * opt**i; NONE uses i itself."""
    if rule == "LIN":
        return t0 * (1.0 - i / total) if total > 0 else 0.0
    if rule == "EXP":
        return t0 * opt**i
    if rule == "NONE":
        return float(i)
    raise ValueError(f"unknown cooling {rule!r}")


def acceptance_probability(delta: float, k: int, t: float) -> float:
    """exp(-delta / (k t)); a frozen system (k t <= 0) only takes delta < 0."""
    if delta < 0:
        return 1.0
    denom = k * t
    if denom <= 0:
        return 0.0
    return math.exp(-delta / denom)


def run_sa(instance, config, observer=None, warm=None):
    ctx = RunContext(instance, config, observer, warm)
    cfg, rng = config, ctx.rng
    x = ctx.state(ctx.initial())
    ctx.local_search(x, cfg.localsearch)
    sites, f = list(x.open), x.fitness
    ctx.offer(sites, f, 0)

    i, done = 1, 0
    while ctx.keep_going(i):
        t = temperature(cfg.cooling, cfg.t0, i, ctx.max_iter, cfg.cooling_opt)
        k = next_k(cfg.next, i, K_CAP, rng)
        cand = ctx.shake(sites, k, cfg.shake_mode)
        fc = ctx.fitness(cand)
        ctx.offer(cand, fc, i)
        delta = fc - f
        if delta < 0 or rng.random() < acceptance_probability(delta, k, t):
            sites, f = cand, fc
        done = i
        i += 1
    return ctx.finish(done)
