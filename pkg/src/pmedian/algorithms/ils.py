"""Iterated local search with elitist acceptance."""

from __future__ import annotations

from .common import RunContext


def run_ils(instance, config, observer=None, warm=None):
    ctx = RunContext(instance, config, observer, warm)
    cfg = config
    x = ctx.state(ctx.initial())
    ctx.local_search(x, cfg.localsearch)
    ctx.offer(x.open, x.fitness, 0)

    i, done = 1, 0
    while ctx.keep_going(i):
        cand = ctx.state(ctx.shake(x.open, cfg.npert, cfg.shake_mode))
        ctx.local_search(cand, cfg.localsearch)
        ctx.offer(cand.open, cand.fitness, i)
        if cand.fitness < x.fitness:
            x = cand
        done = i
        i += 1
    return ctx.finish(done)
