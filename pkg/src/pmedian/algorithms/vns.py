"""Variable neighbourhood search with K consecutive non-improving sweeps."""

from __future__ import annotations

from .common import RunContext, next_k


def run_vns(instance, config, observer=None, warm=None):
    ctx = RunContext(instance, config, observer, warm)
    cfg, rng = config, ctx.rng
    x = ctx.state(ctx.initial())
    ctx.local_search(x, cfg.localsearch)
    ctx.offer(x.open, x.fitness, 0)

    it = 0
    restart = True
    while restart and ctx.keep_going(it + 1):
        restart = False
        j = 1
        while not restart and j <= cfg.K and ctx.keep_going(it + 1):
            i = 1
            while not restart and i <= cfg.k_max and ctx.keep_going(it + 1):
                it += 1
                k = next_k(cfg.next, i, cfg.k_max, rng)
                cand = ctx.state(ctx.shake(x.open, k, cfg.shake_mode))
                ctx.local_search(cand, cfg.localsearch2)
                ctx.offer(cand.open, cand.fitness, it)
                if cfg.accept == "WALK":
                    accepted = True
                elif cfg.accept == "PROB":
                    accepted = cand.fitness < x.fitness or rng.random() < cfg.accept_prob
                else:
                    accepted = cand.fitness < x.fitness
                if accepted:
                    x = cand
                restart = accepted
                i += 1
            j += 1
    return ctx.finish(it)
