"""Particle swarm over integer site vectors (round, clamp, repair)."""

from __future__ import annotations

import numpy as np

from .common import RunContext


def decode(position: np.ndarray, k_fixed: int, n_sites: int, rng) -> np.ndarray:
    """Round to the nearest index, clamp to the site range, replace duplicates
    (later coordinates lose) with uniformly drawn unused sites."""
    x = np.clip(np.floor(position + 0.5), 0, n_sites - 1).astype(np.int64)
    seen = set()
    dup = []
    for f, s in enumerate(x.tolist()):
        if s in seen:
            dup.append(f)
        else:
            seen.add(s)
    for f in dup:
        while True:
            j = int(rng.integers(n_sites))
            if j not in seen:
                seen.add(j)
                x[f] = j
                break
    return x


def run_pso(instance, config, observer=None, warm=None):
    ctx = RunContext(instance, config, observer, warm)
    cfg, rng = config, ctx.rng
    n, p, kf = ctx.n_sites, ctx.p, ctx.k_fixed
    span = float(n - 1)

    pos = np.array([ctx.initial() for _ in range(cfg.population)], dtype=np.int64)
    pos = pos.reshape(cfg.population, p)
    fit = np.array([ctx.fitness(x) for x in pos])
    vel = rng.uniform(-span, span, size=pos.shape)
    vel[:, :kf] = 0.0
    pbest, pbest_fit = pos.copy(), fit.copy()
    g = int(np.argmin(fit))
    gbest, gbest_fit = pos[g].copy(), fit[g]
    for x, f in zip(pos, fit):
        ctx.offer(x.tolist(), f, 0)

    i, done = 1, 0
    while ctx.keep_going(i):
        for s in range(cfg.population):
            x = pos[s]
            rp = rng.random(p)
            rg = rng.random(p)
            v = cfg.omega * vel[s] + cfg.phi_p * rp * (pbest[s] - x) + cfg.phi_g * rg * (gbest - x)
            v[:kf] = 0.0
            vel[s] = v
            x = decode(x + v, kf, n, rng)
            pos[s] = x
            f = ctx.fitness(x)
            ctx.offer(x.tolist(), f, i)
            if f < pbest_fit[s]:
                pbest[s], pbest_fit[s] = x, f
                if f < gbest_fit:
                    gbest, gbest_fit = x.copy(), f
            if ctx.expired():
                break
        done = i
        i += 1
    return ctx.finish(done)
