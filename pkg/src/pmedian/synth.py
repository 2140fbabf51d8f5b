"""Seeded synthetic city generator.

Builds a jittered street grid with random edge removal (kept connected by a
random spanning tree), splits street segments to host candidate sites,
snaps clustered neighbourhood centres onto intersections, and writes the
result in the instance directory format together with an incumbent
deployment and a station-activity log.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .distances import EARTH_RADIUS_M, Projection
from .instance import CandidateSite, Customer, write_instance

DEFAULT_CENTER = (36.72, -4.42)
BLOCK_M = 110.0


class SyntheticCityError(ValueError):
    pass


def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


def _street_grid(rng, side, density):
    n = side * side
    jitter = rng.uniform(-0.2, 0.2, size=(n, 2)) * BLOCK_M
    ii, jj = np.divmod(np.arange(n), side)
    xy = np.stack([jj * BLOCK_M, ii * BLOCK_M], axis=1).astype(float) + jitter
    xy -= xy.mean(axis=0)

    candidates = []
    for r in range(side):
        for c in range(side):
            u = r * side + c
            if c + 1 < side:
                candidates.append((u, u + 1))
            if r + 1 < side:
                candidates.append((u, u + side))
    keep = rng.random(len(candidates)) < density

    parent = list(range(n))
    for k in rng.permutation(len(candidates)):
        u, v = candidates[k]
        ru, rv = _find(parent, u), _find(parent, v)
        if ru != rv:
            parent[ru] = rv
            keep[k] = True
    edges = [e for e, kept in zip(candidates, keep) if kept]
    return xy, edges


def _to_latlon(xy, center):
    lat0, lon0 = center
    k = math.pi / 180.0 * EARTH_RADIUS_M
    lat = lat0 + xy[:, 1] / k
    lon = lon0 + xy[:, 0] / (k * math.cos(math.radians(lat0)))
    return lat, lon


def generate_synthetic_city(
    seed: int,
    n_customers: int,
    n_sites: int,
    graph_density: float = 0.8,
    out_dir=None,
    p: int = 23,
    center: tuple = DEFAULT_CENTER,
    activity_days: int = 7,
) -> Path:
    """Write a deterministic synthetic instance to ``out_dir`` and return it."""
    if n_customers < 1:
        raise SyntheticCityError("need at least one customer")
    if n_sites < n_customers:
        raise SyntheticCityError(f"n_sites ({n_sites}) must be >= n_customers ({n_customers})")
    if not (0.0 < graph_density <= 1.0):
        raise SyntheticCityError("graph_density must be in (0, 1]")
    if out_dir is None:
        raise SyntheticCityError("out_dir is required")
    p = min(int(p), n_sites)
    if p < 1:
        raise SyntheticCityError("p must be >= 1")

    rng = np.random.default_rng(seed)
    side = max(3, math.ceil(math.sqrt(max(n_sites / (2 * graph_density) * 1.3, 2 * n_customers))))
    while True:
        xy, edges = _street_grid(rng, side, graph_density)
        if len(edges) >= n_sites and len(xy) >= n_customers:
            break
        side += 2

    n_grid = len(xy)
    chosen = np.sort(rng.choice(len(edges), size=n_sites, replace=False))
    split_frac = rng.uniform(0.25, 0.75, size=n_sites)
    site_xy = np.empty((n_sites, 2))
    final_edges = []
    split_of = dict(zip(chosen.tolist(), range(n_sites)))
    for k, (u, v) in enumerate(edges):
        s = split_of.get(k)
        if s is None:
            final_edges.append((u, v))
        else:
            w = n_grid + s
            site_xy[s] = xy[u] + split_frac[s] * (xy[v] - xy[u])
            final_edges.append((u, w))
            final_edges.append((w, v))

    # neighbourhood centres: gaussian clusters snapped to distinct intersections
    n_clusters = max(1, n_customers // 25)
    half = np.abs(xy).max(axis=0) * 0.8
    centers = rng.uniform(-half, half, size=(n_clusters, 2))
    spread = max(float(half.min()) / 4.0, BLOCK_M)
    raw = centers[rng.integers(0, n_clusters, size=n_customers)] + rng.normal(0.0, spread, size=(n_customers, 2))
    tree = cKDTree(xy)
    used = set()
    customer_nodes = []
    for point in raw:
        k = 8
        while True:
            _, idx = tree.query(point, k=min(k, n_grid))
            free = [int(i) for i in np.atleast_1d(idx) if int(i) not in used]
            if free:
                break
            k *= 2
        used.add(free[0])
        customer_nodes.append(free[0])
    population = np.maximum(0, np.rint(rng.lognormal(mean=7.0, sigma=1.0, size=n_customers))).astype(int)

    all_xy = np.vstack([xy, site_xy])
    lat, lon = _to_latlon(all_xy, center)
    customers = [
        Customer(i, float(lat[node]), float(lon[node]), int(population[i]), node)
        for i, node in enumerate(customer_nodes)
    ]
    sites = [CandidateSite(j, float(lat[n_grid + j]), float(lon[n_grid + j]), n_grid + j) for j in range(n_sites)]

    # edge lengths measured in the same projection the instance uses
    proj = Projection.centered_on(
        [c.lat for c in customers] + [s.lat for s in sites], [c.lon for c in customers] + [s.lon for s in sites]
    )
    px, py = proj.project(lat, lon)
    edge_rows = []
    for u, v in final_edges:
        length = math.hypot(px[u] - px[v], py[u] - py[v])
        edge_rows.append((min(u, v), max(u, v), max(length, 1e-3)))
    edge_rows.sort()

    # incumbent deployment biased toward the centre, like a first-phase rollout
    radial = np.hypot(site_xy[:, 0], site_xy[:, 1])
    pool = np.argsort(radial, kind="stable")[: max(p, n_sites // 4)]
    baseline = sorted(int(j) for j in rng.choice(pool, size=p, replace=False))
    activity_rows = []
    samples = activity_days * 24
    for sid in baseline:
        slots = int(rng.integers(15, 31))
        rate = float(rng.uniform(0.2, 0.8))
        occupied = rng.binomial(slots, rate, size=samples)
        for t in range(samples):
            activity_rows.append((sid, sites[sid].lat, sites[sid].lon, t * 3600, int(occupied[t]), slots))

    meta = {"p": p, "distance": "graph", "weight": "citizens", "fixed_sites": []}
    return write_instance(out_dir, customers, sites, meta, edge_rows, activity_rows, baseline)
