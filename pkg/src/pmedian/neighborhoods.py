"""Facility domain models (NEAR / QUAD) and the shake operators."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .distances import Projection
from .evaluation import Solution

log = logging.getLogger(__name__)

NEAR = "NEAR"
QUAD = "QUAD"

CLOSE = "CLOSE"
RAND = "RAND"
NONE = "NONE"
SHAKE_MODES = (CLOSE, RAND, NONE)

# quadrant visiting order for the round-robin
NE, NW, SW, SE = 0, 1, 2, 3


@dataclass(frozen=True)
class DomainModel:
    kind: str
    d: int
    lists: tuple  # per site, a tuple of site indices

    def __getitem__(self, site: int) -> tuple:
        return self.lists[site]

    def __len__(self):
        return len(self.lists)


def _site_arrays(sites):
    lat = np.array([s.lat for s in sites], dtype=float)
    lon = np.array([s.lon for s in sites], dtype=float)
    x, y = Projection.centered_on(lat, lon).project(lat, lon)
    return lat, lon, np.column_stack([x, y])


def _q(d):
    # sub-micrometer differences are ties, resolved by site id
    return np.round(d, 6)


def _ball(tree, xy, j, radius, n):
    if radius is None:
        return np.arange(n)
    return np.asarray(tree.query_ball_point(xy[j], radius + 1e-6), dtype=np.intp)


def build_near(sites, d: int) -> DomainModel:
    """The ``d`` straight-line nearest other sites per site, ascending."""
    if d < 1:
        raise ValueError("d must be >= 1")
    n = len(sites)
    m = min(d, n - 1)
    if m <= 0:
        return DomainModel(NEAR, d, tuple(() for _ in range(n)))
    _, _, xy = _site_arrays(sites)
    tree = cKDTree(xy)
    k = min(n, m + 1)
    dist, _ = tree.query(xy, k=k)
    dist = dist.reshape(n, k)
    lists = []
    for j in range(n):
        # every true member lies within the (m+1)-th neighbour distance
        cand = _ball(tree, xy, j, None if k >= n else float(dist[j, -1]), n)
        cand = cand[cand != j]
        dj = _q(np.hypot(*(xy[cand] - xy[j]).T))
        order = np.lexsort((cand, dj))[:m]
        lists.append(tuple(int(c) for c in cand[order]))
    return DomainModel(NEAR, d, tuple(lists))


def quadrant_of(dlat: np.ndarray, dlon: np.ndarray) -> np.ndarray:
    """Quadrant code of offsets (dlat, dlon) relative to an owner site.

    Boundaries go clockwise from NE; exact coincidence lands in NE.
    """
    q = np.full(dlat.shape, NE, dtype=np.int8)
    q[(dlat > 0) & (dlon <= 0)] = NW
    q[(dlat <= 0) & (dlon < 0)] = SW
    q[(dlat < 0) & (dlon >= 0)] = SE
    return q


def _round_robin(buckets, m, complete):
    """Pick ``m`` sites cycling NE, NW, SW, SE. Returns None if a bucket ran dry
    and ``complete`` is False (more candidates may lie farther out)."""
    picked = []
    ptr = [0, 0, 0, 0]
    while len(picked) < m:
        progressed = False
        for q in range(4):
            if len(picked) == m:
                break
            if ptr[q] < len(buckets[q]):
                picked.append(buckets[q][ptr[q]])
                ptr[q] += 1
                progressed = True
            elif not complete:
                return None
        if not progressed:
            break
    return picked


def build_quad(sites, d: int) -> DomainModel:
    """Round-robin nearest site per quadrant until ``d`` are selected."""
    if d < 1:
        raise ValueError("d must be >= 1")
    n = len(sites)
    m = min(d, n - 1)
    if m <= 0:
        return DomainModel(QUAD, d, tuple(() for _ in range(n)))
    lat, lon, xy = _site_arrays(sites)
    tree = cKDTree(xy)
    k0 = min(n, 4 * m + 8)
    dist, _ = tree.query(xy, k=k0)
    dist = dist.reshape(n, k0)
    diameter = float(np.hypot(*np.ptp(xy, axis=0)))
    lists = []
    for j in range(n):
        radius = None if k0 >= n else float(dist[j, -1])
        while True:
            cand = _ball(tree, xy, j, radius, n)
            cand = cand[cand != j]
            dj = _q(np.hypot(*(xy[cand] - xy[j]).T))
            complete = radius is None or len(cand) >= n - 1
            if not complete:
                # only candidates strictly inside the ball are known to be nearest
                inside = dj < _q(radius)
                cand, dj = cand[inside], dj[inside]
            quad = quadrant_of(lat[cand] - lat[j], lon[cand] - lon[j])
            order = np.lexsort((cand, dj))
            buckets = [[int(c) for c in cand[order][quad[order] == q]] for q in range(4)]
            picked = _round_robin(buckets, m, complete)
            if picked is not None:
                break
            radius *= 2
            if radius > diameter:
                radius = None
        lists.append(tuple(picked))
    return DomainModel(QUAD, d, tuple(lists))


def domain_for(instance, kind: str, d: int) -> DomainModel:
    """Cached domain model for ``instance`` (built once per (kind, d))."""
    key = (kind.upper(), int(d))
    cache = instance._domains
    if key not in cache:
        builder = build_near if key[0] == NEAR else build_quad if key[0] == QUAD else None
        if builder is None:
            raise ValueError(f"unknown domain model {kind!r}")
        cache[key] = builder(instance.sites, key[1])
    return cache[key]


def random_closed_site(n_sites: int, is_open, rng) -> int:
    while True:
        s = int(rng.integers(n_sites))
        if not is_open(s):
            return s


def shake_sites(sites: list, fixed_prefix: int, k: int, mode: str, domain, n_sites: int, rng) -> list:
    """Replace ``min(k, movable)`` randomly chosen movable sites; returns a new list."""
    out = list(sites)
    if mode == NONE or k <= 0:
        return out
    movable = len(out) - fixed_prefix
    count = min(k, movable)
    if count <= 0 or len(out) >= n_sites:
        return out
    opened = set(out)
    positions = rng.choice(np.arange(fixed_prefix, len(out)), size=count, replace=False)
    for pos in positions:
        old = out[pos]
        new = None
        if mode == CLOSE:
            if domain is None:
                raise ValueError("CLOSE shake needs a domain model")
            choices = [s for s in domain[old] if s not in opened]
            if choices:
                new = choices[int(rng.integers(len(choices)))]
            else:
                log.debug("CLOSE shake: domain of site %d fully open, drawing at random", old)
        elif mode != RAND:
            raise ValueError(f"unknown shake mode {mode!r}")
        if new is None:
            new = random_closed_site(n_sites, opened.__contains__, rng)
        opened.discard(old)
        opened.add(new)
        out[pos] = new
    return out


def shake(solution: Solution, k: int, mode: str, domain: DomainModel | None, rng, n_sites: int | None = None) -> Solution:
    if n_sites is None:
        if domain is None:
            raise ValueError("n_sites is required when no domain model is given")
        n_sites = len(domain)
    sites = shake_sites(list(solution.sites), solution.fixed_prefix, k, mode, domain, n_sites, rng)
    return Solution(tuple(sites), solution.fixed_prefix)
