"""Small in-memory instances and brute-force oracles shared by the tests."""

from __future__ import annotations

import itertools

import numpy as np

from pmedian.distances import Projection, euclidean_matrix
from pmedian.instance import CITIZENS, CandidateSite, Customer, Instance, build_weight_model

CENTER = (36.72, -4.42)


def random_instance(seed, n_customers, n_sites, p, fixed=(), weight=CITIZENS, spread_m=2000.0) -> Instance:
    """Uniform points in a square around a fixed centre, Euclidean distances."""
    rng = np.random.default_rng(seed)
    m_per_deg = np.pi * 6_371_000.0 / 180.0

    def point():
        dx, dy = rng.uniform(-spread_m / 2, spread_m / 2, size=2)
        lat = CENTER[0] + dy / m_per_deg
        lon = CENTER[1] + dx / (m_per_deg * np.cos(np.radians(CENTER[0])))
        return float(lat), float(lon)

    customers = [Customer(i, *point(), population=int(rng.integers(1, 5000))) for i in range(n_customers)]
    sites = [CandidateSite(100 + j, *point()) for j in range(n_sites)]
    return Instance(
        customers=customers,
        sites=sites,
        p=p,
        distance_kind="euclidean",
        distances=euclidean_matrix(customers, sites),
        weight_model=build_weight_model(weight, customers),
        fixed_sites=tuple(fixed),
    )


def matrix_instance(D, w, p, fixed=()) -> Instance:
    """Instance over an explicit distance matrix (coordinates are placeholders)."""
    from pmedian.distances import DistanceMatrix
    from pmedian.instance import WeightModel

    D = np.asarray(D, dtype=float)
    n, f = D.shape
    customers = [Customer(i, CENTER[0] + 1e-4 * i, CENTER[1], population=1) for i in range(n)]
    sites = [CandidateSite(j, CENTER[0], CENTER[1] + 1e-4 * j) for j in range(f)]
    return Instance(
        customers=customers,
        sites=sites,
        p=p,
        distance_kind="euclidean",
        distances=DistanceMatrix(D, "euclidean"),
        weight_model=WeightModel("citizens", np.asarray(w, dtype=float)),
        fixed_sites=tuple(fixed),
    )


def brute_force_optimum(instance: Instance) -> float:
    D, w = instance.D, instance.weights
    fixed = list(instance.fixed_sites)
    free = [j for j in range(instance.n_sites) if j not in set(fixed)]
    best = np.inf
    for combo in itertools.combinations(free, instance.p - len(fixed)):
        best = min(best, float(w @ D[:, fixed + list(combo)].min(axis=1)))
    return best


def fresh_fitness(instance: Instance, sites) -> float:
    return float(instance.weights @ instance.D[:, list(sites)].min(axis=1))


def is_one_swap_optimal(instance: Instance, sites, rel_tol=1e-9) -> bool:
    """Exhaustively check that no single swap of a movable site improves."""
    sites = list(sites)
    k = len(instance.fixed_sites)
    base = fresh_fitness(instance, sites)
    chosen = set(sites)
    for pos in range(k, len(sites)):
        for j in range(instance.n_sites):
            if j in chosen:
                continue
            trial = sites[:pos] + [j] + sites[pos + 1 :]
            if fresh_fitness(instance, trial) < base - rel_tol * max(1.0, abs(base)):
                return False
    return True
