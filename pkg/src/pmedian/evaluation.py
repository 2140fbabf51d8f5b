"""Weighted p-median objective and incremental nearest/second-nearest state."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class InvalidSolution(ValueError):
    pass


class InvalidSwap(ValueError):
    pass


@dataclass(frozen=True)
class Solution:
    """Exactly p distinct open sites; the first ``fixed_prefix`` never move."""

    sites: tuple
    fixed_prefix: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))

    def __len__(self):
        return len(self.sites)

    def as_set(self) -> frozenset:
        return frozenset(self.sites)


def check_solution(instance, solution: Solution) -> None:
    sites = solution.sites
    if len(sites) != instance.p:
        raise InvalidSolution(f"solution has {len(sites)} sites, p={instance.p}")
    if len(set(sites)) != len(sites):
        raise InvalidSolution("solution has duplicate sites")
    f = instance.n_sites
    bad = [s for s in sites if not 0 <= s < f]
    if bad:
        raise InvalidSolution(f"site indices out of range: {bad}")
    k = len(instance.fixed_sites)
    if solution.fixed_prefix != k or tuple(sites[:k]) != tuple(instance.fixed_sites):
        raise InvalidSolution("solution does not start with the instance's fixed sites")


def fitness_of(D: np.ndarray, w: np.ndarray, sites) -> float:
    """Objective of an arbitrary site set, no bookkeeping."""
    return float(w @ D[:, np.asarray(sites, dtype=np.intp)].min(axis=1))


def nearest_two(D: np.ndarray, sites: Sequence[int], rows=None):
    """Nearest and second-nearest open site per customer.

    Equidistant sites resolve to the lowest site index. With a single open
    site the second slot is (-1, inf).
    """
    order = np.sort(np.asarray(sites, dtype=np.intp))
    sub = D[:, order] if rows is None else D[np.ix_(rows, order)]
    r = np.arange(sub.shape[0])
    a1 = np.argmin(sub, axis=1)
    d1 = sub[r, a1]
    if len(order) == 1:
        return order[a1], d1, np.full(len(r), -1, dtype=np.intp), np.full(len(r), np.inf)
    sub = sub.copy()
    sub[r, a1] = np.inf
    a2 = np.argmin(sub, axis=1)
    return order[a1], d1, order[a2], sub[r, a2]


class AssignmentState:
    """Open site list plus per-customer d1/d2 bookkeeping for O(N) swaps."""

    __slots__ = ("D", "w", "open", "fixed_prefix", "is_open", "n1", "d1", "n2", "d2", "fitness")

    def __init__(self, D: np.ndarray, w: np.ndarray, sites: Sequence[int], fixed_prefix: int = 0):
        self.D = D
        self.w = w
        self.open = [int(s) for s in sites]
        self.fixed_prefix = int(fixed_prefix)
        self.is_open = np.zeros(D.shape[1], dtype=bool)
        self.is_open[self.open] = True
        self.n1, self.d1, self.n2, self.d2 = nearest_two(D, self.open)
        self.fitness = float(w @ self.d1)

    @classmethod
    def from_solution(cls, instance, solution: Solution) -> "AssignmentState":
        return cls(instance.D, instance.weights, solution.sites, solution.fixed_prefix)

    def copy(self) -> "AssignmentState":
        new = object.__new__(AssignmentState)
        new.D, new.w = self.D, self.w
        new.open = list(self.open)
        new.fixed_prefix = self.fixed_prefix
        new.is_open = self.is_open.copy()
        new.n1, new.d1, new.n2, new.d2 = self.n1.copy(), self.d1.copy(), self.n2.copy(), self.d2.copy()
        new.fitness = self.fitness
        return new

    def solution(self) -> Solution:
        return Solution(tuple(self.open), self.fixed_prefix)

    @property
    def movable(self) -> list[int]:
        return self.open[self.fixed_prefix :]

    def _check(self, out_site: int, in_site: int) -> None:
        if out_site == in_site:
            raise InvalidSwap("cannot swap a site with itself")
        if not self.is_open[out_site]:
            raise InvalidSwap(f"site {out_site} is not open")
        if self.is_open[in_site]:
            raise InvalidSwap(f"site {in_site} is already open")

    def swap_delta(self, out_site: int, in_site: int) -> float:
        """fitness(L - out + in) - fitness(L)."""
        self._check(out_site, in_site)
        keep = np.where(self.n1 == out_site, self.d2, self.d1)
        return float(self.w @ (np.minimum(keep, self.D[:, in_site]) - self.d1))

    def deltas_for_out(self, out_site: int, in_sites) -> np.ndarray:
        """Swap deltas of removing ``out_site`` for each of ``in_sites``."""
        in_sites = np.asarray(in_sites, dtype=np.intp)
        keep = np.where(self.n1 == out_site, self.d2, self.d1)
        new = np.minimum(keep[:, None], self.D[:, in_sites])
        return self.w @ (new - self.d1[:, None])

    def swap_matrix(self, in_sites) -> np.ndarray:
        """Delta for every (movable open position, candidate) pair.

        Row r corresponds to ``self.movable[r]``. Uses the fast-interchange
        split: a gain term shared by all removals plus a loss correction
        for customers whose nearest site is the one removed.
        """
        in_sites = np.asarray(in_sites, dtype=np.intp)
        Dc = self.D[:, in_sites]
        d1 = self.d1[:, None]
        with_first = np.minimum(Dc, d1)
        base = self.w @ (with_first - d1)
        corr = self.w[:, None] * (np.minimum(Dc, self.d2[:, None]) - with_first)
        movable = self.movable
        out = np.empty((len(movable), len(in_sites)))
        for r, s in enumerate(movable):
            rows = self.n1 == s
            out[r] = base + corr[rows].sum(axis=0) if rows.any() else base
        return out

    def apply_swap(self, out_site: int, in_site: int) -> float:
        """Close ``out_site``, open ``in_site`` in the same position; return delta."""
        delta = self.swap_delta(out_site, in_site)
        pos = self.open.index(out_site)
        if pos < self.fixed_prefix:
            raise InvalidSwap(f"site {out_site} is fixed")
        self.open[pos] = in_site
        self.is_open[out_site] = False
        self.is_open[in_site] = True

        n1, d1, n2, d2 = self.n1, self.d1, self.n2, self.d2
        din = self.D[:, in_site]
        affected = (n1 == out_site) | (n2 == out_site)
        others = ~affected
        first = others & ((din < d1) | ((din == d1) & (in_site < n1)))
        second = others & ~first & ((din < d2) | ((din == d2) & (in_site < n2)))
        n2[first] = n1[first]
        d2[first] = d1[first]
        n1[first] = in_site
        d1[first] = din[first]
        n2[second] = in_site
        d2[second] = din[second]
        rows = np.flatnonzero(affected)
        if rows.size:
            a, b, c, d = nearest_two(self.D, self.open, rows)
            n1[rows], d1[rows], n2[rows], d2[rows] = a, b, c, d
        self.fitness += delta
        return delta

    def refresh(self) -> None:
        self.n1, self.d1, self.n2, self.d2 = nearest_two(self.D, self.open)
        self.fitness = float(self.w @ self.d1)


def evaluate(instance, solution: Solution) -> float:
    check_solution(instance, solution)
    return AssignmentState.from_solution(instance, solution).fitness


def swap_delta(state: AssignmentState, out_site: int, in_site: int) -> float:
    return state.swap_delta(out_site, in_site)


def apply_swap(state: AssignmentState, out_site: int, in_site: int) -> AssignmentState:
    state.apply_swap(out_site, in_site)
    return state


def mean_walk_distance(instance, solution: Solution | Sequence[int], report_weights) -> float:
    """Report-weighted mean distance from customers to their nearest open site."""
    sites = solution.sites if isinstance(solution, Solution) else tuple(solution)
    if isinstance(solution, Solution):
        check_solution(instance, solution)
    w = np.asarray(getattr(report_weights, "weights", report_weights), dtype=float)
    total = w.sum()
    if total <= 0:
        raise ValueError("report weights sum to zero")
    nearest = instance.D[:, np.asarray(sites, dtype=np.intp)].min(axis=1)
    return float(w @ nearest / total)
