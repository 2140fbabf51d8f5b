"""Descent procedures: fast interchange (FI), alternate location-allocation
(IALT) and domain-restricted interchange (IMP).

All three work in place on an :class:`AssignmentState`, never move the
fixed prefix and never increase fitness. None of them draws random numbers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .evaluation import AssignmentState, Solution

FI = "FI"
IALT = "IALT"
IMP = "IMP"
NONE = "NONE"
KINDS = (FI, IALT, IMP, NONE)

_CHUNK = 4096


@dataclass(frozen=True)
class LocalSearchConfig:
    kind: str = NONE
    laux: int = 1
    imp_param: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown local search {self.kind!r}")
        if self.kind == IALT and self.laux < 1:
            raise ValueError("Laux must be >= 1")
        if self.kind == IMP and self.imp_param < 1:
            raise ValueError("IMPparam must be >= 1")


def _tol(state: AssignmentState) -> float:
    return 1e-10 * max(1.0, abs(state.fitness))


def _expired(deadline) -> bool:
    return deadline is not None and time.perf_counter() >= deadline


def fi_state(state: AssignmentState, deadline=None) -> AssignmentState:
    """Best-improvement 1-swap descent.

    Each pass scores every (open, closed) pair and applies the best one;
    equal deltas go to the lowest (in_site, out_site).
    """
    while not _expired(deadline):
        movable = np.array(state.movable, dtype=np.intp)
        closed = np.flatnonzero(~state.is_open)
        if movable.size == 0 or closed.size == 0:
            break
        tol = _tol(state)
        best, best_pair = None, None
        for start in range(0, closed.size, _CHUNK):
            cand = closed[start : start + _CHUNK]
            M = state.swap_matrix(cand)
            low = M.min()
            if low >= -tol or (best is not None and low > best):
                continue
            rows, cols = np.nonzero(M == low)
            pair = min(zip(cand[cols].tolist(), movable[rows].tolist()))
            if best is None or low < best or pair < best_pair:
                best, best_pair = low, pair
        if best_pair is None:
            break
        in_site, out_site = best_pair
        state.apply_swap(out_site, in_site)
    return state


def _geometry(instance):
    cache = instance._domains
    if "geometry" not in cache:
        proj = instance.projection()
        cx, cy = proj.project([c.lat for c in instance.customers], [c.lon for c in instance.customers])
        sx, sy = proj.project([s.lat for s in instance.sites], [s.lon for s in instance.sites])
        site_xy = np.column_stack([sx, sy])
        cache["geometry"] = (np.column_stack([cx, cy]), site_xy, cKDTree(site_xy))
    return cache["geometry"]


def _shortlist(tree, site_xy, point, laux):
    k = min(laux, len(site_xy))
    _, idx = tree.query(point, k=k)
    idx = np.atleast_1d(idx).astype(np.intp)
    d = np.round(np.hypot(*(site_xy[idx] - point).T), 6)
    return idx[np.lexsort((idx, d))]


def ialt_state(state: AssignmentState, instance, laux: int, deadline=None) -> AssignmentState:
    """Alternate allocation and location until a full pass changes nothing.

    Location step: each cluster's site may move to whichever of the ``laux``
    sites nearest the cluster's weighted centroid minimises the cluster's
    weighted distance sum (only strict improvements, only to closed sites).
    """
    cust_xy, site_xy, tree = _geometry(instance)
    w, D = state.w, state.D
    while not _expired(deadline):
        tol = _tol(state)
        owner = state.n1.copy()
        new_open = list(state.open)
        opened = set(new_open)
        changed = False
        for pos in range(state.fixed_prefix, len(new_open)):
            s = new_open[pos]
            members = np.flatnonzero(owner == s)
            if members.size == 0:
                continue
            wm = w[members]
            total = wm.sum()
            if total <= 0:
                continue
            centroid = (wm @ cust_xy[members]) / total
            cand = _shortlist(tree, site_xy, centroid, laux)
            cand = cand[[c == s or c not in opened for c in cand.tolist()]]
            if cand.size == 0:
                continue
            costs = wm @ D[np.ix_(members, cand)]
            b = int(np.argmin(costs))
            current = float(wm @ D[members, s])
            if costs[b] < current - tol and cand[b] != s:
                opened.discard(s)
                opened.add(int(cand[b]))
                new_open[pos] = int(cand[b])
                changed = True
        if not changed:
            break
        state.open = new_open
        state.is_open[:] = False
        state.is_open[new_open] = True
        state.refresh()
    return state


def imp_state(state: AssignmentState, imp_param: int, domain, deadline=None) -> AssignmentState:
    """``imp_param`` rounds of domain-restricted interchange.

    Within a round, each movable site tries every closed member of its
    domain list and takes the best improving swap before moving on.
    """
    for _ in range(imp_param):
        improved = False
        for pos in range(state.fixed_prefix, len(state.open)):
            if _expired(deadline):
                return state
            s = state.open[pos]
            cand = [c for c in domain[s] if not state.is_open[c]]
            if not cand:
                continue
            deltas = state.deltas_for_out(s, cand)
            b = int(np.argmin(deltas))
            if deltas[b] < -_tol(state):
                state.apply_swap(s, cand[b])
                improved = True
        if not improved:
            break
    return state


def run_local_search(state: AssignmentState, config: LocalSearchConfig, instance, domain=None, deadline=None):
    if config.kind == FI:
        return fi_state(state, deadline)
    if config.kind == IALT:
        return ialt_state(state, instance, config.laux, deadline)
    if config.kind == IMP:
        if domain is None:
            raise ValueError("IMP needs a domain model")
        return imp_state(state, config.imp_param, domain, deadline)
    return state


def fi(instance, solution: Solution, deadline=None) -> Solution:
    return fi_state(AssignmentState.from_solution(instance, solution), deadline).solution()


def ialt(instance, solution: Solution, laux: int, deadline=None) -> Solution:
    if laux < 1:
        raise ValueError("Laux must be >= 1")
    return ialt_state(AssignmentState.from_solution(instance, solution), instance, laux, deadline).solution()


def imp(instance, solution: Solution, imp_param: int, domain, deadline=None) -> Solution:
    if imp_param < 1:
        raise ValueError("IMPparam must be >= 1")
    return imp_state(AssignmentState.from_solution(instance, solution), imp_param, domain, deadline).solution()
