"""Customer x site distance matrices: straight-line and street-network.

Straight-line distances use an equirectangular projection centred on the
point set, which keeps everything in meters. Street distances run one
single-source Dijkstra per customer over an undirected graph.
"""

from __future__ import annotations

import heapq
import math
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

EARTH_RADIUS_M = 6_371_000.0

EUCLIDEAN = "euclidean"
GRAPH = "graph"
_KIND_CODES = {EUCLIDEAN: 0, GRAPH: 1}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}

MAGIC = b"PMED"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIIB")


class DistanceError(ValueError):
    """Raised for unreachable anchors or malformed graphs."""


class MatrixFileError(ValueError):
    """Raised when a cached matrix file is corrupt or does not fit."""


@dataclass(frozen=True)
class Projection:
    """Local equirectangular projection to meters around (lat0, lon0)."""

    lat0: float
    lon0: float

    @classmethod
    def centered_on(cls, lats: Iterable[float], lons: Iterable[float]) -> "Projection":
        lats = np.asarray(list(lats) if not isinstance(lats, np.ndarray) else lats, dtype=float)
        lons = np.asarray(list(lons) if not isinstance(lons, np.ndarray) else lons, dtype=float)
        if lats.size == 0:
            return cls(0.0, 0.0)
        return cls(float(lats.mean()), float(lons.mean()))

    def project(self, lat, lon) -> tuple[np.ndarray, np.ndarray]:
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        k = math.pi / 180.0 * EARTH_RADIUS_M
        x = k * math.cos(math.radians(self.lat0)) * (lon - self.lon0)
        y = k * (lat - self.lat0)
        return x, y


@dataclass
class DistanceMatrix:
    values: np.ndarray
    kind: str

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("distance matrix must be 2-D")
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown distance kind {self.kind!r}")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("distance matrix entries must be finite and non-negative")
        self.values.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _coords(points) -> tuple[np.ndarray, np.ndarray]:
    lat = np.array([pt.lat for pt in points], dtype=float)
    lon = np.array([pt.lon for pt in points], dtype=float)
    return lat, lon


def euclidean_matrix(customers, sites, projection: Projection | None = None) -> DistanceMatrix:
    """Planar distance in meters between every customer and every site."""
    clat, clon = _coords(customers)
    slat, slon = _coords(sites)
    if projection is None:
        projection = Projection.centered_on(np.concatenate([clat, slat]), np.concatenate([clon, slon]))
    cx, cy = projection.project(clat, clon)
    sx, sy = projection.project(slat, slon)
    values = np.hypot(cx[:, None] - sx[None, :], cy[:, None] - sy[None, :])
    return DistanceMatrix(values, EUCLIDEAN)


@dataclass
class StreetGraph:
    """Undirected street graph with positive edge lengths in meters."""

    coords: dict = field(default_factory=dict)
    adjacency: dict = field(default_factory=dict)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple], coords: dict | None = None) -> "StreetGraph":
        graph = cls(coords=dict(coords or {}))
        for u, v, length in edges:
            graph.add_edge(u, v, length)
        return graph

    def add_edge(self, u, v, length: float) -> None:
        length = float(length)
        if u == v:
            raise DistanceError(f"self-loop at node {u}")
        if not (length > 0 and math.isfinite(length)):
            raise DistanceError(f"edge ({u}, {v}) has non-positive length {length}")
        for a, b in ((u, v), (v, u)):
            nbrs = self.adjacency.setdefault(a, {})
            # parallel edges collapse to the shortest one
            if b not in nbrs or length < nbrs[b]:
                nbrs[b] = length

    @property
    def nodes(self) -> set:
        return set(self.adjacency) | set(self.coords)

    def edges(self) -> list[tuple]:
        out = []
        for u, nbrs in self.adjacency.items():
            for v, length in nbrs.items():
                if u < v:
                    out.append((u, v, length))
        return sorted(out)


def dijkstra(graph: StreetGraph, source) -> dict:
    """Single-source shortest path lengths from ``source``.

    Heap entries are (distance, node) so equal tentative distances pop in
    node-id order.
    """
    dist = {source: 0.0}
    done = set()
    heap = [(0.0, source)]
    adjacency = graph.adjacency
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, length in adjacency.get(u, {}).items():
            nd = d + length
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def graph_matrix(graph: StreetGraph, customers, sites) -> DistanceMatrix:
    site_nodes = [s.graph_node for s in sites]
    for s, node in zip(sites, site_nodes):
        if node is None:
            raise DistanceError(f"site {s.id} has no graph_node anchor")
    values = np.empty((len(customers), len(sites)), dtype=np.float64)
    cache: dict = {}
    for i, c in enumerate(customers):
        if c.graph_node is None:
            raise DistanceError(f"customer {c.id} has no graph_node anchor")
        if c.graph_node not in cache:
            cache[c.graph_node] = dijkstra(graph, c.graph_node)
        dist = cache[c.graph_node]
        for j, node in enumerate(site_nodes):
            d = dist.get(node)
            if d is None:
                raise DistanceError(
                    f"site {sites[j].id} (node {node}) unreachable from customer {c.id} (node {c.graph_node})"
                )
            values[i, j] = d
    return DistanceMatrix(values, GRAPH)


def save_matrix(matrix: DistanceMatrix, path) -> None:
    n, f = matrix.shape
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, n, f, _KIND_CODES[matrix.kind])
    body = matrix.values.astype("<f8", copy=False).tobytes(order="C")
    crc = zlib.crc32(body, zlib.crc32(header))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(body)
        fh.write(struct.pack("<I", crc))
    tmp.replace(path)


def load_matrix(path, expected_shape: Sequence[int] | None = None) -> DistanceMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + 4:
        raise MatrixFileError(f"{path}: checksum mismatch (file truncated)")
    header, body, trailer = raw[: _HEADER.size], raw[_HEADER.size : -4], raw[-4:]
    magic, version, n, f, code = _HEADER.unpack(header)
    if magic != MAGIC:
        raise MatrixFileError(f"{path}: not a distance matrix file")
    if version != FORMAT_VERSION:
        raise MatrixFileError(f"{path}: unsupported version {version}")
    (crc,) = struct.unpack("<I", trailer)
    if len(body) != 8 * n * f or zlib.crc32(body, zlib.crc32(header)) != crc:
        raise MatrixFileError(f"{path}: checksum mismatch")
    if expected_shape is not None and (n, f) != tuple(expected_shape):
        raise MatrixFileError(f"{path}: dimension mismatch, file is {n}x{f}, instance is {expected_shape[0]}x{expected_shape[1]}")
    values = np.frombuffer(body, dtype="<f8").reshape(n, f).astype(np.float64)
    return DistanceMatrix(values, _CODE_KINDS[code])
