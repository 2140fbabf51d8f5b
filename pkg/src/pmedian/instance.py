"""Problem instances: customers, candidate sites, weights and file I/O."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .distances import (
    EUCLIDEAN,
    GRAPH,
    DistanceMatrix,
    MatrixFileError,
    Projection,
    StreetGraph,
    euclidean_matrix,
    graph_matrix,
    load_matrix,
)

log = logging.getLogger(__name__)

UNIFORM = "uniform"
CITIZENS = "citizens"
DEMAND = "demand"
WEIGHT_KINDS = (UNIFORM, CITIZENS, DEMAND)
DISTANCE_KINDS = (EUCLIDEAN, GRAPH)


class InstanceError(ValueError):
    pass


class InstanceParseError(InstanceError):
    pass


class InstanceValidationError(InstanceError):
    pass


@dataclass(frozen=True)
class Customer:
    id: int
    lat: float
    lon: float
    population: int
    graph_node: Optional[int] = None

    def __post_init__(self):
        if self.population < 0:
            raise InstanceValidationError(f"customer {self.id} has negative population")


@dataclass(frozen=True)
class CandidateSite:
    id: int
    lat: float
    lon: float
    graph_node: Optional[int] = None


@dataclass
class WeightModel:
    kind: str
    weights: np.ndarray

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise InstanceValidationError(f"unknown weight kind {self.kind!r}")
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise InstanceValidationError("weights must be finite and non-negative")
        self.weights.setflags(write=False)


@dataclass
class StationActivityLog:
    """Occupancy samples per station, plus each station's coordinates."""

    station_id: np.ndarray
    timestamp: np.ndarray
    occupied: np.ndarray
    slots: np.ndarray
    coords: dict  # station_id -> (lat, lon)

    def __post_init__(self):
        self.station_id = np.asarray(self.station_id, dtype=np.int64)
        self.timestamp = np.asarray(self.timestamp, dtype=np.int64)
        self.occupied = np.asarray(self.occupied, dtype=np.int64)
        self.slots = np.asarray(self.slots, dtype=np.int64)
        n = len(self.station_id)
        if not (len(self.timestamp) == len(self.occupied) == len(self.slots) == n):
            raise InstanceValidationError("activity columns have different lengths")
        if np.any(self.slots <= 0):
            raise InstanceValidationError("activity rows need slots > 0")
        if np.any(self.occupied < 0) or np.any(self.occupied > self.slots):
            raise InstanceValidationError("activity rows need 0 <= occupied <= slots")
        missing = set(np.unique(self.station_id).tolist()) - set(self.coords)
        if missing:
            raise InstanceValidationError(f"stations without coordinates: {sorted(missing)}")

    @property
    def stations(self) -> list[int]:
        return sorted(set(np.unique(self.station_id).tolist()))

    def __len__(self):
        return len(self.station_id)


def station_activity(log: StationActivityLog, station_id: int) -> float:
    """Mean occupied slots over mean total slots for one station."""
    mask = log.station_id == station_id
    if not mask.any():
        raise KeyError(f"unknown station id {station_id}")
    return float(log.occupied[mask].mean() / log.slots[mask].mean())


def _quantize(d: np.ndarray) -> np.ndarray:
    # distances closer than a micrometer count as ties
    return np.round(d, 6)


def derive_demand_weights(customers: Sequence[Customer], log: StationActivityLog) -> WeightModel:
    """Population times the activity of the straight-line nearest station.

    Equidistant stations resolve to the lowest station id.
    """
    if len(log) == 0:
        raise InstanceValidationError("activity log is empty")
    stations = log.stations
    activity = np.array([station_activity(log, s) for s in stations])
    slat = np.array([log.coords[s][0] for s in stations], dtype=float)
    slon = np.array([log.coords[s][1] for s in stations], dtype=float)
    clat = np.array([c.lat for c in customers], dtype=float)
    clon = np.array([c.lon for c in customers], dtype=float)
    proj = Projection.centered_on(np.concatenate([clat, slat]), np.concatenate([clon, slon]))
    cx, cy = proj.project(clat, clon)
    sx, sy = proj.project(slat, slon)
    d = _quantize(np.hypot(cx[:, None] - sx[None, :], cy[:, None] - sy[None, :]))
    # stations are sorted by id, so argmin's first hit is the lowest id
    nearest = np.argmin(d, axis=1) if len(customers) else np.zeros(0, dtype=int)
    pops = np.array([c.population for c in customers], dtype=float)
    return WeightModel(DEMAND, pops * activity[nearest])


def build_weight_model(kind: str, customers: Sequence[Customer], activity: StationActivityLog | None = None) -> WeightModel:
    if kind == UNIFORM:
        return WeightModel(UNIFORM, np.ones(len(customers)))
    if kind == CITIZENS:
        return WeightModel(CITIZENS, np.array([c.population for c in customers], dtype=float))
    if kind == DEMAND:
        if activity is None:
            raise InstanceValidationError("demand weights need activity.csv")
        return derive_demand_weights(customers, activity)
    raise InstanceValidationError(f"unknown weight kind {kind!r}")


@dataclass
class Instance:
    customers: list
    sites: list
    p: int
    distance_kind: str
    distances: DistanceMatrix
    weight_model: WeightModel
    fixed_sites: tuple = ()
    graph: StreetGraph | None = None
    activity: StationActivityLog | None = None
    baseline: tuple | None = None
    source: Path | None = None
    # shared between scenario views of the same data
    _matrices: dict = field(default_factory=dict, repr=False, compare=False)
    _domains: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.validate()
        self._matrices.setdefault(self.distance_kind, self.distances)

    def validate(self) -> None:
        n, f = len(self.customers), len(self.sites)
        _check_unique([c.id for c in self.customers], "customer")
        _check_unique([s.id for s in self.sites], "site")
        for c in self.customers:
            if c.population < 0:
                raise InstanceValidationError(f"customer {c.id} has negative population")
        if not (1 <= self.p <= f):
            raise InstanceValidationError(f"p={self.p} out of range [1, {f}]")
        if len(self.fixed_sites) > self.p:
            raise InstanceValidationError("more fixed sites than p")
        if len(set(self.fixed_sites)) != len(self.fixed_sites):
            raise InstanceValidationError("duplicate fixed sites")
        if any(not (0 <= j < f) for j in self.fixed_sites):
            raise InstanceValidationError("fixed site index out of range")
        if self.distances.shape != (n, f):
            raise InstanceValidationError(f"distance matrix is {self.distances.shape}, expected {(n, f)}")
        if len(self.weight_model.weights) != n:
            raise InstanceValidationError("weight vector length differs from number of customers")

    @property
    def n_customers(self) -> int:
        return len(self.customers)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def weights(self) -> np.ndarray:
        return self.weight_model.weights

    @property
    def D(self) -> np.ndarray:
        return self.distances.values

    def site_index(self) -> dict:
        return {s.id: j for j, s in enumerate(self.sites)}

    def site_ids(self, indices) -> list[int]:
        return [self.sites[j].id for j in indices]

    def indices_for_ids(self, ids) -> list[int]:
        lookup = self.site_index()
        out = []
        for sid in ids:
            if sid not in lookup:
                raise InstanceValidationError(f"unknown site id {sid}")
            out.append(lookup[sid])
        return out

    def projection(self) -> Projection:
        lats = [c.lat for c in self.customers] + [s.lat for s in self.sites]
        lons = [c.lon for c in self.customers] + [s.lon for s in self.sites]
        return Projection.centered_on(lats, lons)

    def matrix(self, kind: str) -> DistanceMatrix:
        if kind not in self._matrices:
            if kind == EUCLIDEAN:
                self._matrices[kind] = euclidean_matrix(self.customers, self.sites)
            elif kind == GRAPH:
                if self.graph is None:
                    raise InstanceValidationError("graph distances need graph.csv")
                self._matrices[kind] = graph_matrix(self.graph, self.customers, self.sites)
            else:
                raise InstanceValidationError(f"unknown distance kind {kind!r}")
        return self._matrices[kind]

    def weights_for(self, kind: str) -> WeightModel:
        if kind == self.weight_model.kind:
            return self.weight_model
        return build_weight_model(kind, self.customers, self.activity)

    def with_scenario(self, distance: str | None = None, weight: str | None = None) -> "Instance":
        distance = distance or self.distance_kind
        weight = weight or self.weight_model.kind
        return dataclasses.replace(
            self, distance_kind=distance, distances=self.matrix(distance), weight_model=self.weights_for(weight)
        )

    def with_p(self, p: int, fixed_sites: Sequence[int] = ()) -> "Instance":
        return dataclasses.replace(self, p=int(p), fixed_sites=tuple(int(j) for j in fixed_sites))


def _check_unique(ids, what):
    seen = set()
    for i in ids:
        if i in seen:
            raise InstanceValidationError(f"duplicate {what} id {i}")
        seen.add(i)


def _read_csv(path: Path, required: Sequence[str]) -> list[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in required if c not in header]
            if missing:
                raise InstanceParseError(f"{path.name}: missing columns {missing}")
            return list(reader)
    except (OSError, csv.Error, UnicodeDecodeError) as exc:
        raise InstanceParseError(f"{path}: {exc}") from exc


def _opt_int(text):
    text = (text or "").strip()
    return int(text) if text else None


def _parse_rows(path, rows, convert):
    out = []
    for lineno, row in enumerate(rows, start=2):
        try:
            out.append(convert(row))
        except InstanceValidationError as exc:
            raise InstanceValidationError(f"{path.name}:{lineno}: {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise InstanceParseError(f"{path.name}:{lineno}: {exc}") from exc
    return out


def read_customers(path: Path) -> list[Customer]:
    rows = _read_csv(path, ["id", "lat", "lon", "population"])
    return _parse_rows(
        path,
        rows,
        lambda r: Customer(int(r["id"]), float(r["lat"]), float(r["lon"]), int(r["population"]), _opt_int(r.get("graph_node"))),
    )


def read_sites(path: Path) -> list[CandidateSite]:
    rows = _read_csv(path, ["id", "lat", "lon"])
    return _parse_rows(
        path, rows, lambda r: CandidateSite(int(r["id"]), float(r["lat"]), float(r["lon"]), _opt_int(r.get("graph_node")))
    )


def read_graph(path: Path, coords: dict | None = None) -> StreetGraph:
    rows = _read_csv(path, ["u", "v", "length_m"])
    edges = _parse_rows(path, rows, lambda r: (int(r["u"]), int(r["v"]), float(r["length_m"])))
    try:
        return StreetGraph.from_edges(edges, coords)
    except ValueError as exc:
        raise InstanceValidationError(f"{path.name}: {exc}") from exc


def read_activity(path: Path) -> StationActivityLog:
    rows = _read_csv(path, ["station_id", "lat", "lon", "timestamp", "occupied", "slots"])
    parsed = _parse_rows(
        path,
        rows,
        lambda r: (int(r["station_id"]), float(r["lat"]), float(r["lon"]), int(r["timestamp"]), int(r["occupied"]), int(r["slots"])),
    )
    coords = {}
    for sid, lat, lon, *_ in parsed:
        coords.setdefault(sid, (lat, lon))
    cols = list(zip(*parsed)) if parsed else [[]] * 6
    return StationActivityLog(cols[0], cols[3], cols[4], cols[5], coords)


def read_site_ids(path) -> list[int]:
    ids = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            ids.append(int(line))
        except ValueError as exc:
            raise InstanceParseError(f"{path}:{lineno}: not a site id: {line!r}") from exc
    return ids


def matrix_cache_path(directory, kind: str) -> Path:
    return Path(directory) / f"distances_{kind}.pmed"


def load_instance(path, distance: str | None = None, weight: str | None = None, use_cache: bool = True) -> Instance:
    """Read an instance directory and validate it.

    ``distance`` and ``weight`` override meta.json. A cached matrix
    (``distances_<kind>.pmed``) inside the directory is used when present.
    """
    root = Path(path)
    if not root.is_dir():
        raise InstanceParseError(f"{root}: not an instance directory")
    try:
        meta = json.loads((root / "meta.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InstanceParseError(f"{root / 'meta.json'}: {exc}") from exc
    if not isinstance(meta, dict) or "p" not in meta:
        raise InstanceParseError("meta.json must be an object with a 'p' entry")

    customers = read_customers(root / "customers.csv")
    sites = read_sites(root / "sites.csv")
    graph = read_graph(root / "graph.csv") if (root / "graph.csv").exists() else None
    activity = read_activity(root / "activity.csv") if (root / "activity.csv").exists() else None

    distance = (distance or meta.get("distance", EUCLIDEAN)).lower()
    weight = (weight or meta.get("weight", UNIFORM)).lower()
    if distance not in DISTANCE_KINDS:
        raise InstanceValidationError(f"unknown distance kind {distance!r}")
    if weight not in WEIGHT_KINDS:
        raise InstanceValidationError(f"unknown weight kind {weight!r}")

    try:
        p = int(meta["p"])
    except (TypeError, ValueError) as exc:
        raise InstanceParseError(f"meta.json: bad p {meta['p']!r}") from exc
    _check_unique([s.id for s in sites], "site")
    lookup = {s.id: j for j, s in enumerate(sites)}
    fixed = []
    for sid in meta.get("fixed_sites", []) or []:
        if sid not in lookup:
            raise InstanceValidationError(f"fixed site id {sid} not in sites.csv")
        fixed.append(lookup[sid])
    baseline = None
    if (root / "baseline.txt").exists():
        ids = read_site_ids(root / "baseline.txt")
        missing = [sid for sid in ids if sid not in lookup]
        if missing:
            raise InstanceValidationError(f"baseline.txt: unknown site ids {missing}")
        baseline = tuple(lookup[sid] for sid in ids)

    matrices = {}
    for kind in DISTANCE_KINDS:
        cache = matrix_cache_path(root, kind)
        if use_cache and cache.exists():
            try:
                m = load_matrix(cache, (len(customers), len(sites)))
            except MatrixFileError as exc:
                log.warning("ignoring distance cache: %s", exc)
                continue
            if m.kind == kind:
                matrices[kind] = m
    if distance not in matrices:
        if distance == GRAPH:
            if graph is None:
                raise InstanceValidationError("graph distances need graph.csv")
            matrices[distance] = graph_matrix(graph, customers, sites)
        else:
            matrices[distance] = euclidean_matrix(customers, sites)

    return Instance(
        customers=customers,
        sites=sites,
        p=p,
        distance_kind=distance,
        distances=matrices[distance],
        weight_model=build_weight_model(weight, customers, activity),
        fixed_sites=tuple(fixed),
        graph=graph,
        activity=activity,
        baseline=baseline,
        source=root,
        _matrices=matrices,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def write_instance(
    directory,
    customers: Sequence[Customer],
    sites: Sequence[CandidateSite],
    meta: dict,
    edges: Sequence[tuple] | None = None,
    activity_rows: Sequence[tuple] | None = None,
    baseline_ids: Sequence[int] | None = None,
) -> Path:
    """Write the line-oriented instance format (byte-stable for equal inputs)."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)

    def node(n):
        return "" if n is None else str(n)

    lines = ["id,lat,lon,population,graph_node"]
    lines += [f"{c.id},{_fmt(c.lat)},{_fmt(c.lon)},{c.population},{node(c.graph_node)}" for c in customers]
    (root / "customers.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = ["id,lat,lon,graph_node"]
    lines += [f"{s.id},{_fmt(s.lat)},{_fmt(s.lon)},{node(s.graph_node)}" for s in sites]
    (root / "sites.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    if edges is not None:
        lines = ["u,v,length_m"] + [f"{u},{v},{_fmt(length)}" for u, v, length in edges]
        (root / "graph.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if activity_rows is not None:
        lines = ["station_id,lat,lon,timestamp,occupied,slots"]
        lines += [f"{sid},{_fmt(lat)},{_fmt(lon)},{ts},{occ},{slots}" for sid, lat, lon, ts, occ, slots in activity_rows]
        (root / "activity.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if baseline_ids is not None:
        (root / "baseline.txt").write_text("".join(f"{sid}\n" for sid in baseline_ids), encoding="utf-8")
    (root / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return root
