import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmedian.distances import (
    EARTH_RADIUS_M,
    DistanceError,
    DistanceMatrix,
    MatrixFileError,
    Projection,
    StreetGraph,
    dijkstra,
    euclidean_matrix,
    graph_matrix,
    load_matrix,
    save_matrix,
)
from pmedian.instance import CandidateSite, Customer


def floyd_warshall(n, edges):
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for u, v, length in edges:
        if length < d[u, v]:
            d[u, v] = d[v, u] = length
    for k in range(n):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    return d


def random_connected_graph(rng, n, extra, integer=True):
    edges = []
    for v in range(1, n):
        u = int(rng.integers(v))
        edges.append((u, v))
    for _ in range(extra):
        u, v = rng.choice(n, size=2, replace=False)
        edges.append((int(u), int(v)))
    if integer:
        return [(u, v, float(rng.integers(1, 100))) for u, v in edges]
    return [(u, v, float(rng.uniform(0.5, 100.0))) for u, v in edges]


def anchored(n):
    customers = [Customer(i, 0.0, 0.0, 1, graph_node=i) for i in range(n)]
    sites = [CandidateSite(i, 0.0, 0.0, graph_node=i) for i in range(n)]
    return customers, sites


def test_path_graph_unique_path():
    g = StreetGraph.from_edges([("a", "b", 3), ("b", "c", 4)])
    m = graph_matrix(g, [Customer(0, 0, 0, 1, "a")], [CandidateSite(0, 0, 0, "c")])
    assert m.values[0, 0] == 7.0


def test_same_node_is_zero():
    g = StreetGraph.from_edges([(1, 2, 5.0)])
    m = graph_matrix(g, [Customer(0, 0, 0, 1, 2)], [CandidateSite(0, 0, 0, 2)])
    assert m.values[0, 0] == 0.0


def test_eight_node_graph_matches_floyd_warshall():
    rng = np.random.default_rng(8)
    edges = random_connected_graph(rng, 8, 6)
    customers, sites = anchored(8)
    m = graph_matrix(StreetGraph.from_edges(edges), customers, sites)
    np.testing.assert_array_equal(m.values, floyd_warshall(8, edges))


def test_real_valued_lengths_match_oracle_to_rounding():
    rng = np.random.default_rng(81)
    edges = random_connected_graph(rng, 25, 40, integer=False)
    customers, sites = anchored(25)
    m = graph_matrix(StreetGraph.from_edges(edges), customers, sites)
    np.testing.assert_allclose(m.values, floyd_warshall(25, edges), rtol=1e-12)


def test_unreachable_pair_is_named():
    g = StreetGraph.from_edges([(1, 2, 1.0), (3, 4, 1.0)])
    with pytest.raises(DistanceError, match=r"site 9 \(node 3\) unreachable from customer 5 \(node 1\)"):
        graph_matrix(g, [Customer(5, 0, 0, 1, 1)], [CandidateSite(9, 0, 0, 3)])


def test_missing_anchor_rejected():
    g = StreetGraph.from_edges([(1, 2, 1.0)])
    with pytest.raises(DistanceError, match="no graph_node"):
        graph_matrix(g, [Customer(5, 0, 0, 1, None)], [CandidateSite(9, 0, 0, 2)])


@pytest.mark.parametrize("edge", [(1, 1, 2.0), (1, 2, 0.0), (1, 2, -3.0), (1, 2, math.inf)])
def test_bad_edges_rejected(edge):
    with pytest.raises(DistanceError):
        StreetGraph.from_edges([edge])


def test_dijkstra_independent_of_insertion_order():
    rng = np.random.default_rng(3)
    edges = random_connected_graph(rng, 20, 25)
    a = dijkstra(StreetGraph.from_edges(edges), 0)
    b = dijkstra(StreetGraph.from_edges(list(reversed(edges))), 0)
    assert a == b


def test_triangle_inequality_spot_check():
    rng = np.random.default_rng(5)
    edges = random_connected_graph(rng, 30, 30, integer=False)
    customers, sites = anchored(30)
    d = graph_matrix(StreetGraph.from_edges(edges), customers, sites).values
    for _ in range(500):
        i, j, k = rng.integers(30, size=3)
        assert d[i, j] <= d[i, k] + d[k, j] + 1e-9


def test_graph_distance_dominates_euclidean_on_planar_grid():
    # grid whose edge lengths are the projected segment lengths
    proj = Projection(36.72, -4.42)
    k = math.pi / 180 * EARTH_RADIUS_M
    coords = {}
    for r in range(5):
        for c in range(5):
            coords[r * 5 + c] = (36.72 + r * 100 / k, -4.42 + c * 100 / (k * math.cos(math.radians(36.72))))
    edges = []
    for r in range(5):
        for c in range(5):
            for dr, dc in ((0, 1), (1, 0)):
                if r + dr < 5 and c + dc < 5:
                    u, v = r * 5 + c, (r + dr) * 5 + c + dc
                    x1, y1 = proj.project(*coords[u])
                    x2, y2 = proj.project(*coords[v])
                    edges.append((u, v, float(np.hypot(x1 - x2, y1 - y2))))
    customers = [Customer(n, *coords[n], 1, graph_node=n) for n in coords]
    sites = [CandidateSite(n, *coords[n], graph_node=n) for n in coords]
    g = graph_matrix(StreetGraph.from_edges(edges), customers, sites).values
    e = euclidean_matrix(customers, sites, proj).values
    assert np.all(g >= e - 1e-6)


def test_coincident_points_zero():
    m = euclidean_matrix([Customer(0, 36.7, -4.4, 1)], [CandidateSite(0, 36.7, -4.4)])
    assert m.values[0, 0] == 0.0


def test_thousandth_degree_latitude_is_111_2_m():
    m = euclidean_matrix([Customer(0, 36.720, -4.42, 1)], [CandidateSite(0, 36.721, -4.42)])
    assert m.values[0, 0] == pytest.approx(111.2, abs=0.05)
    assert m.values[0, 0] == pytest.approx(0.001 * math.pi / 180 * 6_371_000, rel=1e-9)


def test_euclidean_matches_hand_projection():
    rng = np.random.default_rng(2)
    lat = 36.7 + rng.uniform(0, 0.05, 12)
    lon = -4.4 + rng.uniform(0, 0.05, 12)
    customers = [Customer(i, lat[i], lon[i], 1) for i in range(6)]
    sites = [CandidateSite(i, lat[6 + i], lon[6 + i]) for i in range(6)]
    m = euclidean_matrix(customers, sites).values
    lat0, lon0 = lat.mean(), lon.mean()
    for i in range(6):
        for j in range(6):
            dx = math.radians(lon[i] - lon[6 + j]) * math.cos(math.radians(lat0)) * 6_371_000
            dy = math.radians(lat[i] - lat[6 + j]) * 6_371_000
            assert m[i, j] == pytest.approx(math.hypot(dx, dy), rel=1e-6)
    assert lon0 == pytest.approx(Projection.centered_on(lat, lon).lon0)


def test_symmetry_on_single_point_set():
    rng = np.random.default_rng(4)
    pts = [CandidateSite(i, 36.7 + rng.uniform(0, 0.02), -4.4 + rng.uniform(0, 0.02)) for i in range(10)]
    m = euclidean_matrix(pts, pts).values
    np.testing.assert_allclose(m, m.T, rtol=0, atol=1e-9)


def test_distance_matrix_rejects_negative_and_nan():
    with pytest.raises(ValueError):
        DistanceMatrix(np.array([[1.0, -1.0]]), "euclidean")
    with pytest.raises(ValueError):
        DistanceMatrix(np.array([[np.nan]]), "graph")


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(1, 12),
    f=st.integers(1, 12),
    kind=st.sampled_from(["euclidean", "graph"]),
    seed=st.integers(0, 2**32 - 1),
)
def test_cache_round_trip_bit_exact(tmp_path_factory, n, f, kind, seed):
    values = np.random.default_rng(seed).uniform(0, 1e4, size=(n, f))
    path = tmp_path_factory.mktemp("m") / "d.pmed"
    save_matrix(DistanceMatrix(values, kind), path)
    back = load_matrix(path, (n, f))
    assert back.kind == kind
    assert back.values.tobytes() == values.tobytes()


def test_truncated_cache_is_checksum_error(tmp_path):
    path = tmp_path / "d.pmed"
    save_matrix(DistanceMatrix(np.ones((4, 5)), "graph"), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-9])
    with pytest.raises(MatrixFileError, match="checksum"):
        load_matrix(path)


def test_flipped_byte_is_checksum_error(tmp_path):
    path = tmp_path / "d.pmed"
    save_matrix(DistanceMatrix(np.ones((4, 5)), "graph"), path)
    raw = bytearray(path.read_bytes())
    raw[30] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(MatrixFileError, match="checksum"):
        load_matrix(path)


def test_wrong_dimension_rejected(tmp_path):
    path = tmp_path / "d.pmed"
    save_matrix(DistanceMatrix(np.ones((4, 5)), "euclidean"), path)
    with pytest.raises(MatrixFileError, match="dimension"):
        load_matrix(path, (3, 5))
