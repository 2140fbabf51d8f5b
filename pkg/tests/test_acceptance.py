"""Acceptance checks, one test per criterion.

The desk-scale checks (5 and 6) share one synthetic city built on first use.
"""

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from helpers import brute_force_optimum, fresh_fitness, is_one_swap_optimal, random_instance
from pmedian.algorithms import run
from pmedian.config import iteration_budget, load_preset
from pmedian.distances import StreetGraph, euclidean_matrix, graph_matrix
from pmedian.evaluation import AssignmentState, Solution, apply_swap
from pmedian.experiment import ExperimentPlan, cmd_eval, cmd_expand, cmd_experiment, cmd_solve
from pmedian.instance import CandidateSite, Customer, load_instance
from pmedian.localsearch import fi
from pmedian.stats import ecdf, percent_improvement, wilcoxon_rank_sum
from pmedian.synth import generate_synthetic_city
from test_algorithms import ALGOS, check_contract, small_config
from test_distances import anchored, floyd_warshall, random_connected_graph
from test_stats import enumerated_p


@pytest.fixture(scope="module")
def desk_city(tmp_path_factory):
    path = generate_synthetic_city(1, 363, 2000, out_dir=tmp_path_factory.mktemp("desk"), p=23)
    inst = load_instance(path, distance="graph", weight="citizens")
    return path, inst


@pytest.mark.criterion(1, "GA/VNS reach the brute-force optimum; fi returns 1-swap optima")
def test_small_scale_optimality(criterion):
    hits = {"GA": 0, "VNS": 0}
    for s in range(20):
        inst = random_instance(1000 + s, 25, 15, 4)
        opt = brute_force_optimum(inst)
        for name in hits:
            res = run(inst, load_preset(name, seed=s, time_budget_s=10))
            hits[name] += res.fitness <= opt * (1 + 1e-9)
        rng = np.random.default_rng(s)
        for _ in range(20):
            start = Solution(tuple(int(j) for j in rng.choice(15, size=4, replace=False)))
            assert is_one_swap_optimal(inst, fi(inst, start).sites)
    print(f"optimum hits: {hits}")
    assert hits["GA"] >= 18 and hits["VNS"] >= 18


@pytest.mark.criterion(2, "incremental swap fitness tracks fresh evaluation over 1e5 swaps")
def test_delta_evaluation_equivalence(criterion):
    inst = random_instance(2, 100, 200, 10)
    rng = np.random.default_rng(2)
    state = AssignmentState.from_solution(inst, Solution(tuple(range(10))))
    worst = 0.0
    for _ in range(100_000):
        out = int(state.open[rng.integers(10)])
        inn = int(rng.integers(200))
        while state.is_open[inn]:
            inn = int(rng.integers(200))
        apply_swap(state, out, inn)
        fresh = float(inst.weights @ inst.D[:, state.open].min(axis=1))
        worst = max(worst, abs(state.fitness - fresh) / fresh)
        assert worst <= 1e-9
    print(f"worst relative drift: {worst:.2e}")


@pytest.mark.criterion(3, "graph distances match Floyd-Warshall; Euclidean matches the projection formula")
def test_distance_correctness(criterion):
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(2, 31))
        edges = random_connected_graph(rng, n, int(rng.integers(0, 2 * n)))
        customers, sites = anchored(n)
        m = graph_matrix(StreetGraph.from_edges(edges), customers, sites)
        np.testing.assert_array_equal(m.values, floyd_warshall(n, edges))

    lat = 36.68 + rng.uniform(0, 0.1, 60)
    lon = -4.48 + rng.uniform(0, 0.1, 60)
    customers = [Customer(i, lat[i], lon[i], 1) for i in range(30)]
    sites = [CandidateSite(i, lat[30 + i], lon[30 + i]) for i in range(30)]
    got = euclidean_matrix(customers, sites).values
    r, lat0 = 6_371_000.0, np.radians(lat.mean())
    dx = np.radians(lon[:30, None] - lon[None, 30:]) * np.cos(lat0) * r
    dy = np.radians(lat[:30, None] - lat[None, 30:]) * r
    np.testing.assert_allclose(got, np.hypot(dx, dy), rtol=1e-6)


@pytest.mark.criterion(4, "iteration budget formulas")
def test_budget_formulas(criterion):
    assert iteration_budget("NP5", 363, 23) == 1669
    assert iteration_budget("N2_100", 363, 23) == 726
    assert iteration_budget("P100", 363, 23) == 2300
    assert iteration_budget("M1", 363, 23) == 10**6


@pytest.mark.slow
@pytest.mark.criterion(5, "desk-scale city: GA median beats PSO median, one-sided rank-sum p < 0.05")
def test_desk_scale_ga_beats_pso(criterion, desk_city, tmp_path):
    _, inst = desk_city
    plan = ExperimentPlan(
        inst,
        [("GA", load_preset("GA")), ("PSO", load_preset("PSO"))],
        scenarios=[("graph", "citizens")],
        runs=10,
        time_budget_s=60,
        out_dir=tmp_path,
    )
    out = cmd_experiment(plan)
    assert not out["failures"]
    ga = [r.final_fitness for r in out["records"] if r.algorithm == "GA"]
    pso = [r.final_fitness for r in out["records"] if r.algorithm == "PSO"]
    _, p = wilcoxon_rank_sum(ga, pso, alternative="less")
    print(f"GA median {np.median(ga):.6g}, PSO median {np.median(pso):.6g}, one-sided p {p:.3g}")
    assert np.median(ga) < np.median(pso)
    assert p < 0.05


@pytest.mark.slow
@pytest.mark.criterion(6, "expansion from the 23-site baseline strictly shortens the mean walk")
def test_expansion_monotonicity(criterion, desk_city, tmp_path):
    path, inst = desk_city
    assert inst.baseline is not None and len(inst.baseline) == 23
    out = cmd_expand(inst, list(inst.baseline), [30, 35, 40, 45, 50], load_preset("GA"), seeds=10, out_dir=tmp_path)
    walks = [r["mean_walk_best_m"] for r in out["rows"]]
    for r in out["rows"]:
        print(f"target {r['target']}: mean walk {r['mean_walk_best_m']:.1f} m, reduction {r['reduction_best_pct']:.1f}%")
    assert all(b < a for a, b in zip(walks, walks[1:]))
    assert all(w < walks[0] for w in walks[1:])
    for t, sites in out["solutions"].items():
        assert list(sites[:23]) == list(inst.baseline)


@pytest.mark.criterion(7, "repeated commands give byte-identical result files")
def test_determinism(criterion, tmp_path):
    def files(d):
        return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file() and p.name != "manifest.json"}

    for tag in ("a", "b"):
        city = generate_synthetic_city(5, 40, 150, out_dir=tmp_path / tag / "city", p=6)
        inst = load_instance(city)
        for name in ALGOS:
            cmd_solve(inst, load_preset(name, seed=7, iter_budget=15, time_budget_s=30), tmp_path / tag / "solve" / name)
        cmd_experiment(
            ExperimentPlan(
                inst,
                [(n, load_preset(n, iter_budget=10, time_budget_s=30)) for n in ("GA", "SA")],
                scenarios=[("graph", "citizens"), ("euclidean", "demand")],
                runs=3,
                out_dir=tmp_path / tag / "exp",
            )
        )
        cmd_expand(inst, list(inst.baseline), [8, 10], load_preset("GA", iter_budget=10, time_budget_s=30), seeds=2, out_dir=tmp_path / tag / "exp2")
    a, b = files(tmp_path / "a"), files(tmp_path / "b")
    assert len(a) > 20
    assert a == b
    # eval is a pure function of its inputs
    sol = tmp_path / "a" / "solve" / "GA" / "solution.txt"
    assert cmd_eval(load_instance(tmp_path / "a" / "city"), sol) == cmd_eval(load_instance(tmp_path / "b" / "city"), sol)


@pytest.mark.criterion(8, "runner contracts hold on 100 random small instances each")
def test_runner_contracts(criterion):
    for name in ALGOS:

        @settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow], database=None)
        @given(data=st.data())
        def contract(data):
            seed = data.draw(st.integers(0, 2**31 - 1))
            f = data.draw(st.integers(3, 12))
            p = data.draw(st.integers(1, f - 1))
            k_fixed = data.draw(st.integers(0, p))
            inst = random_instance(seed, data.draw(st.integers(3, 14)), f, p, fixed=tuple(range(k_fixed)))
            cfg = small_config(name, seed % 1000, data.draw(st.integers(0, 12)))
            res, _ = check_contract(inst, cfg)
            if name in ("ILS", "VNS"):
                # elitist: never worse than the first local-search result
                first = run(inst, cfg.replace(iter_budget=0))
                assert res.fitness <= first.fitness * (1 + 1e-12)

        contract()


@pytest.mark.criterion(9, "exact rank-sum test matches enumeration; ECDF and improvement identities")
def test_statistics(criterion):
    rng = np.random.default_rng(9)
    for total in range(2, 11):
        for n_a in range(1, total):
            for trial in range(4):
                data = rng.integers(0, 4, size=total).astype(float) if trial % 2 else rng.normal(size=total)
                a, b = data[:n_a], data[n_a:]
                p2, low, high = enumerated_p(a, b)
                assert wilcoxon_rank_sum(a, b)[1] == pytest.approx(p2, abs=1e-12)
                assert wilcoxon_rank_sum(a, b, alternative="less")[1] == pytest.approx(low, abs=1e-12)
                assert wilcoxon_rank_sum(a, b, alternative="greater")[1] == pytest.approx(high, abs=1e-12)

    for _ in range(200):
        xs = rng.integers(0, 20, size=int(rng.integers(1, 30))).astype(float)
        steps = ecdf(xs)
        assert steps[-1][1] == 1.0
        assert [v for v, _ in steps] == sorted(set(xs.tolist()))
        for v, frac in steps:
            assert frac == pytest.approx(np.mean(xs <= v))
        base = float(rng.uniform(1, 1e6))
        run_f = float(rng.uniform(0, 2e6))
        assert percent_improvement(base, base) == 0.0
        assert percent_improvement(base, run_f) == pytest.approx(100 * (1 - run_f / base))
        assert (percent_improvement(base, run_f) > 0) == (run_f < base)
