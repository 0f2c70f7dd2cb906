import json
from collections import Counter, deque
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swats.model import (
    ClipBounds,
    Scenario,
    Subtask,
    TaskEdge,
    TaskGraph,
    derive_edge_weights,
    dumps_scenario,
    gen_cloud,
    gen_task,
    loads_scenario,
    validate_scenario,
)

from conftest import make_cloud, make_task


def reachable(n, pairs):
    adj = {i: set() for i in range(n)}
    for a, b in pairs:
        adj[a].add(b)
        adj[b].add(a)
    seen, queue = {0}, deque([0])
    while queue:
        for y in adj[queue.popleft()] - seen:
            seen.add(y)
            queue.append(y)
    return len(seen) == n


class TestGenTask:
    def test_star_six(self):
        g = gen_task("star", 6, rng_seed=0)
        assert sorted(g.degrees(), reverse=True) == [5, 1, 1, 1, 1, 1]
        assert g.topology_tag == "star"

    def test_ring_three(self):
        g = gen_task("ring", 3, rng_seed=0)
        assert len(g.edges) == 3
        assert g.degrees() == [2, 2, 2]

    def test_tadpole_six(self):
        # cycle 0-1-2-0 plus tail 0-3-4-5, worked out by hand
        g = gen_task("tadpole", 6, rng_seed=0)
        assert [(e.u, e.v) for e in g.edges] == [(0, 1), (0, 2), (0, 3), (1, 2), (3, 4), (4, 5)]
        assert g.degrees() == [3, 2, 2, 2, 2, 1]

    def test_tadpole_four_keeps_a_real_cycle(self):
        g = gen_task("tadpole", 4, rng_seed=0)
        assert len(g.edges) == 4
        assert sorted(g.degrees()) == [1, 2, 2, 3]

    @pytest.mark.parametrize("topo,n", [("ring", 2), ("tadpole", 3), ("star", 1), ("wheel", 6)])
    def test_rejects(self, topo, n):
        with pytest.raises(ValueError):
            gen_task(topo, n)

    def test_rejects_bad_range(self):
        with pytest.raises(ValueError):
            gen_task("star", 4, {"cycles": (3.0, 1.0)})

    def test_attributes_inside_ranges(self):
        ranges = {"tolerable_time": (3, 6), "data_size": (2, 6), "cycles": (2, 8)}
        g = gen_task("ring", 9, ranges, rng_seed=5)
        for s in g.subtasks:
            assert 3 <= s.tolerable_time <= 6
            assert 2 <= s.data_size <= 6
            assert 2 <= s.cycles <= 8

    @given(st.sampled_from(["star", "ring", "tadpole"]), st.integers(4, 15), st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_deterministic_and_connected(self, topo, n, seed):
        a = gen_task(topo, n, rng_seed=seed)
        b = gen_task(topo, n, rng_seed=seed)
        assert a == b
        assert reachable(n, [(e.u, e.v) for e in a.edges])
        assert not a.violations()
        if topo == "star":
            assert Counter(a.degrees())[n - 1] == 1


class TestEdgeWeights:
    def test_min_of_completion_times(self):
        # completion times 2 s and 3 s at nominal f=1, r=1
        task = TaskGraph((Subtask(0, 5, 1.0, 1.0), Subtask(1, 5, 1.0, 2.0)), (TaskEdge(0, 1, 0.0),))
        assert derive_edge_weights(task, 1.0, 1.0).edges[0].weight == 2.0
        assert derive_edge_weights(task, 1.0, 1.0, rule="max").edges[0].weight == 3.0

    def test_zero_workload(self):
        task = make_task(2, [(0, 1, 5.0)])
        assert derive_edge_weights(task, 3.0, 6.0).edges[0].weight == 0.0

    def test_hand_arithmetic(self):
        task = make_task(2, [(0, 1, 0.0)], data=4.0, cycles=6.0)
        out = derive_edge_weights(task, nominal_f=3.0, nominal_r=4.0)
        assert out.edges[0].weight == pytest.approx(3.0)
        assert task.edges[0].weight == 0.0  # input untouched

    def test_rejects_nonpositive_nominal(self):
        with pytest.raises(ValueError):
            derive_edge_weights(make_task(2, [(0, 1, 0.0)]), 0.0, 1.0)

    @given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0, 5))
    def test_monotone(self, d0, k0, d1, k1, bump):
        base = TaskGraph((Subtask(0, 1, d0, k0), Subtask(1, 1, d1, k1)), (TaskEdge(0, 1, 0),))
        more = replace(base, subtasks=(Subtask(0, 1, d0 + bump, k0 + bump), base.subtasks[1]))
        assert derive_edge_weights(more).edges[0].weight >= derive_edge_weights(base).edges[0].weight


class TestGenCloud:
    def test_two_vehicles(self):
        c = gen_cloud(2, 1.0, rng_seed=1)
        assert [(e.a, e.b) for e in c.edges] == [(0, 1)]
        assert all(2 <= v.f_mean <= 4 for v in c.vehicles)

    def test_complete(self):
        assert len(gen_cloud(7, 1.0, rng_seed=2).edges) == 21

    @pytest.mark.parametrize("seed", range(20))
    def test_sparse_still_connected(self, seed):
        c = gen_cloud(15, 0.4, rng_seed=seed)
        assert len(c.edges) >= 14
        assert reachable(15, [(e.a, e.b) for e in c.edges])

    def test_default_parameter_ranges(self):
        c = gen_cloud(10, 0.5, rng_seed=3)
        for v in c.vehicles:
            assert 2 <= v.f_mean <= 4 and 0.04 <= v.f_var <= 0.07
            assert 5 <= v.r_mean <= 7 and v.r_var == 0.55
        for e in c.edges:
            assert 5 <= e.t_mean <= 16 and 0.03 <= e.c_mean <= 0.07 and e.c_var == 0.001

    def test_rejects(self):
        with pytest.raises(ValueError):
            gen_cloud(1)
        with pytest.raises(ValueError):
            gen_cloud(5, 0.0)

    def test_deterministic(self):
        assert gen_cloud(9, 0.5, rng_seed=7) == gen_cloud(9, 0.5, rng_seed=7)


class TestValidate:
    def test_generated_is_valid(self, default_scenario):
        assert validate_scenario(default_scenario) == []

    def test_pigeonhole(self):
        s = Scenario(gen_task("star", 6, rng_seed=0), gen_cloud(5, 1.0, rng_seed=0))
        problems = validate_scenario(s)
        assert len(problems) == 1 and "injective" in problems[0]

    def test_weights_need_not_sum_to_one(self, default_scenario):
        assert validate_scenario(replace(default_scenario, w_time=0.7, w_cost=0.5)) == []

    def test_reports_every_problem(self, default_scenario):
        s = replace(default_scenario, w_time=1.5, eps1=-0.1, eps2=2.0,
                    clips=ClipBounds(f_lo=5.0))
        problems = validate_scenario(s)
        assert len(problems) == 4

    def test_disconnected(self):
        task = make_task(4, [(0, 1, 0.0), (2, 3, 0.0)])
        cloud = make_cloud(4, [(0, 1), (2, 3)])
        problems = validate_scenario(Scenario(task, cloud))
        assert any("task: graph is disconnected" in p for p in problems)
        assert any("cloud: graph is disconnected" in p for p in problems)

    def test_duplicate_edge(self):
        task = make_task(2, [(0, 1, 0.0), (1, 0, 0.0)])
        assert any("duplicate" in p for p in task.violations())


def test_subtask_invariants():
    with pytest.raises(ValueError):
        Subtask(0, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        Subtask(0, 1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        TaskEdge(1, 1, 0.0)


def test_edges_canonicalised():
    assert TaskEdge(3, 1, 0.5) == TaskEdge(1, 3, 0.5)


def test_serialization_round_trip(default_scenario):
    text = dumps_scenario(default_scenario)
    assert loads_scenario(text) == default_scenario
    assert dumps_scenario(loads_scenario(text)) == text
    doc = json.loads(text)
    assert "t_mean_s" in doc["cloud"]["edges"][0]
    assert "tolerable_time_s" in doc["task"]["subtasks"][0]
