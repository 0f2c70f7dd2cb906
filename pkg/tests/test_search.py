from collections import Counter
from itertools import permutations
from math import perm

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swats.feasibility import Mapping, deterministic_feasible, realized_cost, structural_ok
from swats.model import Realization, Scenario, gen_cloud, gen_task
from swats.search import (
    DeterministicPredicate,
    EventTables,
    SearchPredicate,
    enumerate_feasible,
    exhaustive,
    greedy_degpref,
    greedy_timepref,
    random_mapping,
)
from swats.stochastic import RngStream, realize

from conftest import complete_pairs, fixed_realization, make_cloud, make_task


def star(n, weight=0.0, **kw):
    return make_task(n, [(0, i, weight) for i in range(1, n)], tag="star", **kw)


class RejectEdges(SearchPredicate):
    def edge_ok(self, task_edge, cloud_edge):
        return False


def random_small_scenario(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    topo = rng.choice(["star", "ring", "tadpole"][: 1 + (n >= 3) + (n >= 4)])
    V = int(rng.integers(n, 8))
    task = gen_task(str(topo), n, rng_seed=seed)
    cloud = gen_cloud(V, float(rng.uniform(0.3, 1.0)), rng_seed=seed + 1)
    return Scenario(task, cloud)


class TestEnumerate:
    def test_star_in_complete_cloud(self):
        s = Scenario(star(6), make_cloud(7, complete_pairs(7)))
        found, stats = enumerate_feasible(s)
        assert len(found) == 7 * 6 * 5 * 4 * 3 * 2 == 5040
        assert stats.mappings_found == 5040
        _, count, _ = exhaustive(s, fixed_realization(s.cloud, t=60.0))
        assert count == 5040

    def test_task_larger_than_cloud(self):
        s = Scenario(star(6), make_cloud(5, complete_pairs(5)))
        assert enumerate_feasible(s)[0] == []

    def test_reject_all_edges(self):
        s = Scenario(star(5), make_cloud(7, complete_pairs(7)))
        found, stats = enumerate_feasible(s, RejectEdges())
        assert found == []
        assert stats.nodes_expanded <= s.task.n * s.cloud.n

    def test_sorted_and_deterministic(self, default_scenario):
        a, _ = enumerate_feasible(default_scenario)
        b, _ = enumerate_feasible(default_scenario)
        assert a == b and a == sorted(a)

    def test_order_hint(self, default_scenario):
        a, _ = enumerate_feasible(default_scenario)
        b, _ = enumerate_feasible(default_scenario, order_hint=range(default_scenario.task.n))
        assert a == b
        with pytest.raises(ValueError):
            enumerate_feasible(default_scenario, order_hint=[0, 0, 1, 2, 3, 4])

    def test_degree_filter(self):
        # path cloud has max degree 2, star centre needs 3
        s = Scenario(star(4), make_cloud(6, [(i, i + 1) for i in range(5)]))
        assert enumerate_feasible(s)[0] == []


class TestExhaustive:
    def test_iterates_all_permutations(self):
        s = Scenario(make_task(4, [(0, 1, 0), (1, 2, 0), (2, 3, 0)]), make_cloud(6, complete_pairs(6)))
        _, _, stats = exhaustive(s, fixed_realization(s.cloud))
        assert stats.nodes_expanded == 6 * 5 * 4 * 3 == 360

    def test_no_feasible(self):
        s = Scenario(star(4), make_cloud(6, [(i, i + 1) for i in range(5)]))
        best, count, _ = exhaustive(s, fixed_realization(s.cloud))
        assert best is None and count == 0

    def test_tie_break_is_lexicographic(self):
        s = Scenario(star(3), make_cloud(4, complete_pairs(4)))
        best, count, _ = exhaustive(s, fixed_realization(s.cloud))
        assert count == 24 and best == Mapping((0, 1, 2))

    @pytest.mark.parametrize("seed", range(15))
    def test_best_matches_enumeration(self, seed):
        s = random_small_scenario(seed)
        real = realize(s, RngStream(seed, "event:1"))
        best, count, _ = exhaustive(s, real)
        found, _ = enumerate_feasible(s, DeterministicPredicate(s, real))
        assert count == len(found)
        if found:
            values = [realized_cost(m, s, real).f_value for m in found]
            assert realized_cost(best, s, real).f_value == min(values)
        else:
            assert best is None


@given(st.integers(0, 10_000), st.integers(1, 50))
@settings(max_examples=60, deadline=None)
def test_oracle_equivalence(seed, event):
    s = random_small_scenario(seed)
    real = realize(s, RngStream(seed, f"event:{event}"))
    brute = {
        a for a in permutations(range(s.cloud.n), s.task.n) if deterministic_feasible(a, s, real)
    }
    found, stats = enumerate_feasible(s, DeterministicPredicate(s, real))
    assert {m.assign for m in found} == brute
    assert all(deterministic_feasible(m, s, real) for m in found)
    # the pruned tree never grows past the unpruned one
    tree = sum(perm(s.cloud.n, k) for k in range(1, s.task.n + 1))
    assert stats.nodes_expanded <= tree


def test_nodes_expanded_can_exceed_leaf_count():
    # a complete cloud with as many vehicles as subtasks prunes nothing, so
    # internal search nodes outnumber the n! complete assignments
    s = Scenario(make_task(3, [(0, 1, 0), (1, 2, 0)]), make_cloud(3, complete_pairs(3)))
    _, stats = enumerate_feasible(s)
    _, _, ex = exhaustive(s, fixed_realization(s.cloud))
    assert stats.nodes_expanded == 3 + 6 + 6 > ex.nodes_expanded == 6


def test_event_tables_match_realized_cost(default_scenario):
    s = default_scenario
    real = realize(s, RngStream(3))
    tables = EventTables(s, real)
    for m in enumerate_feasible(s)[0][:200]:
        assert tables.cost(m.assign) == realized_cost(m, s, real).f_value
        assert tables.feasible(m.assign) == deterministic_feasible(m, s, real)


class TestGreedyTime:
    def test_identical_vehicles(self):
        s = Scenario(star(4, data=1.0, cycles=1.0), make_cloud(6, complete_pairs(6)))
        assert greedy_timepref(s, fixed_realization(s.cloud)) == Mapping((0, 1, 2, 3))

    def test_dominant_vehicle(self):
        s = Scenario(star(4, data=1.0, cycles=1.0), make_cloud(6, complete_pairs(6)))
        f = np.full(6, 3.0)
        r = np.full(6, 6.0)
        f[4], r[4] = 4.5, 8.0
        real = Realization(f, r, np.full(15, 30.0), np.full(15, 0.05))
        assert greedy_timepref(s, real)[0] == 4

    @pytest.mark.parametrize("seed", range(10))
    def test_complete_cloud_always_structural(self, seed):
        s = Scenario(gen_task("ring", 5, rng_seed=seed), make_cloud(7, complete_pairs(7)))
        assert structural_ok(greedy_timepref(s, realize(s, RngStream(seed))), s)


class TestGreedyDegree:
    def test_star_on_star(self):
        s = Scenario(star(5), make_cloud(5, [(2, i) for i in range(5) if i != 2]))
        m = greedy_degpref(s)
        assert m[0] == 2 and structural_ok(m, s)

    def test_equal_degrees(self):
        ring = [(i, (i + 1) % 6) for i in range(6)]
        s = Scenario(make_task(4, [(0, 1, 0), (1, 2, 0), (2, 3, 0), (0, 3, 0)]), make_cloud(6, ring))
        assert greedy_degpref(s) == Mapping((0, 1, 2, 3))

    def test_may_be_infeasible(self):
        s = Scenario(star(4), make_cloud(6, [(0, 1), (0, 2), (3, 4), (4, 5), (2, 3)]))
        assert not structural_ok(greedy_degpref(s), s)


class TestRandom:
    def test_permutation(self):
        s = Scenario(star(6), make_cloud(6, complete_pairs(6)))
        assert sorted(random_mapping(s, RngStream(0)).assign) == list(range(6))

    def test_deterministic(self, default_scenario):
        assert random_mapping(default_scenario, RngStream(4, "x")) == random_mapping(default_scenario, RngStream(4, "x"))

    def test_uniform(self):
        s = Scenario(star(3), make_cloud(5, complete_pairs(5)))
        gen = np.random.default_rng(0)
        counts = Counter(random_mapping(s, gen)[0] for _ in range(100_000))
        for v in range(5):
            assert abs(counts[v] / 100_000 - 0.2) < 0.01

    def test_needs_room(self):
        with pytest.raises(ValueError):
            random_mapping(Scenario(star(6), make_cloud(5, complete_pairs(5))), RngStream(0))
