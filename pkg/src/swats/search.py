"""Exploring the space of subtask-to-vehicle mappings.

``enumerate_feasible`` is a degree-ordered backtracking subgraph-isomorphism
search that prunes with a caller-supplied predicate.  ``exhaustive`` walks
every injective assignment with no pruning at all and is the reference the
backtracking search is checked against.  The remaining functions build the
single mappings used by the greedy and random baselines.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

from .feasibility import Mapping, combine_times, f_value, subtask_time
from .model import Realization, Scenario
from .stochastic import as_generator


@dataclass(frozen=True)
class SearchStats:
    nodes_expanded: int = 0
    mappings_found: int = 0
    wall_time: float = 0.0


class EventTables:
    """Per-event lookup tables shared by the searches.

    ``cost`` reproduces :func:`swats.feasibility.realized_cost` operation for
    operation, so values compare exactly across policies.
    """

    def __init__(self, s: Scenario, real: Realization):
        self.scenario = s
        n, V = s.task.n, s.cloud.n
        f = [float(x) for x in real.f]
        r = [float(x) for x in real.r]
        self.c = [float(x) for x in real.c]
        t = [float(x) for x in real.t]
        self.time = [
            [subtask_time(sub.data_size, sub.cycles, f[v], r[v]) for v in range(V)]
            for sub in s.task.subtasks
        ]
        self.vertex_ok = [
            [self.time[i][v] <= sub.tolerable_time for v in range(V)]
            for i, sub in enumerate(s.task.subtasks)
        ]
        self.cloud_idx = [[-1] * V for _ in range(V)]
        for j, e in enumerate(s.cloud.edges):
            self.cloud_idx[e.a][e.b] = j
            self.cloud_idx[e.b][e.a] = j
        self.contact_ok = [
            [t[j] >= e.weight for j in range(len(t))] for e in s.task.edges
        ]
        self.edge_ends = [(e.u, e.v) for e in s.task.edges]

    def feasible(self, assign) -> bool:
        for i, v in enumerate(assign):
            if not self.vertex_ok[i][v]:
                return False
        for k, (u, w) in enumerate(self.edge_ends):
            j = self.cloud_idx[assign[u]][assign[w]]
            if j < 0 or not self.contact_ok[k][j]:
                return False
        return True

    def cost(self, assign) -> float:
        s = self.scenario
        times = [self.time[i][v] for i, v in enumerate(assign)]
        completion = combine_times(times, s.completion_mode)
        exchange = 0.0
        for u, w in self.edge_ends:
            exchange += self.c[self.cloud_idx[assign[u]][assign[w]]]
        return f_value(s, completion, exchange)


class SearchPredicate:
    """Admissibility test used to prune the backtracking search.

    The default admits everything, so the search returns every
    structure-preserving injective mapping.
    """

    def vertex_ok(self, subtask: int, vehicle: int) -> bool:
        return True

    def edge_ok(self, task_edge: int, cloud_edge: int) -> bool:
        return True

    def accept(self, assign: tuple[int, ...]) -> bool:
        return True


class DeterministicPredicate(SearchPredicate):
    """Realized deadlines and contact durations of one event; fully prunable."""

    def __init__(self, s: Scenario, real: Realization, tables: EventTables | None = None):
        self.tables = tables or EventTables(s, real)

    def vertex_ok(self, subtask, vehicle):
        return self.tables.vertex_ok[subtask][vehicle]

    def edge_ok(self, task_edge, cloud_edge):
        return self.tables.contact_ok[task_edge][cloud_edge]


def default_order(s: Scenario) -> list[int]:
    deg = s.task.degrees()
    return sorted(range(s.task.n), key=lambda u: (-deg[u], u))


def enumerate_feasible(
    s: Scenario, pred: SearchPredicate | None = None, order_hint=None
) -> tuple[list[Mapping], SearchStats]:
    """All injective, structure-preserving mappings accepted by ``pred``.

    Subtasks are placed in ``order_hint`` (default: decreasing task degree,
    ties by id).  A vehicle is a candidate only if it is unused, its cloud
    degree covers the subtask's task degree, ``pred.vertex_ok`` holds, and
    every already-placed neighbour passes ``pred.edge_ok``.  Results are
    sorted by assignment vector.
    """
    start = time.perf_counter()
    pred = pred or SearchPredicate()
    n, V = s.task.n, s.cloud.n
    if n > V:
        return [], SearchStats(0, 0, time.perf_counter() - start)
    order = list(order_hint) if order_hint is not None else default_order(s)
    if sorted(order) != list(range(n)):
        raise ValueError("order_hint must be a permutation of the subtask ids")
    pos = {u: k for k, u in enumerate(order)}

    tdeg = s.task.degrees()
    cdeg = s.cloud.degrees()
    cloud_idx = [[-1] * V for _ in range(V)]
    for j, e in enumerate(s.cloud.edges):
        cloud_idx[e.a][e.b] = j
        cloud_idx[e.b][e.a] = j

    # constraints checked when placing u: edges to neighbours placed earlier
    back = [[] for _ in range(n)]
    for k, e in enumerate(s.task.edges):
        later, earlier = (e.u, e.v) if pos[e.u] > pos[e.v] else (e.v, e.u)
        back[later].append((k, earlier))

    cands = [
        [v for v in range(V) if cdeg[v] >= tdeg[u] and pred.vertex_ok(u, v)]
        for u in range(n)
    ]

    assign = [-1] * n
    used = [False] * V
    found: list[tuple[int, ...]] = []
    nodes = 0

    def extend(depth: int):
        nonlocal nodes
        if depth == n:
            a = tuple(assign)
            if pred.accept(a):
                found.append(a)
            return
        u = order[depth]
        for v in cands[u]:
            if used[v]:
                continue
            for k, w in back[u]:
                j = cloud_idx[v][assign[w]]
                if j < 0 or not pred.edge_ok(k, j):
                    break
            else:
                nodes += 1
                assign[u] = v
                used[v] = True
                extend(depth + 1)
                used[v] = False
                assign[u] = -1

    extend(0)
    found.sort()
    stats = SearchStats(nodes, len(found), time.perf_counter() - start)
    return [Mapping(a) for a in found], stats


def exhaustive(s: Scenario, real: Realization):
    """Best deterministically feasible mapping by brute force over all assignments.

    Returns ``(best or None, number of feasible assignments, SearchStats)``;
    ``SearchStats.nodes_expanded`` is the number of assignments iterated.
    Ties go to the lexicographically smallest assignment vector.
    """
    start = time.perf_counter()
    tables = EventTables(s, real)
    best = None
    best_value = float("inf")
    count = 0
    iterated = 0
    for a in itertools.permutations(range(s.cloud.n), s.task.n):
        iterated += 1
        if not tables.feasible(a):
            continue
        count += 1
        value = tables.cost(a)
        if value < best_value:
            best_value = value
            best = a
    stats = SearchStats(iterated, count, time.perf_counter() - start)
    return (Mapping(best) if best is not None else None), count, stats


def greedy_timepref(s: Scenario, real: Realization) -> Mapping:
    """Each subtask in id order takes the unused vehicle that finishes it soonest."""
    _check_room(s)
    used = set()
    assign = []
    for sub in s.task.subtasks:
        best = min(
            (v for v in range(s.cloud.n) if v not in used),
            key=lambda v: (subtask_time(sub.data_size, sub.cycles, float(real.f[v]), float(real.r[v])), v),
        )
        used.add(best)
        assign.append(best)
    return Mapping(tuple(assign))


def greedy_degpref(s: Scenario) -> Mapping:
    """Highest-degree subtasks go to the best-connected vehicles."""
    _check_room(s)
    tdeg = s.task.degrees()
    cdeg = s.cloud.degrees()
    subtasks = sorted(range(s.task.n), key=lambda u: (-tdeg[u], u))
    vehicles = sorted(range(s.cloud.n), key=lambda v: (-cdeg[v], v))
    assign = [0] * s.task.n
    for u, v in zip(subtasks, vehicles):
        assign[u] = v
    return Mapping(tuple(assign))


def random_mapping(s: Scenario, rng) -> Mapping:
    """Uniformly random injective assignment."""
    _check_room(s)
    gen = as_generator(rng)
    return Mapping(tuple(int(v) for v in gen.choice(s.cloud.n, size=s.task.n, replace=False)))


def _check_room(s: Scenario):
    if s.cloud.n < s.task.n:
        raise ValueError(f"{s.task.n} subtasks cannot be placed on {s.cloud.n} vehicles")
