import numpy as np
import pytest

from swats.model import (
    CloudGraph,
    Realization,
    Scenario,
    Subtask,
    TaskEdge,
    TaskGraph,
    V2VEdgeParams,
    VehicleParams,
    gen_cloud,
    gen_task,
)


def make_task(n, edges, data=0.0, cycles=0.0, tol=10.0, tag="custom"):
    subs = tuple(Subtask(i, tol, data, cycles) for i in range(n))
    return TaskGraph(subs, tuple(TaskEdge(u, v, w) for u, v, w in edges), tag)


def make_cloud(n, pairs, t_mean=10.0, c_mean=0.05, c_var=0.001, f_mean=3.0, f_var=0.05):
    vehicles = tuple(VehicleParams(i, f_mean, f_var, 6.0, 0.55) for i in range(n))
    edges = tuple(V2VEdgeParams(a, b, t_mean, c_mean, c_var) for a, b in pairs)
    return CloudGraph(vehicles, edges)


def fixed_realization(cloud, f=3.0, r=6.0, t=30.0, c=0.05):
    V, E = cloud.n, len(cloud.edges)
    return Realization(np.full(V, f), np.full(V, r), np.full(E, t), np.full(E, c))


def complete_pairs(n):
    return [(a, b) for a in range(n) for b in range(a + 1, n)]


@pytest.fixture
def default_scenario():
    return Scenario(gen_task("star", 6, rng_seed=3), gen_cloud(8, 0.6, rng_seed=4))


@pytest.fixture
def small_scenario():
    return Scenario(gen_task("ring", 4, rng_seed=11), gen_cloud(6, 0.7, rng_seed=12))


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
