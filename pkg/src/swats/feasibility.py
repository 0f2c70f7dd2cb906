"""Mappings of subtasks onto vehicles and how to score them.

Boundary comparisons are inclusive: a subtask finishing exactly at its
tolerable time meets it, and a contact exactly as long as the edge weight
supports the exchange.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Realization, Scenario
from .stochastic import cdf_contact_below, contact_distribution, realize_batch


@dataclass(frozen=True, order=True)
class Mapping:
    """``assign[i]`` is the vehicle hosting subtask ``i``."""

    assign: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "assign", tuple(int(v) for v in self.assign))

    def __len__(self):
        return len(self.assign)

    def __getitem__(self, i):
        return self.assign[i]

    def is_injective(self) -> bool:
        return len(set(self.assign)) == len(self.assign)


@dataclass(frozen=True)
class CostBreakdown:
    completion_time: float
    exchange_cost: float
    f_value: float


@dataclass(frozen=True)
class RiskReport:
    risk1: float
    risk2: float
    feasible: bool
    eps1: float = 0.30
    eps2: float = 0.30


def _as_mapping(m) -> Mapping:
    return m if isinstance(m, Mapping) else Mapping(tuple(m))


def subtask_time(data_size: float, cycles: float, f: float, r: float) -> float:
    return data_size / r + cycles / f


def combine_times(times: Sequence[float], mode: str) -> float:
    if not times:
        return 0.0
    return max(times) if mode == "makespan" else math.fsum(times)


def f_value(s: Scenario, completion_time: float, exchange_cost: float) -> float:
    return s.w_time * completion_time + s.w_cost * exchange_cost


def structural_ok(m, s: Scenario) -> bool:
    """True iff ``m`` is injective, in range, and every task edge lands on a cloud edge."""
    m = _as_mapping(m)
    if len(m) != s.task.n or not m.is_injective():
        return False
    if any(not 0 <= v < s.cloud.n for v in m.assign):
        return False
    return all(s.cloud.edge_index(m[e.u], m[e.v]) is not None for e in s.task.edges)


def realized_cost(m, s: Scenario, real: Realization) -> CostBreakdown:
    m = _as_mapping(m)
    if not structural_ok(m, s):
        raise ValueError(f"mapping {m.assign} does not preserve the task structure")
    times = [
        subtask_time(sub.data_size, sub.cycles, float(real.f[v]), float(real.r[v]))
        for sub, v in zip(s.task.subtasks, m.assign)
    ]
    completion = combine_times(times, s.completion_mode)
    exchange = 0.0
    for e in s.task.edges:
        exchange += float(real.c[s.cloud.edge_index(m[e.u], m[e.v])])
    return CostBreakdown(completion, exchange, f_value(s, completion, exchange))


def deterministic_feasible(m, s: Scenario, real: Realization) -> bool:
    """Feasibility of ``m`` under the realized network conditions of one event."""
    m = _as_mapping(m)
    if not structural_ok(m, s):
        return False
    for sub, v in zip(s.task.subtasks, m.assign):
        if subtask_time(sub.data_size, sub.cycles, float(real.f[v]), float(real.r[v])) > sub.tolerable_time:
            return False
    for e in s.task.edges:
        if real.t[s.cloud.edge_index(m[e.u], m[e.v])] < e.weight:
            return False
    return True


def subtask_time_samples(s: Scenario, batch) -> np.ndarray:
    """Per-sample upload+execution times, shape (n_samples, n_subtasks, n_vehicles)."""
    data = np.array([sub.data_size for sub in s.task.subtasks])
    cycles = np.array([sub.cycles for sub in s.task.subtasks])
    return data[None, :, None] / batch.r[:, None, :] + cycles[None, :, None] / batch.f[:, None, :]


def _deadlines(s: Scenario) -> np.ndarray:
    return np.array([sub.tolerable_time for sub in s.task.subtasks])


def deadline_risk_from_misses(miss: np.ndarray, mode: str) -> float:
    """Risk from a (n_samples, n_subtasks) miss-indicator matrix."""
    if miss.shape[1] == 0:
        return 0.0
    if mode == "joint":
        return float(miss.any(axis=1).mean())
    return float(miss.mean(axis=0).max())


def risk_deadline(m, s: Scenario, n_samples: int, rng) -> float:
    """Monte Carlo probability that the task misses its deadline under ``m``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    m = _as_mapping(m)
    batch = realize_batch(s, n_samples, rng)
    idx = np.asarray(m.assign, dtype=int)
    times = subtask_time_samples(s, batch)[:, np.arange(s.task.n), idx]
    return deadline_risk_from_misses(times > _deadlines(s)[None, :], s.deadline_risk_mode)


def edge_failure_probability(s: Scenario, task_edge_idx: int, cloud_edge_idx: int) -> float:
    w = s.task.edges[task_edge_idx].weight
    return cdf_contact_below(w, contact_distribution(s, cloud_edge_idx))


def risk_structure(m, s: Scenario) -> float:
    """Probability that at least one mapped contact is shorter than its edge weight."""
    m = _as_mapping(m)
    survive = 1.0
    for k, e in enumerate(s.task.edges):
        j = s.cloud.edge_index(m[e.u], m[e.v])
        if j is None:
            return 1.0
        survive *= 1.0 - edge_failure_probability(s, k, j)
    return 1.0 - survive


def risk_feasible(m, s: Scenario, n_samples: int, rng) -> RiskReport:
    r1 = risk_deadline(m, s, n_samples, rng)
    r2 = risk_structure(m, s)
    ok = structural_ok(m, s) and r1 <= s.eps1 and r2 <= s.eps2
    return RiskReport(r1, r2, ok, s.eps1, s.eps2)
