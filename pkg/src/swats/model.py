"""Task graphs, vehicular cloud graphs and the scenario container.

Both graphs are undirected, simple and stored with canonical edge order
(``u < v``, sorted lexicographically) so that serialization and every
tie-break downstream are deterministic.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping as MappingABC, Sequence

import numpy as np

TOPOLOGIES = ("star", "ring", "tadpole")

# Task attributes are not fixed by the source model; see README for rationale.
DEFAULT_TASK_RANGES = {
    "tolerable_time": (1.0, 2.5),
    "data_size": (0.5, 2.0),
    "cycles": (0.5, 2.0),
}

DEFAULT_CLOUD_RANGES = {
    "f_mean": (2.0, 4.0),
    "f_var": (0.04, 0.07),
    "r_mean": (5.0, 7.0),
    "r_var": (0.55, 0.55),
    "t_mean": (5.0, 16.0),
    "c_mean": (0.03, 0.07),
    "c_var": (0.001, 0.001),
}

# nominal capability used to turn subtask workloads into edge weights
NOMINAL_F = 3.0
NOMINAL_R = 6.0


@dataclass(frozen=True)
class Subtask:
    id: int
    tolerable_time: float  # s
    data_size: float  # Mb
    cycles: float  # Gcycles

    def __post_init__(self):
        if not (self.tolerable_time > 0):
            raise ValueError(f"subtask {self.id}: tolerable_time must be > 0")
        for name in ("data_size", "cycles"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"subtask {self.id}: {name} must be finite and >= 0")


@dataclass(frozen=True)
class TaskEdge:
    u: int
    v: int
    weight: float  # required contact duration, s

    def __post_init__(self):
        if self.u == self.v:
            raise ValueError("self-loop in task graph")
        if self.u > self.v:
            u, v = self.v, self.u
            object.__setattr__(self, "u", u)
            object.__setattr__(self, "v", v)
        if not (math.isfinite(self.weight) and self.weight >= 0):
            raise ValueError(f"edge ({self.u},{self.v}): weight must be finite and >= 0")


def _canonical_edges(edges):
    edges = sorted(edges, key=lambda e: (e.u, e.v) if hasattr(e, "u") else (e.a, e.b))
    return tuple(edges)


def _connected(n: int, pairs: Iterable[tuple[int, int]]) -> bool:
    if n == 0:
        return True
    adj = [[] for _ in range(n)]
    for a, b in pairs:
        adj[a].append(b)
        adj[b].append(a)
    seen = {0}
    queue = deque([0])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return len(seen) == n


@dataclass(frozen=True)
class TaskGraph:
    subtasks: tuple[Subtask, ...]
    edges: tuple[TaskEdge, ...]
    topology_tag: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "subtasks", tuple(self.subtasks))
        object.__setattr__(self, "edges", _canonical_edges(self.edges))

    @property
    def n(self) -> int:
        return len(self.subtasks)

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for e in self.edges:
            deg[e.u] += 1
            deg[e.v] += 1
        return deg

    def violations(self) -> list[str]:
        out = []
        ids = [s.id for s in self.subtasks]
        if ids != list(range(len(ids))):
            out.append("task: subtask ids must be unique and contiguous from 0")
        if self.topology_tag not in TOPOLOGIES + ("custom",):
            out.append(f"task: unknown topology tag {self.topology_tag!r}")
        seen = set()
        for e in self.edges:
            if not (0 <= e.u < self.n and 0 <= e.v < self.n):
                out.append(f"task: edge ({e.u},{e.v}) references a missing subtask")
                continue
            if (e.u, e.v) in seen:
                out.append(f"task: duplicate edge ({e.u},{e.v})")
            seen.add((e.u, e.v))
        if not out and not _connected(self.n, seen):
            out.append("task: graph is disconnected")
        return out


@dataclass(frozen=True)
class VehicleParams:
    id: int
    f_mean: float  # GHz
    f_var: float  # GHz^2
    r_mean: float  # Mb/s
    r_var: float  # (Mb/s)^2


@dataclass(frozen=True)
class V2VEdgeParams:
    a: int
    b: int
    t_mean: float  # s, mean of the exponential contact duration
    c_mean: float
    c_var: float

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("self-loop in cloud graph")
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class CloudGraph:
    vehicles: tuple[VehicleParams, ...]
    edges: tuple[V2VEdgeParams, ...]

    def __post_init__(self):
        object.__setattr__(self, "vehicles", tuple(self.vehicles))
        object.__setattr__(self, "edges", _canonical_edges(self.edges))
        object.__setattr__(
            self, "_index", {(e.a, e.b): k for k, e in enumerate(self.edges)}
        )

    @property
    def n(self) -> int:
        return len(self.vehicles)

    def edge_index(self, a: int, b: int) -> int | None:
        """Position of the cloud edge joining ``a`` and ``b`` in ``edges``, or None."""
        if a > b:
            a, b = b, a
        return self._index.get((a, b))

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for e in self.edges:
            deg[e.a] += 1
            deg[e.b] += 1
        return deg

    def adjacency(self) -> list[set[int]]:
        adj = [set() for _ in range(self.n)]
        for e in self.edges:
            adj[e.a].add(e.b)
            adj[e.b].add(e.a)
        return adj

    def violations(self) -> list[str]:
        out = []
        ids = [v.id for v in self.vehicles]
        if ids != list(range(len(ids))):
            out.append("cloud: vehicle ids must be unique and contiguous from 0")
        for v in self.vehicles:
            if not (v.f_mean > 0 and v.r_mean > 0):
                out.append(f"cloud: vehicle {v.id} has non-positive f_mean or r_mean")
            if not (v.f_var > 0 and v.r_var > 0):
                out.append(f"cloud: vehicle {v.id} has non-positive variance")
        if len(self._index) != len(self.edges):
            out.append("cloud: duplicate V2V edge")
        for e in self.edges:
            if not (0 <= e.a < self.n and 0 <= e.b < self.n):
                out.append(f"cloud: edge ({e.a},{e.b}) references a missing vehicle")
            if not (e.t_mean > 0):
                out.append(f"cloud: edge ({e.a},{e.b}) has non-positive t_mean")
            if not (e.c_var > 0):
                out.append(f"cloud: edge ({e.a},{e.b}) has non-positive c_var")
        if not out and not _connected(self.n, self._index):
            out.append("cloud: graph is disconnected")
        return out


@dataclass(frozen=True)
class ClipBounds:
    f_lo: float = 1.5
    f_hi: float = 4.5
    t_lo: float = 0.0
    t_hi: float = 60.0
    c_lo: float = 0.025
    c_hi: float = 0.075
    r_lo: float = 4.0
    r_hi: float = 8.0

    def pairs(self) -> dict[str, tuple[float, float]]:
        return {
            "f": (self.f_lo, self.f_hi),
            "t": (self.t_lo, self.t_hi),
            "c": (self.c_lo, self.c_hi),
            "r": (self.r_lo, self.r_hi),
        }

    def violations(self) -> list[str]:
        return [
            f"clips: {name}_lo must be < {name}_hi"
            for name, (lo, hi) in self.pairs().items()
            if not lo < hi
        ]


@dataclass(frozen=True)
class Scenario:
    """A task graph bound to a cloud graph, plus cost weights and risk limits.

    ``completion_mode`` selects makespan (default) or sum-of-times completion;
    ``deadline_risk_mode`` selects the joint miss probability (default) or the
    worst single-subtask miss probability.
    """

    task: TaskGraph
    cloud: CloudGraph
    w_time: float = 0.5
    w_cost: float = 0.5
    eps1: float = 0.30
    eps2: float = 0.30
    clips: ClipBounds = field(default_factory=ClipBounds)
    completion_mode: str = "makespan"
    deadline_risk_mode: str = "joint"


@dataclass(frozen=True, eq=False)
class Realization:
    """One event's draw of f, r (per vehicle) and t, c (per cloud edge)."""

    f: np.ndarray
    r: np.ndarray
    t: np.ndarray
    c: np.ndarray
    clips: ClipBounds | None = None

    def __post_init__(self):
        for name in ("f", "r", "t", "c"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if len(self.f) != len(self.r) or len(self.t) != len(self.c):
            raise ValueError("realization: f/r and t/c must have matching lengths")
        if self.clips is not None:
            for name, (lo, hi) in self.clips.pairs().items():
                arr = getattr(self, name)
                if arr.size and (arr.min() < lo or arr.max() > hi):
                    raise ValueError(f"realization: {name} outside [{lo}, {hi}]")

    def __eq__(self, other):
        if not isinstance(other, Realization):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in ("f", "r", "t", "c")
        )

    __hash__ = None

    def digest(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for name in ("f", "r", "t", "c"):
            h.update(np.ascontiguousarray(getattr(self, name)).tobytes())
        return h.hexdigest()[:16]


def nominal_time(sub: Subtask, f: float, r: float) -> float:
    """Upload plus execution time of ``sub`` on a vehicle with rate ``r`` and speed ``f``."""
    return sub.data_size / r + sub.cycles / f


def derive_edge_weights(
    task: TaskGraph, nominal_f: float = NOMINAL_F, nominal_r: float = NOMINAL_R, rule: str = "min"
) -> TaskGraph:
    """Return a copy of ``task`` whose edge weights follow the nominal completion times.

    The weight of edge (u, v) is ``min(T_u, T_v)`` (or ``max`` with
    ``rule="max"``), where ``T_i`` is the time to upload and execute subtask
    ``i`` on a vehicle with the nominal rate and speed.
    """
    if not (nominal_f > 0 and nominal_r > 0):
        raise ValueError("nominal_f and nominal_r must be > 0")
    if rule not in ("min", "max"):
        raise ValueError(f"unknown edge-weight rule {rule!r}")
    pick = min if rule == "min" else max
    times = [nominal_time(s, nominal_f, nominal_r) for s in task.subtasks]
    edges = [TaskEdge(e.u, e.v, pick(times[e.u], times[e.v])) for e in task.edges]
    return replace(task, edges=tuple(edges))


def _topology_pairs(topology: str, n: int) -> list[tuple[int, int]]:
    if topology == "star":
        return [(0, i) for i in range(1, n)]
    if topology == "ring":
        if n < 3:
            raise ValueError("ring topology needs n_subtasks >= 3")
        return [(i, (i + 1) % n) for i in range(n)]
    if topology == "tadpole":
        if n < 4:
            raise ValueError("tadpole topology needs n_subtasks >= 4")
        head = max(3, math.ceil(n / 2))
        pairs = [(i, (i + 1) % head) for i in range(head)]
        pairs.append((0, head))
        pairs.extend((i, i + 1) for i in range(head, n - 1))
        return pairs
    raise ValueError(f"unknown topology {topology!r}; expected one of {TOPOLOGIES}")


def _check_ranges(ranges: MappingABC[str, Sequence[float]]):
    for name, (lo, hi) in ranges.items():
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            raise ValueError(f"invalid range for {name}: [{lo}, {hi}]")


def gen_task(
    topology: str,
    n_subtasks: int,
    attr_ranges: MappingABC[str, Sequence[float]] | None = None,
    rng_seed: int = 0,
    *,
    nominal_f: float = NOMINAL_F,
    nominal_r: float = NOMINAL_R,
    weight_rule: str = "min",
) -> TaskGraph:
    """Generate a star, ring or tadpole task with uniformly drawn subtask attributes.

    The tadpole is a cycle on ``max(3, ceil(n/2))`` subtasks with a path of the
    remaining subtasks hanging off subtask 0.
    """
    if n_subtasks < 2:
        raise ValueError("n_subtasks must be >= 2")
    pairs = _topology_pairs(topology, n_subtasks)
    ranges = {**DEFAULT_TASK_RANGES, **(attr_ranges or {})}
    _check_ranges(ranges)
    if ranges["tolerable_time"][0] <= 0 or min(ranges["data_size"][0], ranges["cycles"][0]) < 0:
        raise ValueError("tolerable_time must be > 0; data_size and cycles must be >= 0")
    rng = np.random.default_rng(rng_seed)
    subtasks = []
    for i in range(n_subtasks):
        tol = rng.uniform(*ranges["tolerable_time"])
        data = rng.uniform(*ranges["data_size"])
        cyc = rng.uniform(*ranges["cycles"])
        subtasks.append(Subtask(i, float(tol), float(data), float(cyc)))
    task = TaskGraph(tuple(subtasks), tuple(TaskEdge(u, v, 0.0) for u, v in pairs), topology)
    return derive_edge_weights(task, nominal_f, nominal_r, rule=weight_rule)


def gen_cloud(
    n_vehicles: int,
    connectivity_p: float = 0.6,
    param_ranges: MappingABC[str, Sequence[float]] | None = None,
    rng_seed: int = 0,
) -> CloudGraph:
    """Connected Erdos-Renyi cloud: G(n, p) plus a random spanning tree."""
    if n_vehicles < 2:
        raise ValueError("n_vehicles must be >= 2")
    if not (0 < connectivity_p <= 1):
        raise ValueError("connectivity_p must be in (0, 1]")
    ranges = {**DEFAULT_CLOUD_RANGES, **(param_ranges or {})}
    _check_ranges(ranges)
    rng = np.random.default_rng(rng_seed)

    pairs = set()
    for a in range(n_vehicles):
        for b in range(a + 1, n_vehicles):
            if rng.random() < connectivity_p:
                pairs.add((a, b))
    order = rng.permutation(n_vehicles)
    for k in range(1, n_vehicles):
        j = int(rng.integers(k))
        a, b = sorted((int(order[k]), int(order[j])))
        pairs.add((a, b))

    vehicles = []
    for i in range(n_vehicles):
        vehicles.append(
            VehicleParams(
                i,
                float(rng.uniform(*ranges["f_mean"])),
                float(rng.uniform(*ranges["f_var"])),
                float(rng.uniform(*ranges["r_mean"])),
                float(rng.uniform(*ranges["r_var"])),
            )
        )
    edges = []
    for a, b in sorted(pairs):
        edges.append(
            V2VEdgeParams(
                a,
                b,
                float(rng.uniform(*ranges["t_mean"])),
                float(rng.uniform(*ranges["c_mean"])),
                float(rng.uniform(*ranges["c_var"])),
            )
        )
    return CloudGraph(tuple(vehicles), tuple(edges))


def validate_scenario(s: Scenario) -> list[str]:
    """Every invariant violation in ``s``; an empty list means valid.

    Weights must each lie in [0, 1]; they are not required to sum to 1.
    """
    out = list(s.task.violations()) + list(s.cloud.violations()) + list(s.clips.violations())
    if s.cloud.n < s.task.n:
        out.append(
            f"no injective mapping: {s.task.n} subtasks but only {s.cloud.n} vehicles"
        )
    for name in ("w_time", "w_cost"):
        value = getattr(s, name)
        if not (0.0 <= value <= 1.0):
            out.append(f"{name}={value} outside [0, 1]")
    for name in ("eps1", "eps2"):
        value = getattr(s, name)
        if not (0.0 <= value <= 1.0):
            out.append(f"{name}={value} outside [0, 1]")
    if s.completion_mode not in ("makespan", "sum"):
        out.append(f"unknown completion_mode {s.completion_mode!r}")
    if s.deadline_risk_mode not in ("joint", "per_subtask"):
        out.append(f"unknown deadline_risk_mode {s.deadline_risk_mode!r}")
    return out


# --- serialization -------------------------------------------------------

def scenario_to_dict(s: Scenario) -> dict:
    return {
        "task": {
            "topology": s.task.topology_tag,
            "subtasks": [
                {
                    "id": t.id,
                    "tolerable_time_s": t.tolerable_time,
                    "data_size_mb": t.data_size,
                    "cycles_gcycles": t.cycles,
                }
                for t in s.task.subtasks
            ],
            "edges": [{"u": e.u, "v": e.v, "weight_s": e.weight} for e in s.task.edges],
        },
        "cloud": {
            "vehicles": [
                {
                    "id": v.id,
                    "f_mean_ghz": v.f_mean,
                    "f_var_ghz2": v.f_var,
                    "r_mean_mbps": v.r_mean,
                    "r_var_mbps2": v.r_var,
                }
                for v in s.cloud.vehicles
            ],
            "edges": [
                {"a": e.a, "b": e.b, "t_mean_s": e.t_mean, "c_mean": e.c_mean, "c_var": e.c_var}
                for e in s.cloud.edges
            ],
        },
        "w_time": s.w_time,
        "w_cost": s.w_cost,
        "eps1": s.eps1,
        "eps2": s.eps2,
        "clips": {
            "f_lo_ghz": s.clips.f_lo,
            "f_hi_ghz": s.clips.f_hi,
            "t_lo_s": s.clips.t_lo,
            "t_hi_s": s.clips.t_hi,
            "c_lo": s.clips.c_lo,
            "c_hi": s.clips.c_hi,
            "r_lo_mbps": s.clips.r_lo,
            "r_hi_mbps": s.clips.r_hi,
        },
        "completion_mode": s.completion_mode,
        "deadline_risk_mode": s.deadline_risk_mode,
    }


def scenario_from_dict(d: dict) -> Scenario:
    task = TaskGraph(
        tuple(
            Subtask(t["id"], t["tolerable_time_s"], t["data_size_mb"], t["cycles_gcycles"])
            for t in d["task"]["subtasks"]
        ),
        tuple(TaskEdge(e["u"], e["v"], e["weight_s"]) for e in d["task"]["edges"]),
        d["task"].get("topology", "custom"),
    )
    cloud = CloudGraph(
        tuple(
            VehicleParams(
                v["id"], v["f_mean_ghz"], v["f_var_ghz2"], v["r_mean_mbps"], v["r_var_mbps2"]
            )
            for v in d["cloud"]["vehicles"]
        ),
        tuple(
            V2VEdgeParams(e["a"], e["b"], e["t_mean_s"], e["c_mean"], e["c_var"])
            for e in d["cloud"]["edges"]
        ),
    )
    c = d.get("clips", {})
    defaults = ClipBounds()
    clips = ClipBounds(
        c.get("f_lo_ghz", defaults.f_lo),
        c.get("f_hi_ghz", defaults.f_hi),
        c.get("t_lo_s", defaults.t_lo),
        c.get("t_hi_s", defaults.t_hi),
        c.get("c_lo", defaults.c_lo),
        c.get("c_hi", defaults.c_hi),
        c.get("r_lo_mbps", defaults.r_lo),
        c.get("r_hi_mbps", defaults.r_hi),
    )
    return Scenario(
        task,
        cloud,
        w_time=d.get("w_time", 0.5),
        w_cost=d.get("w_cost", 0.5),
        eps1=d.get("eps1", 0.30),
        eps2=d.get("eps2", 0.30),
        clips=clips,
        completion_mode=d.get("completion_mode", "makespan"),
        deadline_risk_mode=d.get("deadline_risk_mode", "joint"),
    )


def dumps_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2)


def loads_scenario(text: str) -> Scenario:
    return scenario_from_dict(json.loads(text))
