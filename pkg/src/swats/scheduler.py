"""Stage-wise scheduling: an offline plan, an online check, and the baselines.

Plan A runs once per scenario on sampled network conditions and picks the
mapping alpha with the lowest expected cost among those whose deadline and
structure risks stay within ``eps1`` / ``eps2``.  Plan B runs at every
scheduling event: it keeps alpha when alpha works under the realized
conditions and otherwise searches for the cheapest feasible mapping beta.

Every policy is exposed both as a function (:func:`run_policy`) and as a
scikit-learn style estimator whose ``fit`` takes a :class:`Scenario` and whose
``predict`` takes a sequence of realizations.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .feasibility import (
    CostBreakdown,
    Mapping,
    RiskReport,
    deadline_risk_from_misses,
    deterministic_feasible,
    edge_failure_probability,
    realized_cost,
    risk_structure,
    subtask_time_samples,
)
from .model import Realization, Scenario
from .search import (
    DeterministicPredicate,
    EventTables,
    SearchPredicate,
    SearchStats,
    enumerate_feasible,
    exhaustive,
    greedy_degpref,
    greedy_timepref,
    random_mapping,
)
from .stochastic import RngStream, realize_batch
from .validation import check_realization, check_scenario

POLICIES = ("SWATS", "Onsite", "Random", "TimePref", "DegreePref", "ExSearch")
DEFAULT_MC_SAMPLES = 10_000


@dataclass(frozen=True)
class PlanAResult:
    alpha: Mapping | None
    expected_f: float
    risk_report: RiskReport | None
    offline_time: float
    candidates_considered: int
    expected_f_stderr: float = float("nan")

    def to_dict(self) -> dict:
        rr = self.risk_report
        return {
            "alpha": list(self.alpha.assign) if self.alpha is not None else None,
            "expected_f": _json_float(self.expected_f),
            "expected_f_stderr": _json_float(self.expected_f_stderr),
            "risk1": rr.risk1 if rr else None,
            "risk2": rr.risk2 if rr else None,
            "eps1": rr.eps1 if rr else None,
            "eps2": rr.eps2 if rr else None,
            "offline_time_s": self.offline_time,
            "candidates_considered": self.candidates_considered,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlanAResult":
        alpha = Mapping(tuple(d["alpha"])) if d.get("alpha") is not None else None
        rr = None
        if d.get("risk1") is not None:
            rr = RiskReport(d["risk1"], d["risk2"], alpha is not None, d["eps1"], d["eps2"])
        return cls(
            alpha,
            _from_json_float(d.get("expected_f")),
            rr,
            float(d.get("offline_time_s", 0.0)),
            int(d.get("candidates_considered", 0)),
            _from_json_float(d.get("expected_f_stderr")),
        )


def _json_float(x):
    return None if x is None or not np.isfinite(x) else float(x)


def _from_json_float(x):
    return float("nan") if x is None else float(x)


@dataclass(frozen=True)
class EventDecision:
    used: str  # "alpha", "beta" or "failed"
    mapping: Mapping | None
    cost: CostBreakdown | None
    decision_time: float
    stats: SearchStats | None = None

    @property
    def completed(self) -> bool:
        return self.used != "failed"


@dataclass(frozen=True)
class Policy:
    name: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in POLICIES:
            raise ValueError(f"unknown policy {self.name!r}; expected one of {POLICIES}")


class RiskPredicate(SearchPredicate):
    """Plan A's pruning rules, evaluated on common random numbers.

    A vehicle is dropped for a subtask when that subtask alone would miss its
    deadline too often, and a cloud edge is dropped for a task edge when that
    contact alone fails too often.  Both are sound because the joint risks
    can only be larger.  The full risks are checked at the leaves.
    """

    def __init__(self, s: Scenario, miss: np.ndarray):
        self.s = s
        self.miss = miss
        self.single_miss = miss.mean(axis=0)
        self.edge_risk = [
            [edge_failure_probability(s, k, j) for j in range(len(s.cloud.edges))]
            for k in range(len(s.task.edges))
        ]
        self._rows = np.arange(s.task.n)
        self.risks: dict[tuple[int, ...], tuple[float, float]] = {}

    def vertex_ok(self, subtask, vehicle):
        return self.single_miss[subtask, vehicle] <= self.s.eps1

    def edge_ok(self, task_edge, cloud_edge):
        return self.edge_risk[task_edge][cloud_edge] <= self.s.eps2

    def accept(self, assign):
        r2 = risk_structure(assign, self.s)
        if r2 > self.s.eps2:
            return False
        misses = self.miss[:, self._rows, np.asarray(assign)]
        r1 = deadline_risk_from_misses(misses, self.s.deadline_risk_mode)
        if r1 > self.s.eps1:
            return False
        self.risks[tuple(assign)] = (r1, r2)
        return True


def expected_costs(s: Scenario, batch, times: np.ndarray, candidates, chunk: int = 64):
    """Mean and standard error of F for each candidate on the same samples."""
    n = s.task.n
    rows = np.arange(n)
    means, errs = [], []
    for start in range(0, len(candidates), chunk):
        block = np.array([m.assign for m in candidates[start:start + chunk]], dtype=int)
        t = times[:, rows[None, :], block]  # (N, K, n)
        completion = t.max(axis=2) if s.completion_mode == "makespan" else t.sum(axis=2)
        edge_cols = np.array(
            [[s.cloud.edge_index(a[e.u], a[e.v]) for e in s.task.edges] for a in block],
            dtype=int,
        ).reshape(len(block), len(s.task.edges))
        exchange = batch.c[:, edge_cols].sum(axis=2)
        F = s.w_time * completion + s.w_cost * exchange
        means.append(F.mean(axis=0))
        errs.append(F.std(axis=0, ddof=1) / np.sqrt(F.shape[0]) if F.shape[0] > 1 else np.zeros(len(block)))
    if not means:
        return np.empty(0), np.empty(0)
    return np.concatenate(means), np.concatenate(errs)


def plan_a(s: Scenario, n_samples: int = DEFAULT_MC_SAMPLES, rng=None) -> PlanAResult:
    """Offline expected-cost optimal mapping under the two risk constraints.

    All candidates are scored on one shared set of sampled realizations, so the
    argmin compares mappings rather than sampling noise.
    """
    check_scenario(s)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = rng if rng is not None else RngStream(0, "plan_a_mc")
    start = time.perf_counter()
    batch = realize_batch(s, n_samples, rng)
    times = subtask_time_samples(s, batch)
    deadlines = np.array([sub.tolerable_time for sub in s.task.subtasks])
    miss = times > deadlines[None, :, None]

    pred = RiskPredicate(s, miss)
    candidates, _ = enumerate_feasible(s, pred)
    if not candidates:
        return PlanAResult(None, float("nan"), None, time.perf_counter() - start, 0)
    means, errs = expected_costs(s, batch, times, candidates)
    best = int(np.argmin(means))
    alpha = candidates[best]
    r1, r2 = pred.risks[alpha.assign]
    report = RiskReport(r1, r2, True, s.eps1, s.eps2)
    return PlanAResult(
        alpha,
        float(means[best]),
        report,
        time.perf_counter() - start,
        len(candidates),
        float(errs[best]),
    )


def _best_by_cost(tables: EventTables, mappings) -> Mapping | None:
    best, best_value = None, float("inf")
    for m in mappings:
        value = tables.cost(m.assign)
        if value < best_value:
            best, best_value = m, value
    return best


def plan_b(alpha: Mapping | None, s: Scenario, real: Realization) -> EventDecision:
    """Use alpha if it works under ``real``; otherwise the cheapest feasible mapping."""
    start = time.perf_counter()
    if alpha is not None and deterministic_feasible(alpha, s, real):
        elapsed = time.perf_counter() - start
        return EventDecision("alpha", alpha, realized_cost(alpha, s, real), elapsed)
    tables = EventTables(s, real)
    found, stats = enumerate_feasible(s, DeterministicPredicate(s, real, tables))
    beta = _best_by_cost(tables, found)
    elapsed = time.perf_counter() - start
    if beta is None:
        return EventDecision("failed", None, None, elapsed, stats)
    return EventDecision("beta", beta, realized_cost(beta, s, real), elapsed, stats)


def _single_mapping(m: Mapping, s: Scenario, real: Realization, start: float) -> EventDecision:
    ok = deterministic_feasible(m, s, real)
    elapsed = time.perf_counter() - start
    if not ok:
        return EventDecision("failed", m, None, elapsed)
    return EventDecision("beta", m, realized_cost(m, s, real), elapsed)


def run_policy(
    p: Policy | str, alpha: Mapping | None, s: Scenario, real: Realization, rng=None
) -> EventDecision:
    """Make one scheduling decision for ``real`` with policy ``p``.

    ``alpha`` is only consulted by SWATS; ``rng`` only by Random.  Baselines
    that construct a single mapping report ``failed`` when it is infeasible
    (the mapping is still attached for inspection).
    """
    if isinstance(p, str):
        p = Policy(p)
    name = p.name
    if name == "SWATS":
        return plan_b(alpha, s, real)
    if name == "Onsite":
        return plan_b(None, s, real)
    if name == "ExSearch":
        start = time.perf_counter()
        best, _, stats = exhaustive(s, real)
        elapsed = time.perf_counter() - start
        if best is None:
            return EventDecision("failed", None, None, elapsed, stats)
        return EventDecision("beta", best, realized_cost(best, s, real), elapsed, stats)
    start = time.perf_counter()
    if name == "Random":
        m = random_mapping(s, rng if rng is not None else p.parameters.get("seed", 0))
    elif name == "TimePref":
        m = greedy_timepref(s, real)
    else:
        m = greedy_degpref(s)
    return _single_mapping(m, s, real, start)


# --- estimator interface -------------------------------------------------

class BaseScheduler(BaseEstimator):
    """Common ``fit``/``predict`` plumbing; subclasses set ``policy_name``."""

    policy_name = ""

    def fit(self, scenario: Scenario, y=None):
        self.scenario_ = check_scenario(scenario)
        return self

    def _alpha(self):
        return None

    def decide(self, realization: Realization, rng=None) -> EventDecision:
        check_is_fitted(self, "scenario_")
        check_realization(self.scenario_, realization)
        return run_policy(Policy(self.policy_name), self._alpha(), self.scenario_, realization, rng)

    def predict(self, realizations, rngs=None) -> list[EventDecision]:
        """One decision per realization; ``rngs`` optionally pairs a stream with each."""
        realizations = list(realizations)
        if rngs is None:
            rngs = [None] * len(realizations)
        return [self.decide(real, rng) for real, rng in zip(realizations, rngs)]


class SWATSScheduler(BaseScheduler):
    """Plan A at ``fit`` time, Plan B at every ``predict``."""

    policy_name = "SWATS"

    def __init__(self, n_samples: int = DEFAULT_MC_SAMPLES, random_state: int = 0):
        self.n_samples = n_samples
        self.random_state = random_state

    def fit(self, scenario: Scenario, y=None, plan: PlanAResult | None = None):
        super().fit(scenario)
        if plan is None:
            plan = plan_a(scenario, self.n_samples, RngStream(self.random_state, "plan_a_mc"))
        self.plan_ = plan
        self.alpha_ = plan.alpha
        return self

    def _alpha(self):
        check_is_fitted(self, "plan_")
        return self.alpha_


class OnsiteScheduler(BaseScheduler):
    """Plan B alone: search the realized network at every event."""

    policy_name = "Onsite"


class ExSearchScheduler(BaseScheduler):
    policy_name = "ExSearch"


class TimePrefScheduler(BaseScheduler):
    policy_name = "TimePref"


class DegreePrefScheduler(BaseScheduler):
    policy_name = "DegreePref"


class RandomScheduler(BaseScheduler):
    policy_name = "Random"

    def __init__(self, random_state: int = 0):
        self.random_state = random_state

    def fit(self, scenario: Scenario, y=None):
        super().fit(scenario)
        self._gen = np.random.default_rng(self.random_state)
        return self

    def decide(self, realization, rng=None):
        check_is_fitted(self, "scenario_")
        return super().decide(realization, rng if rng is not None else self._gen)


SCHEDULERS = {
    "SWATS": SWATSScheduler,
    "Onsite": OnsiteScheduler,
    "Random": RandomScheduler,
    "TimePref": TimePrefScheduler,
    "DegreePref": DegreePrefScheduler,
    "ExSearch": ExSearchScheduler,
}


def make_scheduler(name: str, **params) -> BaseScheduler:
    try:
        cls = SCHEDULERS[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; expected one of {POLICIES}") from None
    return cls(**params)
