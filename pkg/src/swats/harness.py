"""Experiment loop, metrics, configuration and result files.

One run builds a seeded scenario, computes alpha once (offline, timed on its
own), then replays ``n_events`` scheduling events.  Every configured policy
sees exactly the same realization at each event.

Metrics per policy:

* AVCF -- mean cost F over the events the policy completed (failed events are
  excluded and counted in ``completion_rate`` instead);
* ART -- mean decision time over all events, in seconds;
* completion_rate -- fraction of events with a feasible mapping.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .model import (
    DEFAULT_CLOUD_RANGES,
    DEFAULT_TASK_RANGES,
    NOMINAL_F,
    NOMINAL_R,
    TOPOLOGIES,
    ClipBounds,
    Scenario,
    gen_cloud,
    gen_task,
)
from .scheduler import POLICIES, EventDecision, PlanAResult, plan_a, run_policy
from .stochastic import RngStream, realize
from .validation import ScenarioError, check_scenario

log = logging.getLogger(__name__)

CSV_HEADER = (
    "event",
    "policy",
    "used",
    "f_value",
    "completion_time",
    "exchange_cost",
    "decision_time_s",
    "feasible",
)
TIMING_COLUMNS = ("decision_time_s",)
SEED_ENV = "SWATS_SEED"


@dataclass
class Config:
    master_seed: int = 1
    n_events: int = 100
    topology: str = "star"
    n_subtasks: int = 6
    task_ranges: dict = field(default_factory=lambda: dict(DEFAULT_TASK_RANGES))
    weight_rule: str = "min"
    nominal_f: float = NOMINAL_F
    nominal_r: float = NOMINAL_R
    n_vehicles: int = 8
    connectivity_p: float = 0.6
    cloud_ranges: dict = field(default_factory=lambda: dict(DEFAULT_CLOUD_RANGES))
    w_time: float = 0.5
    w_cost: float = 0.5
    eps1: float = 0.30
    eps2: float = 0.30
    clips: dict = field(default_factory=lambda: asdict(ClipBounds()))
    completion_mode: str = "makespan"
    deadline_risk_mode: str = "joint"
    policies: list = field(default_factory=lambda: list(POLICIES))
    n_mc_samples: int = 10_000
    timed: bool = True
    jobs: int = 1
    output_dir: str = "results"

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ScenarioError([f"unknown config key {k!r}" for k in unknown])
        d = dict(d)
        for key, default in (("task_ranges", DEFAULT_TASK_RANGES), ("cloud_ranges", DEFAULT_CLOUD_RANGES)):
            if key in d:
                d[key] = {**default, **{k: tuple(v) for k, v in d[key].items()}}
        if "clips" in d:
            d["clips"] = {**asdict(ClipBounds()), **d["clips"]}
        if isinstance(d.get("policies"), str):
            d["policies"] = [p.strip() for p in d["policies"].split(",") if p.strip()]
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["task_ranges"] = {k: list(v) for k, v in self.task_ranges.items()}
        d["cloud_ranges"] = {k: list(v) for k, v in self.cloud_ranges.items()}
        return d


def load_config(path) -> Config:
    """Read a JSON or TOML config file."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".toml":
        data = _parse_toml(text)
    elif path.suffix == ".json":
        data = json.loads(text)
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            data = _parse_toml(text)
    return Config.from_dict(data)


def _parse_toml(text: str) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib.loads(text)


def config_violations(cfg: Config) -> list[str]:
    out = []
    if not isinstance(cfg.n_events, int) or cfg.n_events < 1:
        out.append("n_events must be an integer >= 1")
    if cfg.topology not in TOPOLOGIES:
        out.append(f"topology must be one of {TOPOLOGIES}")
    min_n = {"star": 2, "ring": 3, "tadpole": 4}.get(cfg.topology, 2)
    if cfg.n_subtasks < min_n:
        out.append(f"n_subtasks must be >= {min_n} for {cfg.topology}")
    if cfg.n_vehicles < 2:
        out.append("n_vehicles must be >= 2")
    elif cfg.n_vehicles < cfg.n_subtasks:
        out.append(f"no injective mapping: {cfg.n_subtasks} subtasks but only {cfg.n_vehicles} vehicles")
    if not (0 < cfg.connectivity_p <= 1):
        out.append("connectivity_p must be in (0, 1]")
    bad = [p for p in cfg.policies if p not in POLICIES]
    if bad:
        out.append(f"unknown policies {bad}; expected a subset of {list(POLICIES)}")
    if not cfg.policies:
        out.append("at least one policy is required")
    if len(set(cfg.policies)) != len(cfg.policies):
        out.append("policies must not repeat")
    if cfg.n_mc_samples < 1:
        out.append("n_mc_samples must be >= 1")
    if cfg.jobs < 1:
        out.append("jobs must be >= 1")
    for name in ("w_time", "w_cost", "eps1", "eps2"):
        value = getattr(cfg, name)
        if not (0.0 <= value <= 1.0):
            out.append(f"{name}={value} outside [0, 1]")
    try:
        clips = ClipBounds(**cfg.clips)
    except TypeError as exc:
        out.append(f"clips: {exc}")
        clips = ClipBounds()
    out.extend(clips.violations())
    for key, default in (("task_ranges", DEFAULT_TASK_RANGES), ("cloud_ranges", DEFAULT_CLOUD_RANGES)):
        ranges = getattr(cfg, key)
        for name, bounds in ranges.items():
            if name not in default:
                out.append(f"{key}: unknown attribute {name!r}")
            elif len(bounds) != 2 or not bounds[0] <= bounds[1]:
                out.append(f"{key}.{name}: expected [lo, hi] with lo <= hi")
    cr = cfg.cloud_ranges
    for name, (lo, hi) in (("f_mean", (clips.f_lo, clips.f_hi)), ("r_mean", (clips.r_lo, clips.r_hi)),
                           ("c_mean", (clips.c_lo, clips.c_hi))):
        if name in cr and len(cr[name]) == 2 and not (lo <= cr[name][0] and cr[name][1] <= hi):
            out.append(f"cloud_ranges.{name} must lie inside its clip interval [{lo}, {hi}]")
    for name in ("f_var", "r_var", "c_var", "t_mean"):
        if name in cr and len(cr[name]) == 2 and cr[name][0] <= 0:
            out.append(f"cloud_ranges.{name} must be > 0")
    tr = cfg.task_ranges
    if "tolerable_time" in tr and len(tr["tolerable_time"]) == 2 and tr["tolerable_time"][0] <= 0:
        out.append("task_ranges.tolerable_time must be > 0")
    if cfg.weight_rule not in ("min", "max"):
        out.append("weight_rule must be 'min' or 'max'")
    if cfg.completion_mode not in ("makespan", "sum"):
        out.append("completion_mode must be 'makespan' or 'sum'")
    if cfg.deadline_risk_mode not in ("joint", "per_subtask"):
        out.append("deadline_risk_mode must be 'joint' or 'per_subtask'")
    return out


def build_scenario(cfg: Config) -> Scenario:
    master = RngStream(cfg.master_seed)
    task = gen_task(
        cfg.topology,
        cfg.n_subtasks,
        cfg.task_ranges,
        rng_seed=master.child("task").derive_seed(),
        nominal_f=cfg.nominal_f,
        nominal_r=cfg.nominal_r,
        weight_rule=cfg.weight_rule,
    )
    cloud = gen_cloud(
        cfg.n_vehicles, cfg.connectivity_p, cfg.cloud_ranges, rng_seed=master.child("cloud").derive_seed()
    )
    return Scenario(
        task,
        cloud,
        w_time=cfg.w_time,
        w_cost=cfg.w_cost,
        eps1=cfg.eps1,
        eps2=cfg.eps2,
        clips=ClipBounds(**cfg.clips),
        completion_mode=cfg.completion_mode,
        deadline_risk_mode=cfg.deadline_risk_mode,
    )


@dataclass(frozen=True)
class EventRow:
    event: int
    policy: str
    used: str
    f_value: float | None
    completion_time: float | None
    exchange_cost: float | None
    decision_time_s: float
    feasible: bool

    @classmethod
    def from_decision(cls, event: int, policy: str, d: EventDecision) -> "EventRow":
        c = d.cost
        return cls(
            event,
            policy,
            d.used,
            c.f_value if c else None,
            c.completion_time if c else None,
            c.exchange_cost if c else None,
            d.decision_time,
            d.completed,
        )


@dataclass
class PolicyMetrics:
    avcf: float | None
    art: float
    completion_rate: float
    n_completed: int
    n_events: int


@dataclass
class RunSummary:
    policies: list
    metrics: dict
    alpha_usage_rate: float | None
    plan: PlanAResult | None
    event_digests: list
    config: dict
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=lambda: {
        "avcf_excludes_failed_events": True,
        "art_excludes_plan_a_offline_time": True,
    })

    def to_dict(self) -> dict:
        return {
            "policies": list(self.policies),
            "metrics": {p: asdict(m) for p, m in self.metrics.items()},
            "alpha_usage_rate": self.alpha_usage_rate,
            "plan_a": self.plan.to_dict() if self.plan else None,
            "event_digests": list(self.event_digests),
            "config": self.config,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunSummary":
        return cls(
            policies=list(d["policies"]),
            metrics={p: PolicyMetrics(**m) for p, m in d["metrics"].items()},
            alpha_usage_rate=d["alpha_usage_rate"],
            plan=PlanAResult.from_dict(d["plan_a"]) if d.get("plan_a") else None,
            event_digests=list(d["event_digests"]),
            config=d["config"],
            metadata=dict(d.get("metadata", {})),
        )


def aggregate(rows, policies, n_events) -> dict:
    metrics = {}
    for p in policies:
        mine = [r for r in rows if r.policy == p]
        done = [r.f_value for r in mine if r.used != "failed"]
        metrics[p] = PolicyMetrics(
            avcf=statistics.fmean(done) if done else None,
            art=statistics.fmean(r.decision_time_s for r in mine),
            completion_rate=len(done) / n_events,
            n_completed=len(done),
            n_events=n_events,
        )
    return metrics


def _run_event(args):
    s, alpha, policies, master_seed, k = args
    real = realize(s, RngStream(master_seed, f"event:{k}"))
    rows = []
    for p in policies:
        rng = RngStream(master_seed, f"event:{k}/{p}") if p == "Random" else None
        rows.append(EventRow.from_decision(k, p, run_policy(p, alpha, s, real, rng)))
    return real.digest(), rows


def run_experiment(cfg: Config, plan: PlanAResult | None = None) -> RunSummary:
    """Run the configured policies over ``cfg.n_events`` scheduling events.

    ``plan`` reuses a previously computed alpha instead of running Plan A.
    In timed mode (the default) events run sequentially in this process so
    decision times are not skewed by contention; otherwise ``cfg.jobs``
    worker processes share the events.
    """
    problems = config_violations(cfg)
    if problems:
        raise ScenarioError(problems)
    s = check_scenario(build_scenario(cfg))
    policies = list(cfg.policies)

    if plan is None and "SWATS" in policies:
        plan = plan_a(s, cfg.n_mc_samples, RngStream(cfg.master_seed, "plan_a_mc"))
        log.info("plan A: alpha=%s in %.3fs", plan.alpha, plan.offline_time)
    alpha = plan.alpha if plan is not None else None

    jobs = [(s, alpha, policies, cfg.master_seed, k) for k in range(1, cfg.n_events + 1)]
    if cfg.timed or cfg.jobs == 1:
        results = [_run_event(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_event, jobs))

    digests = [d for d, _ in results]
    rows = [r for _, rs in results for r in rs]
    metrics = aggregate(rows, policies, cfg.n_events)
    usage = None
    if "SWATS" in policies:
        swats = [r for r in rows if r.policy == "SWATS"]
        usage = sum(r.used == "alpha" for r in swats) / cfg.n_events
    return RunSummary(policies, metrics, usage, plan, digests, cfg.to_dict(), rows)


# --- persistence ---------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def rows_to_csv(rows, drop=()) -> str:
    keep = [c for c in CSV_HEADER if c not in drop]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keep)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in keep])
    return buf.getvalue()


def read_csv_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_text(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_results(summary: RunSummary, csv_path, json_path) -> tuple[Path, Path]:
    """Write the per-event CSV and the run-level JSON summary."""
    csv_path, json_path = Path(csv_path), Path(json_path)
    csv_text = rows_to_csv(summary.rows)
    json_text = json.dumps(summary.to_dict(), indent=2, allow_nan=False) + "\n"
    _atomic_write(csv_path, csv_text)
    _atomic_write(json_path, json_text)
    return csv_path, json_path


def load_summary(path) -> RunSummary:
    return RunSummary.from_dict(json.loads(Path(path).read_text()))


def sweep(cfg: Config, param: str, values) -> list[tuple[object, RunSummary]]:
    """Run one experiment per value of ``param`` (``n_vehicles`` or ``topology``)."""
    if param not in ("n_vehicles", "topology"):
        raise ValueError("sweep parameter must be 'n_vehicles' or 'topology'")
    out = []
    for value in values:
        point = replace(cfg, **{param: value})
        log.info("sweep %s=%s", param, value)
        out.append((value, run_experiment(point)))
    return out


def sweep_table(param: str, points) -> dict:
    return {
        "parameter": param,
        "points": [
            {
                "value": value,
                "alpha_usage_rate": summ.alpha_usage_rate,
                "metrics": {p: asdict(m) for p, m in summ.metrics.items()},
            }
            for value, summ in points
        ],
    }

