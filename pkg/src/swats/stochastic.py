"""Clipped Gaussian/exponential sampling, contact-duration CDF and Monte Carlo.

Random numbers come from labelled streams: a master seed plus a text label
(``"event:17"``, ``"plan_a_mc"``, ...) hashed into a Philox key.  Distinct
labels give independent, reproducible streams regardless of the order in
which they are consumed.

Stream labels used by the harness:

* ``"task"`` / ``"cloud"`` -- scenario generation (seeded integers derived from these)
* ``"plan_a_mc"`` -- common random numbers for Plan A
* ``"event:<k>"`` -- the realization of event ``k`` (1-based)
* ``"event:<k>/Random"`` -- the Random baseline's draw at event ``k``
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .model import Realization, Scenario

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class TruncGaussian:
    mean: float
    var: float
    lo: float
    hi: float

    def __post_init__(self):
        if not self.var > 0:
            raise ValueError("var must be > 0")
        if not self.lo < self.hi:
            raise ValueError("lo must be < hi")


@dataclass(frozen=True)
class TruncExponential:
    mean: float
    hi: float

    def __post_init__(self):
        if not (self.mean > 0 and self.hi > 0):
            raise ValueError("mean and hi must be > 0")


@dataclass(frozen=True)
class RngStream:
    """Value-like handle on a reproducible random stream."""

    seed: int
    label: str = ""

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        key = int.from_bytes(
            hashlib.blake2b(self.label.encode("utf-8"), digest_size=8).digest(), "little"
        )
        seq = np.random.SeedSequence(int(self.seed) & _SEED_MASK, spawn_key=(key,))
        return np.random.Generator(np.random.Philox(seq))

    def child(self, label: str) -> "RngStream":
        return RngStream(self.seed, f"{self.label}/{label}" if self.label else label)

    def derive_seed(self) -> int:
        """A 32-bit integer seed drawn from this stream (for seeded generators)."""
        return int(self.generator().integers(2**32))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_gaussian_clipped(d: TruncGaussian, rng, size=None):
    """Normal(mean, var) draw clamped into [lo, hi] (clamped, not rejected)."""
    gen = as_generator(rng)
    x = np.clip(gen.normal(d.mean, math.sqrt(d.var), size), d.lo, d.hi)
    return float(x) if size is None else x


def sample_exponential_clipped(d: TruncExponential, rng, size=None):
    """Exponential(mean) draw clamped into [0, hi]."""
    gen = as_generator(rng)
    x = np.clip(gen.exponential(d.mean, size), 0.0, d.hi)
    return float(x) if size is None else x


def cdf_contact_below(w: float, d: TruncExponential) -> float:
    """P(t < w) for a clamped exponential contact duration."""
    if w < 0:
        raise ValueError(f"required contact duration must be >= 0, got {w}")
    if w > d.hi:
        return 1.0
    return -math.expm1(-w / d.mean)


def contact_distribution(s: Scenario, edge_idx: int) -> TruncExponential:
    return TruncExponential(s.cloud.edges[edge_idx].t_mean, s.clips.t_hi)


@dataclass(frozen=True, eq=False)
class RealizationBatch:
    """``n`` stacked realizations: ``f``, ``r`` are (n, V); ``t``, ``c`` are (n, E)."""

    f: np.ndarray
    r: np.ndarray
    t: np.ndarray
    c: np.ndarray

    def __len__(self):
        return self.f.shape[0]

    def __getitem__(self, k: int) -> Realization:
        return Realization(self.f[k], self.r[k], self.t[k], self.c[k])


def realize_batch(s: Scenario, n: int, rng) -> RealizationBatch:
    """Draw ``n`` independent realizations of every random variable in ``s``."""
    gen = as_generator(rng)
    cl = s.clips
    veh = s.cloud.vehicles
    edges = s.cloud.edges
    f_mean = np.array([v.f_mean for v in veh])
    f_sd = np.sqrt([v.f_var for v in veh])
    r_mean = np.array([v.r_mean for v in veh])
    r_sd = np.sqrt([v.r_var for v in veh])
    t_mean = np.array([e.t_mean for e in edges])
    c_mean = np.array([e.c_mean for e in edges])
    c_sd = np.sqrt([e.c_var for e in edges])

    f = np.clip(gen.normal(f_mean, f_sd, (n, len(veh))), cl.f_lo, cl.f_hi)
    r = np.clip(gen.normal(r_mean, r_sd, (n, len(veh))), cl.r_lo, cl.r_hi)
    if edges:
        t = np.clip(gen.exponential(t_mean, (n, len(edges))), cl.t_lo, cl.t_hi)
        c = np.clip(gen.normal(c_mean, c_sd, (n, len(edges))), cl.c_lo, cl.c_hi)
    else:
        t = np.empty((n, 0))
        c = np.empty((n, 0))
    for arr in (f, r, t, c):
        arr.setflags(write=False)
    return RealizationBatch(f, r, t, c)


def realize(s: Scenario, rng) -> Realization:
    """One clipped draw of f, r per vehicle and t, c per cloud edge."""
    b = realize_batch(s, 1, rng)
    return Realization(b.f[0], b.r[0], b.t[0], b.c[0], clips=s.clips)


class MCEstimate(NamedTuple):
    mean: float
    stderr: float
    n: int


def mc_expectation(
    fn: Callable,
    s: Scenario,
    n_samples: int,
    rng,
    *,
    vectorized: bool = False,
) -> MCEstimate:
    """Sample mean and standard error of ``fn`` over ``n_samples`` realizations.

    With ``vectorized=True``, ``fn`` receives the whole :class:`RealizationBatch`
    and must return one value per sample.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    batch = realize_batch(s, n_samples, rng)
    if vectorized:
        values = np.asarray(fn(batch), dtype=float)
        if values.shape != (n_samples,):
            raise ValueError(f"vectorized fn returned shape {values.shape}, expected ({n_samples},)")
    else:
        values = np.array([fn(batch[k]) for k in range(n_samples)], dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ValueError(f"non-finite value {values[bad[0]]!r} at sample index {int(bad[0])}")
    stderr = float(values.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return MCEstimate(float(values.mean()), stderr, n_samples)
