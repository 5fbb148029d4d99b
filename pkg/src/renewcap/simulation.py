"""Seeded Monte Carlo for the fixed- and random-age replacement processes.

Replication ``i`` draws its replacement age from counter ``(i, 0, TAG_AGE)``
and its k-th lifetime from ``(i, k, TAG_EVENT)``. Replications are processed
in fixed-size chunks (optionally on a thread pool) and tallied in exact
integer arithmetic, so estimates are bit-identical for any thread count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Union

import numpy as np

from .errors import DivergentModelError, DomainError, TruncatedPathError
from .philox import TAG_AGE, ReplicationStream, uniforms
from .raft import RaftParams
from .rart import Finiteness, Fixed, RartModel, divergence_check

CHUNK = 1 << 16

Model = Union[RaftParams, RartModel]


def _lam_and_dist(model: Model):
    if isinstance(model, RaftParams):
        return model.lam, Fixed(model.r)
    if isinstance(model, RartModel):
        return model.lam, model.dist
    raise DomainError(f"unsupported model {model!r}")


def describe_model(model: Model) -> str:
    lam, dist = _lam_and_dist(model)
    return f"lambda={lam!r};{dist.spec()}"


def default_event_cap(model: Model, t: float) -> int | None:
    """``ceil(10 (lam + 1/a0) t)``, or None when the age support reaches 0."""
    lam, dist = _lam_and_dist(model)
    a0 = dist.support_start
    if a0 <= 0:
        return None
    return max(1, math.ceil(10.0 * (lam + 1.0 / a0) * t))


@dataclass(frozen=True)
class SimConfig:
    replications: int
    seed: int
    t: float
    model: Model
    max_events_per_path: int | None = None
    oracle: bool = False

    def __post_init__(self):
        if self.replications < 1:
            raise DomainError(f"replications must be >= 1, got {self.replications}")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if not (self.t > 0 and math.isfinite(self.t)):
            raise DomainError(f"t must be positive, got {self.t}")
        if self.max_events_per_path is not None and self.max_events_per_path < 1:
            raise DomainError("max_events_per_path must be >= 1")

    def event_cap(self) -> int:
        if self.max_events_per_path is not None:
            return self.max_events_per_path
        cap = default_event_cap(self.model, self.t)
        if cap is None:
            raise DivergentModelError(
                "replacement ages reach down to 0, so no default event cap exists; pass max_events_per_path",
                criterion="support touches 0",
            )
        return cap


class PathResult(NamedTuple):
    a: int
    d: int
    n: int
    truncated: bool = False


def simulate_path(model: Model, t: float, stream, max_events: int | None = None) -> PathResult:
    """One realization of (A(t), D(t), N(t)).

    ``stream`` supplies ``next_uniform()`` for lifetimes and, for random
    ages, ``age_uniform()`` for the single replacement age of this path. A
    lifetime at or beyond the age counts as an age replacement.
    """
    lam, dist = _lam_and_dist(model)
    if isinstance(dist, Fixed):
        age = dist.r
    else:
        age = float(dist.sample(np.array([stream.age_uniform()]))[0])
    clock = 0.0
    a = d = 0
    k = 0
    while True:
        u = stream.next_uniform()
        x = float(-np.log1p(-np.array([u]))[0] / lam)
        y = min(x, age)
        if clock + y > t:
            return PathResult(a, d, a + d)
        if max_events is not None and k >= max_events:
            return PathResult(a, d, a + d, truncated=True)
        clock = clock + y
        if x >= age:
            a += 1
        else:
            d += 1
        k += 1


def replication_stream(seed: int, replication: int) -> ReplicationStream:
    return ReplicationStream(seed, replication)


@dataclass
class _Tally:
    count: int = 0
    truncated: int = 0
    sums: dict = field(default_factory=lambda: {key: 0 for key in ("a", "a2", "d", "d2", "n", "n2")})
    joint: dict = field(default_factory=dict)

    def merge(self, other: "_Tally") -> None:
        self.count += other.count
        self.truncated += other.truncated
        for key, v in other.sums.items():
            self.sums[key] += v
        for cell, c in other.joint.items():
            self.joint[cell] = self.joint.get(cell, 0) + c


def _run_chunk(seed: int, lam: float, dist, t: float, cap: int, start: int, stop: int) -> _Tally:
    idx = np.arange(start, stop, dtype=np.uint64)
    size = stop - start
    if isinstance(dist, Fixed):
        age = np.full(size, dist.r)
    else:
        age = np.asarray(dist.sample(uniforms(seed, idx, 0, TAG_AGE)), dtype=float)
    clock = np.zeros(size)
    a = np.zeros(size, dtype=np.int64)
    d = np.zeros(size, dtype=np.int64)
    truncated = np.zeros(size, dtype=bool)
    live = np.arange(size)
    k = 0
    while live.size:
        u = uniforms(seed, idx[live], k)
        x = -np.log1p(-u) / lam
        ag = age[live]
        y = np.minimum(x, ag)
        nxt = clock[live] + y
        ok = nxt <= t
        if k >= cap:
            truncated[live[ok]] = True
            break
        live = live[ok]
        clock[live] = nxt[ok]
        is_age = x[ok] >= ag[ok]
        a[live] += is_age
        d[live] += ~is_age
        k += 1

    keep = ~truncated
    a, d = a[keep], d[keep]
    n = a + d
    tally = _Tally(count=int(keep.sum()), truncated=int(truncated.sum()))
    for key, arr in (("a", a), ("d", d), ("n", n)):
        tally.sums[key] = int(arr.sum())
        tally.sums[key + "2"] = int((arr * arr).sum())
    if a.size:
        width = int(d.max()) + 1
        cells, counts = np.unique(a * width + d, return_counts=True)
        tally.joint = {(int(c // width), int(c % width)): int(m) for c, m in zip(cells, counts)}
    return tally


@dataclass
class SimEstimate:
    """Monte Carlo estimates of E[N], E[A], E[D] and the joint (A, D) frequencies.

    Standard errors are sample standard deviations (n - 1 denominator) over
    the square root of the completed replications. Truncated paths are
    excluded from every estimate and counted separately.
    """

    model: str
    t: float
    seed: int
    replications: int
    replications_completed: int
    truncated_paths: int
    mean_n: float
    se_n: float
    mean_a: float
    se_a: float
    mean_d: float
    se_d: float
    joint_counts: dict[tuple[int, int], int]

    @property
    def joint_freq(self) -> dict[tuple[int, int], tuple[int, float]]:
        n = self.replications_completed
        return {cell: (c, c / n) for cell, c in sorted(self.joint_counts.items())}

    def frequency(self, k: int, l: int) -> float:
        return self.joint_counts.get((k, l), 0) / self.replications_completed

    def d_counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for (_, l), c in self.joint_counts.items():
            out[l] = out.get(l, 0) + c
        return dict(sorted(out.items()))

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "t": self.t,
            "seed": self.seed,
            "replications": self.replications,
            "replications_completed": self.replications_completed,
            "truncated_paths": self.truncated_paths,
            "mean_n": self.mean_n,
            "se_n": self.se_n,
            "mean_a": self.mean_a,
            "se_a": self.se_a,
            "mean_d": self.mean_d,
            "se_d": self.se_d,
            "joint": [[k, l, c, f] for (k, l), (c, f) in self.joint_freq.items()],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SimEstimate":
        fields_ = {k: v for k, v in obj.items() if k != "joint"}
        return cls(**fields_, joint_counts={(int(k), int(l)): int(c) for k, l, c, _ in obj["joint"]})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _mean_se(total: int, total_sq: int, n: int) -> tuple[float, float]:
    if n == 0:
        return math.nan, math.nan
    mean = total / n
    if n < 2:
        return mean, math.nan
    var_over_n = Fraction(n * total_sq - total * total, n * n * (n - 1))
    return mean, math.sqrt(var_over_n)


def simulate(config: SimConfig, threads: int = 1, chunk: int = CHUNK) -> SimEstimate:
    lam, dist = _lam_and_dist(config.model)
    if config.oracle and divergence_check(dist) is not Finiteness.FINITE:
        raise DivergentModelError(
            f"refusing an oracle run: E[N(t)] is not finite for {dist.spec()}", criterion="divergent"
        )
    cap = config.event_cap()
    bounds = [(s, min(s + chunk, config.replications)) for s in range(0, config.replications, chunk)]

    def work(b):
        return _run_chunk(config.seed, lam, dist, config.t, cap, *b)

    total = _Tally()
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for part in pool.map(work, bounds):
                total.merge(part)
    else:
        for b in bounds:
            total.merge(work(b))

    if config.oracle and total.truncated:
        raise TruncatedPathError(f"{total.truncated} paths hit the event cap of {cap} in an oracle run")
    n = total.count
    s = total.sums
    mean_n, se_n = _mean_se(s["n"], s["n2"], n)
    mean_a, se_a = _mean_se(s["a"], s["a2"], n)
    mean_d, se_d = _mean_se(s["d"], s["d2"], n)
    return SimEstimate(
        model=describe_model(config.model),
        t=config.t,
        seed=config.seed,
        replications=config.replications,
        replications_completed=n,
        truncated_paths=total.truncated,
        mean_n=mean_n,
        se_n=se_n,
        mean_a=mean_a,
        se_a=se_a,
        mean_d=mean_d,
        se_d=se_d,
        joint_counts=dict(sorted(total.joint.items())),
    )
