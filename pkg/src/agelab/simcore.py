"""Deterministic, seedable simulation of the M-server update system.

One run is single-threaded and bit-reproducible: a single PCG64 stream
per replication supplies all inter-generation times first, then all
service requirements, in fixed block order.  Each policy reduces to a
specialized sweep over the pre-generated packets; ties between a service
completion and an arrival at the same instant resolve in favor of the
completion.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .distributions import ArrivalProcess, ServiceDistribution

LCFSP = "lcfsp"
FCFS = "fcfs"
FCFS_POOL = "fcfs_pool"
INFINITE = "infinite"

RESUME = "resume"
RESTART = "restart"

EVENT_BUDGET = 10 ** 9


class EventBudgetError(RuntimeError):
    """The run would generate more packets than the hard event cap."""


@dataclass(frozen=True)
class PolicyConfig:
    """Scheduling/routing discipline for the update system."""

    kind: str
    n_servers: int = 1
    preemption: str = RESUME

    def __post_init__(self):
        if self.kind not in (LCFSP, FCFS, FCFS_POOL, INFINITE):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == FCFS_POOL and self.n_servers < 1:
            raise ValueError("fcfs_pool requires at least one server")
        if self.preemption not in (RESUME, RESTART):
            raise ValueError(f"unknown preemption mode {self.preemption!r}")

    @property
    def label(self) -> str:
        if self.kind == FCFS_POOL:
            return f"fcfs_pool{self.n_servers}"
        if self.kind == LCFSP and self.preemption == RESTART:
            return "lcfsp_restart"
        return self.kind


def lcfsp(preemption: str = RESUME) -> PolicyConfig:
    return PolicyConfig(LCFSP, preemption=preemption)


def fcfs() -> PolicyConfig:
    return PolicyConfig(FCFS)


def fcfs_pool(n_servers: int) -> PolicyConfig:
    return PolicyConfig(FCFS_POOL, n_servers=n_servers)


def infinite() -> PolicyConfig:
    return PolicyConfig(INFINITE)


@dataclass(frozen=True)
class SimResult:
    avg_age: float
    avg_delay: float
    delay_var: float
    n_generated: int
    n_delivered: int
    n_informative: int
    age_stderr: float
    delay_stderr: float
    horizon: float
    seed: int

    @property
    def n_in_system(self) -> int:
        """Packets generated but not yet delivered at the horizon."""
        return self.n_generated - self.n_delivered


def _generate_packets(arrival: ArrivalProcess, service: ServiceDistribution,
                      horizon: float, rng: np.random.Generator):
    """Generation times in (0, horizon] and their service requirements."""
    expected = arrival.rate * horizon
    if expected > EVENT_BUDGET:
        raise EventBudgetError(
            f"event budget exceeded: ~{expected:.3g} arrivals > {EVENT_BUDGET}")
    chunk = max(1024, int(1.1 * expected) + 64)
    gaps = [np.asarray(arrival.sample(rng, chunk), dtype=float)]
    total = float(gaps[0].sum())
    while total <= horizon:
        g = np.asarray(arrival.sample(rng, chunk), dtype=float)
        gaps.append(g)
        total += float(g.sum())
        if sum(len(g) for g in gaps) > EVENT_BUDGET:
            raise EventBudgetError("event budget exceeded while generating arrivals")
    gen = np.cumsum(np.concatenate(gaps))
    gen = gen[gen <= horizon]
    svc = np.asarray(service.sample(rng, len(gen)), dtype=float)
    return gen, svc


def _lcfsp_receptions(gen, svc, horizon, restart):
    """Single server, newest packet always in service; preempted packets
    wait in LIFO order and resume (or restart) when the server idles."""
    n = len(gen)
    recv = np.empty(n)
    rgen = np.empty(n)
    m = 0
    stack = []  # (gen_time, remaining_work) of preempted packets, LIFO
    for i in range(n):
        t = gen[i]
        end = gen[i + 1] if i + 1 < n else horizon
        g = t
        rem = svc[i]
        full = svc[i]
        while True:
            done = t + rem
            if done <= end:
                # completion beats a simultaneous arrival
                recv[m] = done
                rgen[m] = g
                m += 1
                t = done
                if not stack:
                    break
                g, rem = stack.pop()
                full = rem  # remaining work is what a restart would redo
            else:
                stack.append((g, full if restart else rem - (end - t)))
                break
    return recv[:m], rgen[:m], True


def _fcfs_receptions(gen, svc, horizon):
    n = len(gen)
    recv = np.empty(n)
    rgen = np.empty(n)
    m = 0
    finish = 0.0
    for i in range(n):
        start = gen[i] if gen[i] > finish else finish
        finish = start + svc[i]
        if finish > horizon:
            break
        recv[m] = finish
        rgen[m] = gen[i]
        m += 1
    return recv[:m], rgen[:m], True


def _fcfs_pool_receptions(gen, svc, horizon, n_servers):
    n = len(gen)
    recv = np.empty(n)
    rgen = np.empty(n)
    m = 0
    free = [0.0] * n_servers
    heapq.heapify(free)
    for i in range(n):
        f = heapq.heappop(free)
        start = gen[i] if gen[i] > f else f
        fin = start + svc[i]
        heapq.heappush(free, fin)
        if fin <= horizon:
            recv[m] = fin
            rgen[m] = gen[i]
            m += 1
    return recv[:m], rgen[:m], False


def _infinite_receptions(gen, svc, horizon):
    fin = gen + svc
    keep = fin <= horizon
    # the delay of each packet is its own service draw; recomputing it as
    # recv - rgen would smear deterministic service by rounding noise
    return fin[keep], gen[keep], svc[keep], False


def _receptions(arrival, service, policy, horizon, rng):
    gen, svc = _generate_packets(arrival, service, horizon, rng)
    dly = None
    if policy.kind == LCFSP:
        recv, rgen, sorted_ = _lcfsp_receptions(gen, svc, horizon,
                                                policy.preemption == RESTART)
    elif policy.kind == FCFS:
        recv, rgen, sorted_ = _fcfs_receptions(gen, svc, horizon)
    elif policy.kind == FCFS_POOL:
        if arrival.rate >= policy.n_servers * service.mu:
            warnings.warn(
                f"unstable pool: lambda={arrival.rate:g} >= "
                f"{policy.n_servers}*mu={policy.n_servers * service.mu:g}",
                stacklevel=3)
        recv, rgen, sorted_ = _fcfs_pool_receptions(gen, svc, horizon,
                                                    policy.n_servers)
    else:
        recv, rgen, dly, sorted_ = _infinite_receptions(gen, svc, horizon)
    if not sorted_:
        order = np.argsort(recv, kind="stable")
        recv, rgen = recv[order], rgen[order]
        if dly is not None:
            dly = dly[order]
    if dly is None:
        dly = recv - rgen
    return gen, recv, rgen, dly


def _age_segments(recv, rgen, horizon):
    """Piecewise-linear age segments over [0, horizon].

    Segment k starts at starts[k] with age ages[k], grows at slope one
    until ends[k].  An age drop happens only at informative receptions:
    generation time strictly above every previously received one (the
    virtual fresh packet at time zero counts as generation time zero).
    """
    running = np.maximum.accumulate(np.concatenate(([0.0], rgen)))[:-1]
    informative = rgen > running
    t = recv[informative]
    a = t - rgen[informative]
    starts = np.concatenate(([0.0], t))
    ages = np.concatenate(([0.0], a))
    ends = np.concatenate((t, [horizon]))
    return starts, ages, ends, int(informative.sum())


def _age_area(starts, ages, ends, t0, t1):
    lo = np.maximum(starts, t0)
    hi = np.minimum(ends, t1)
    d = np.clip(hi - lo, 0.0, None)
    a_lo = ages + (lo - starts)
    return float(np.sum(d * (a_lo + 0.5 * d)))


def run(arrival: ArrivalProcess, service: ServiceDistribution,
        policy: PolicyConfig, horizon: float, warmup: float = 0.0,
        seed: int = 0) -> SimResult:
    """One replication.  Age area is accumulated over [warmup, horizon];
    delays are recorded for packets received in that window.  Identical
    (seed, config) gives a bit-identical result."""
    if not (0.0 <= warmup < horizon):
        raise ValueError("need 0 <= warmup < horizon")
    rng = np.random.default_rng(seed)
    gen, recv, rgen, dly = _receptions(arrival, service, policy, horizon, rng)
    starts, ages, ends, n_informative = _age_segments(recv, rgen, horizon)
    area = _age_area(starts, ages, ends, warmup, horizon)
    in_window = recv >= warmup
    delays = dly[in_window]
    avg_delay = float(delays.mean()) if delays.size else math.nan
    delay_var = float(delays.var(ddof=1)) if delays.size > 1 else 0.0
    return SimResult(
        avg_age=area / (horizon - warmup),
        avg_delay=avg_delay,
        delay_var=delay_var,
        n_generated=int(len(gen)),
        n_delivered=int(len(recv)),
        n_informative=n_informative,
        age_stderr=0.0,
        delay_stderr=0.0,
        horizon=horizon,
        seed=seed,
    )


def replication_seeds(base_seed: int, n_reps: int) -> list[int]:
    """Counter-split seeds: base_seed + rep index, mixed into independent
    streams by the generator's seed sequence."""
    return [base_seed + i for i in range(n_reps)]


def run_replications(arrival: ArrivalProcess, service: ServiceDistribution,
                     policy: PolicyConfig, horizon: float, warmup: float,
                     n_reps: int, base_seed: int) -> SimResult:
    """Aggregate independent replications: means of the per-replication
    statistics with standard errors, counts totalled."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    results = []
    for s in replication_seeds(base_seed, n_reps):
        try:
            results.append(run(arrival, service, policy, horizon, warmup, s))
        except Exception as exc:
            raise RuntimeError(f"replication with seed {s} failed: {exc}") from exc
    if n_reps == 1:
        return results[0]
    ages = np.array([r.avg_age for r in results])
    dels = np.array([r.avg_delay for r in results])
    dvars = np.array([r.delay_var for r in results])
    return SimResult(
        avg_age=float(ages.mean()),
        avg_delay=float(dels.mean()),
        delay_var=float(dvars.mean()),
        n_generated=sum(r.n_generated for r in results),
        n_delivered=sum(r.n_delivered for r in results),
        n_informative=sum(r.n_informative for r in results),
        age_stderr=float(ages.std(ddof=1) / math.sqrt(n_reps)),
        delay_stderr=float(dels.std(ddof=1) / math.sqrt(n_reps)),
        horizon=horizon,
        seed=base_seed,
    )


def breakpoints_from_receptions(recv, rgen, t0, t1) -> np.ndarray:
    """Exact piecewise-linear age breakpoints over [t0, t1] for a given
    reception stream (sorted by reception time): pairs (t, age), with a
    vertical drop encoded as two points at the same t."""
    recv = np.asarray(recv, dtype=float)
    rgen = np.asarray(rgen, dtype=float)
    starts, ages, ends, _ = _age_segments(recv, rgen, t1)
    pts = []
    for s, a, e in zip(starts, ages, ends):
        lo, hi = max(s, t0), min(e, t1)
        if hi < lo:
            continue
        pts.append((lo, a + (lo - s)))
        if hi > lo:
            pts.append((hi, a + (hi - s)))
    out = []
    for p in pts:
        if not out or p != out[-1]:
            out.append(p)
    return np.array(out)


def trace_integral(trace: np.ndarray) -> float:
    """Area under a piecewise-linear trace (vertical drops are zero-width)."""
    t, a = trace[:, 0], trace[:, 1]
    return float(np.sum(0.5 * (a[1:] + a[:-1]) * np.diff(t)))


def age_trace(arrival: ArrivalProcess, service: ServiceDistribution,
              policy: PolicyConfig, horizon: float, warmup: float = 0.0,
              seed: int = 0, sample_points: int | None = None) -> np.ndarray:
    """Age-vs-time breakpoints of one run over [warmup, horizon],
    downsampled to at most sample_points rows (endpoints kept)."""
    if not (0.0 <= warmup < horizon):
        raise ValueError("need 0 <= warmup < horizon")
    rng = np.random.default_rng(seed)
    _, recv, rgen, _ = _receptions(arrival, service, policy, horizon, rng)
    trace = breakpoints_from_receptions(recv, rgen, warmup, horizon)
    if sample_points is not None and len(trace) > sample_points:
        idx = np.unique(np.linspace(0, len(trace) - 1, sample_points).astype(int))
        trace = trace[idx]
    return trace


def trace_to_csv(trace: np.ndarray, path) -> None:
    """Serialize a trace as CSV rows t,age."""
    with open(path, "w") as fh:
        fh.write("t,age\n")
        for t, a in trace:
            fh.write(f"{float(t)!r},{float(a)!r}\n")
