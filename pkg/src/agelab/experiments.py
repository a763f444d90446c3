"""Parameter sweeps, tradeoff curves, scalarized search and validation.

Everything here emits plain rows (TradeoffPoint or dict) that the CLI
serializes to CSV; no plotting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic, simcore
from .distributions import (
    DETERMINISTIC,
    EXPONENTIAL,
    ArrivalProcess,
    ServiceDistribution,
)

ANALYTIC = "analytic"
SIMULATED = "simulated"

# Heavy-tail grids walk toward the limit: alpha down, sigma up, kappa down.
_HEAVY_DIRECTION = {"pareto": -1, "lognormal": +1, "weibull": -1}

# successive horizon doubling moving a simulated delay estimate by more
# than this flags the row as non-convergent
NONCONV_REL_STEP = 0.05

DEFAULT_HORIZON = 2e6
DEFAULT_WARMUP = 2e5
DEFAULT_REPS = 8
DEFAULT_MIN_TERM_PATHS = 200_000


@dataclass(frozen=True)
class SimSettings:
    horizon: float = DEFAULT_HORIZON
    warmup: float = DEFAULT_WARMUP
    n_reps: int = DEFAULT_REPS
    seed: int = 1


@dataclass(frozen=True)
class TradeoffPoint:
    policy: str
    dist_kind: str
    dist_param: float | None
    lam: float
    mu: float
    avg_age: float
    avg_delay: float
    delay_var: float
    source: str
    age_stderr: float | None = None
    delay_stderr: float | None = None
    seed: int | None = None
    horizon: float | None = None
    status: str = "ok"


@dataclass(frozen=True)
class SweepSpec:
    arrival: ArrivalProcess
    services: tuple[ServiceDistribution, ...]
    policies: tuple[simcore.PolicyConfig, ...]
    sim: SimSettings | None = None
    min_term_paths: int = DEFAULT_MIN_TERM_PATHS


def family_grid(kind: str, mu: float, grid) -> tuple[ServiceDistribution, ...]:
    """Build a parameter grid for one family, enforcing the convention
    that the grid is ordered toward the heavy-tail limit."""
    grid = list(grid)
    direction = _HEAVY_DIRECTION.get(kind)
    if direction is not None and len(grid) > 1:
        diffs = np.diff(grid)
        if not (np.all(diffs * direction > 0)):
            raise ValueError(
                f"{kind} grid must be ordered toward the heavy-tail limit")
    if direction is None:
        return (ServiceDistribution(kind, mu),)
    return tuple(ServiceDistribution(kind, mu, g) for g in grid)


def analytic_point(arrival, service, policy, min_term_paths, seed):
    lam, mu = arrival.rate, service.mu
    status = "ok"
    age_stderr = None
    if policy.kind == simcore.LCFSP:
        age = analytic.lcfsp_age(arrival, service)
        delay = (analytic.mg1_lcfsp_delay(arrival, service)
                 if arrival.is_poisson and lam < mu else math.nan)
        dvar = service.variance()  # exact floor; the mean-delay tradeoff
        # diverges exactly when this does
    elif policy.kind == simcore.INFINITE:
        rng = np.random.default_rng(seed)
        age, est = analytic.gginf_age(arrival, service, min_term_paths, rng)
        age_stderr = est.std_error
        delay = service.mean
        dvar = service.variance()
    elif policy.kind == simcore.FCFS and arrival.is_poisson and lam < mu:
        # work-conserving single server shares the M/G/1 mean delay;
        # no closed form exists for its age
        age = math.nan
        delay = analytic.mg1_lcfsp_delay(arrival, service)
        dvar = service.variance()
    else:
        return None
    return TradeoffPoint(policy.label, service.kind, service.shape, lam, mu,
                         age, delay, dvar, ANALYTIC,
                         age_stderr=age_stderr, status=status)


def simulated_point(arrival, service, policy, sim, seed, check_convergence):
    res = simcore.run_replications(arrival, service, policy, sim.horizon,
                                   sim.warmup, sim.n_reps, seed)
    status = "ok"
    if check_convergence:
        r1 = simcore.run(arrival, service, policy, sim.horizon, sim.warmup,
                         seed)
        r2 = simcore.run(arrival, service, policy, 2 * sim.horizon, sim.warmup,
                         seed)
        # the delay estimate and its variance must both have settled;
        # heavy-tail services keep the sample variance growing with horizon
        for e1, e2 in ((r1.avg_delay, r2.avg_delay),
                       (r1.delay_var, r2.delay_var)):
            if e1 > 0 and abs(e2 - e1) / e1 > NONCONV_REL_STEP:
                status = "non-convergent"
                break
    return TradeoffPoint(policy.label, service.kind, service.shape,
                         arrival.rate, service.mu,
                         res.avg_age, res.avg_delay, res.delay_var, SIMULATED,
                         age_stderr=res.age_stderr,
                         delay_stderr=res.delay_stderr,
                         seed=seed, horizon=sim.horizon, status=status)


def tradeoff_sweep(spec: SweepSpec) -> list[TradeoffPoint]:
    """Evaluate every (policy, service) pair: analytic values where a
    formula exists, simulated values when sim settings are given.
    Per-point failures become an in-row status; the sweep continues.
    Points are returned sorted by average age, descending."""
    points = []
    idx = 0
    for policy in spec.policies:
        for service in spec.services:
            seed = (spec.sim.seed if spec.sim else 0) + 10_000 * idx
            idx += 1
            try:
                p = analytic_point(spec.arrival, service, policy,
                                    spec.min_term_paths, seed)
            except (analytic.StabilityError,
                    analytic.DegeneratePreemptionError) as exc:
                p = TradeoffPoint(policy.label, service.kind, service.shape,
                                  spec.arrival.rate, service.mu,
                                  math.nan, math.nan, math.nan, ANALYTIC,
                                  status=f"error: {exc}")
            if p is not None:
                points.append(p)
            if spec.sim is not None:
                diverging = (policy.kind in (simcore.LCFSP, simcore.FCFS,
                                             simcore.FCFS_POOL)
                             and math.isinf(service.second_moment()))
                try:
                    points.append(simulated_point(
                        spec.arrival, service, policy, spec.sim, seed,
                        check_convergence=diverging))
                except (simcore.EventBudgetError, RuntimeError) as exc:
                    points.append(TradeoffPoint(
                        policy.label, service.kind, service.shape,
                        spec.arrival.rate, service.mu,
                        math.nan, math.nan, math.nan, SIMULATED,
                        seed=seed, horizon=spec.sim.horizon,
                        status=f"error: {exc}"))
    def sort_key(p):
        a = p.avg_age
        return -(a if not math.isnan(a) else -math.inf)
    return sorted(points, key=sort_key)


def age_vs_rate_curves(services, lambda_grid, policy,
                       min_term_paths: int = DEFAULT_MIN_TERM_PATHS,
                       base_seed: int = 0) -> list[dict]:
    """Average age against Poisson generation rate, one row per
    (lambda, service), plus the 1/lambda age floor column."""
    rows = []
    for i, lam in enumerate(lambda_grid):
        arrival = ArrivalProcess.poisson(lam)
        bound = analytic.a_min(arrival)
        for j, service in enumerate(services):
            if policy.kind == simcore.LCFSP:
                age = analytic.lcfsp_age(arrival, service)
            elif policy.kind == simcore.INFINITE:
                rng = np.random.default_rng(base_seed + 1000 * i + j)
                age, _ = analytic.gginf_age(arrival, service, min_term_paths, rng)
            else:
                raise ValueError(
                    f"no analytic age curve for policy {policy.label!r}")
            rows.append({"lambda": lam, "dist_kind": service.kind,
                         "dist_param": service.shape, "avg_age": age,
                         "age_bound": bound})
    return rows


def scalarized_search(arrival: ArrivalProcess, services, nu: float,
                      policy: simcore.PolicyConfig,
                      min_term_paths: int = DEFAULT_MIN_TERM_PATHS,
                      seed: int = 0) -> TradeoffPoint:
    """Grid minimizer of avg_delay + nu * avg_age over the family
    parameter; services must be ordered light-to-heavy tail so that ties
    resolve toward the lighter tail."""
    if nu < 0:
        raise ValueError("nu must be >= 0")
    best, best_obj = None, math.inf
    for service in services:
        p = analytic_point(arrival, service, policy, min_term_paths, seed)
        if p is None:
            raise ValueError(f"no analytic point for policy {policy.label!r}")
        obj = p.avg_delay + nu * p.avg_age
        if math.isfinite(obj) and obj < best_obj:
            best, best_obj = p, obj
    if best is None:
        raise ValueError("no finite point: every objective value is infinite")
    return best


@dataclass(frozen=True)
class ValidationRow:
    name: str
    analytic_value: float
    simulated_value: float | None
    stderr: float | None
    tolerance: float | None
    passed: bool | None  # None marks informational rows

    def render(self) -> str:
        if self.passed is None:
            return (f"[info] {self.name}: analytic={self.analytic_value:.6g} "
                    f"(informational, not checked)")
        verdict = "pass" if self.passed else "FAIL"
        return (f"[{verdict}] {self.name}: analytic={self.analytic_value:.6g} "
                f"simulated={self.simulated_value:.6g} "
                f"stderr={self.stderr:.3g} tol={self.tolerance:.3g}")


@dataclass(frozen=True)
class ValidationReport:
    rows: list[ValidationRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows if r.passed is not None)

    def render(self) -> str:
        lines = [r.render() for r in self.rows]
        lines.append("overall: " + ("pass" if self.passed else "FAIL"))
        return "\n".join(lines)


def _check(name, analytic_value, simulated_value, stderr) -> ValidationRow:
    tol = max(3 * stderr, 0.01 * abs(analytic_value))
    ok = abs(simulated_value - analytic_value) <= tol
    return ValidationRow(name, analytic_value, simulated_value, stderr, tol, ok)


def validate(arrival: ArrivalProcess, service: ServiceDistribution,
             policy: simcore.PolicyConfig, sim: SimSettings,
             min_term_paths: int = DEFAULT_MIN_TERM_PATHS) -> ValidationReport:
    """Cross-check the analytic formulas against simulation at
    max(3 stderr, 1%) tolerance; the alternate mean-service/no-preemption
    age form is included as an informational row."""
    res = simcore.run_replications(arrival, service, policy, sim.horizon,
                                   sim.warmup, sim.n_reps, sim.seed)
    rows = []
    if policy.kind == simcore.LCFSP:
        age = analytic.lcfsp_age(arrival, service)
        rows.append(_check("lcfsp average age", age, res.avg_age, res.age_stderr))
        if (arrival.is_poisson and arrival.rate < service.mu
                and service.kind == EXPONENTIAL):
            # preemptive-resume sojourn matches the closed form only when
            # service is memoryless
            d = analytic.mg1_lcfsp_delay(arrival, service)
            rows.append(_check("lcfsp mean delay", d, res.avg_delay,
                               res.delay_stderr))
        rows.append(ValidationRow("alternate age form E[S]/P(S<X)",
                                  analytic.lcfsp_age_alt(arrival, service),
                                  None, None, None, None))
    elif policy.kind == simcore.INFINITE:
        rng = np.random.default_rng(sim.seed + 99_991)
        age, est = analytic.gginf_age(arrival, service, min_term_paths, rng)
        stderr = math.hypot(res.age_stderr, est.std_error)
        rows.append(_check("infinite-server average age", age, res.avg_age,
                           stderr))
        rows.append(_check("infinite-server mean delay", service.mean,
                           res.avg_delay, res.delay_stderr))
    elif arrival.is_poisson and arrival.rate < service.mu:
        d = analytic.mg1_lcfsp_delay(arrival, service)
        if math.isfinite(d) and policy.kind == simcore.FCFS:
            rows.append(_check("fcfs mean delay", d, res.avg_delay,
                               res.delay_stderr))
    if not rows:
        raise ValueError("nothing to validate for this configuration")
    return ValidationReport(rows)
