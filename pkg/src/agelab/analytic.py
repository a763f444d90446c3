"""Closed-form and semi-analytic evaluators for age and delay.

Covers the universal age floor, the single-server preemptive-LCFS age,
the M/G/1 preemptive-LCFS delay, the infinite-server age (Monte Carlo
over the residual-minimum term), and the heavy-tail sufficient-condition
checkers used by the tradeoff experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .distributions import (
    DETERMINISTIC,
    ArrivalProcess,
    QuadratureError,
    ServiceDistribution,
)

DEFAULT_MIN_TERM_PATHS = 10 ** 6

# P(S < X) below this is treated as degenerate: preemption wins (almost)
# every race and the age effectively diverges.
_PSX_FLOOR = 1e-12


class StabilityError(ValueError):
    """rho = lambda/mu >= 1 where a stable queue is required."""


class DegeneratePreemptionError(ValueError):
    """P(S < X) is numerically indistinguishable from zero."""


def a_min(arrival: ArrivalProcess) -> float:
    """Universal average-age floor (1/2) E[X^2]/E[X]; 1/rate for Poisson."""
    m2 = arrival.interarrival_second_moment()
    if math.isinf(m2):
        return math.inf
    return 0.5 * m2 * arrival.rate


def expected_min_and_psx(arrival: ArrivalProcess,
                         service: ServiceDistribution) -> tuple[float, float]:
    """(E[min(X, S)], P(S < X)) for independent X ~ F_X, S ~ F_S.

    Poisson arrivals use the transform identities
    E[min(X,S)] = I and P(S<X) = 1 - lambda*I with
    I = integral exp(-lambda x) P(S>x) dx, avoiding cancellation when
    the transform is close to one.  Otherwise a point mass on either
    side reduces to truncated means, and the doubly continuous case
    falls back to adaptive quadrature over the product of tails.
    """
    lam = arrival.rate
    if arrival.is_poisson:
        i = service.exp_weighted_tail_integral(lam)
        return i, max(0.0, 1.0 - lam * i)
    if arrival.law.kind == DETERMINISTIC:
        if service.kind == DETERMINISTIC:
            raise ValueError("at least one of F_X and F_S must be continuous")
        c = arrival.mean_interarrival
        emin = service.truncated_mean(c) + c * service.tail(c)
        return emin, float(service.cdf(c))
    if service.kind == DETERMINISTIC:
        c = service.mean
        xl = arrival.law
        emin = xl.truncated_mean(c) + c * xl.tail(c)
        return emin, float(xl.tail(c))
    # both continuous
    xl = arrival.law
    knots = sorted(set(xl._quad_knots()) | set(service._quad_knots()))

    def tails(x):
        return xl.tail(x) * service.tail(x)

    emin, err1 = _quad_pieces(tails, knots)

    def win(x):
        return xl.pdf(x) * service.cdf(x)

    psx, err2 = _quad_pieces(win, knots)
    if err1 > 1e-8 * max(emin, 1e-12) or err2 > 1e-8 * max(psx, 1e-12):
        raise QuadratureError("joint-law quadrature did not converge")
    return emin, min(max(psx, 0.0), 1.0)


def _quad_pieces(f, knots):
    edges = [0.0] + list(knots) + [math.inf]
    total, errsum = 0.0, 0.0
    with np.errstate(under="ignore"):
        for a, b in zip(edges[:-1], edges[1:]):
            v, e = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-11, limit=200)
            total += v
            errsum += e
    return total, errsum


def lcfsp_age(arrival: ArrivalProcess, service: ServiceDistribution) -> float:
    """Average age of the single-server preemptive-LCFS queue:
    age floor plus E[min(X,S)] / P(S < X)."""
    emin, psx = expected_min_and_psx(arrival, service)
    if psx < _PSX_FLOOR:
        raise DegeneratePreemptionError(
            f"P(S < X) = {psx:g}: preemption almost surely wins, age diverges")
    return a_min(arrival) + emin / psx


def lcfsp_age_alt(arrival: ArrivalProcess, service: ServiceDistribution) -> float:
    """Alternate closed form E[S] / P(S < X).

    Documented for the validation report only: it is inconsistent with
    the recursion-based formula (for M/M/1 it gives (mu+lam)/mu^2, not
    1/lam + 1/mu) and does not match simulation.
    """
    _, psx = expected_min_and_psx(arrival, service)
    if psx < _PSX_FLOOR:
        raise DegeneratePreemptionError("P(S < X) ~ 0")
    return service.mean / psx


def mg1_lcfsp_delay(arrival: ArrivalProcess, service: ServiceDistribution) -> float:
    """Mean packet delay of the M/G/1 preemptive-LCFS queue:
    (lambda/2) E[S^2] / (1 - rho) + E[S]; +inf when E[S^2] diverges."""
    if not arrival.is_poisson:
        raise ValueError("delay formula requires Poisson arrivals")
    lam, mu = arrival.rate, service.mu
    rho = lam / mu
    if rho >= 1.0:
        raise StabilityError(f"unstable: rho = {rho:g} >= 1")
    m2 = service.second_moment()
    if math.isinf(m2):
        return math.inf
    return lam * m2 / (2.0 * (1.0 - rho)) + service.mean


@dataclass(frozen=True)
class MinTermEstimate:
    """Monte Carlo estimate of E[min over l of (X_1+...+X_l + S_{l+1})]."""

    value: float
    std_error: float
    n_paths: int


def estimate_min_term(arrival: ArrivalProcess, service: ServiceDistribution,
                      n_paths: int, rng: np.random.Generator) -> MinTermEstimate:
    """Vectorized sample-path estimator with the exact stopping rule: a
    path stops extending once its running arrival sum reaches the
    current best, since every later candidate exceeds that sum."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if service.kind == DETERMINISTIC:
        return MinTermEstimate(service.mean, 0.0, n_paths)
    best = np.asarray(service.sample(rng, n_paths), dtype=float)
    cum = np.zeros(n_paths)
    idx = np.arange(n_paths)
    while idx.size:
        cum[idx] += arrival.sample(rng, idx.size)
        idx = idx[cum[idx] < best[idx]]
        if idx.size == 0:
            break
        s = service.sample(rng, idx.size)
        best[idx] = np.minimum(best[idx], cum[idx] + s)
    se = float(best.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
    return MinTermEstimate(float(best.mean()), se, n_paths)


def min_term_path(xs, ss, early_stop: bool = True) -> float:
    """min over l of (xs[0]+...+xs[l-1] + ss[l]) on one shared input path.

    With early_stop=False this is the brute-force enumeration over all
    supplied terms; both variants must agree on identical inputs.
    """
    best = float(ss[0])
    cum = 0.0
    n = min(len(xs), len(ss) - 1)
    for l in range(n):
        cum += float(xs[l])
        if early_stop and cum >= best:
            break
        cand = cum + float(ss[l + 1])
        if cand < best:
            best = cand
    return best


def gginf_age(arrival: ArrivalProcess, service: ServiceDistribution,
              n_paths: int = DEFAULT_MIN_TERM_PATHS,
              rng: np.random.Generator | None = None,
              ) -> tuple[float, MinTermEstimate]:
    """Average age of the infinite-server queue: age floor plus the
    residual-minimum term.  Deterministic service short-circuits to
    floor + 1/mu exactly (the minimum is always the first term)."""
    if service.kind == DETERMINISTIC:
        est = MinTermEstimate(service.mean, 0.0, n_paths)
        return a_min(arrival) + service.mean, est
    if rng is None:
        rng = np.random.default_rng(0)
    est = estimate_min_term(arrival, service, n_paths, rng)
    return a_min(arrival) + est.value, est


def lcfsp_age_recursion_estimate(arrival: ArrivalProcess,
                                 service: ServiceDistribution,
                                 n_cycles: int,
                                 rng: np.random.Generator) -> float:
    """Independent age estimator from the per-generation recursion
    B_{i+1} = X_i + B_i * (1 - 1{S_i < X_i}) with per-cycle area
    X_i^2/2 + B_i*min(X_i, S_i).  Used to cross-check the event-driven
    simulator's informative-packet accounting."""
    xs = np.asarray(arrival.sample(rng, n_cycles), dtype=float)
    ss = np.asarray(service.sample(rng, n_cycles), dtype=float)
    served = ss < xs
    cum = np.cumsum(xs)
    # index of the last completed service at or before i (-1 if none)
    last = np.maximum.accumulate(np.where(served, np.arange(n_cycles), -1))
    # B_{i+1} = cum[i] - cum[last[i] - 1]; B_0 = 0
    cum0 = np.concatenate(([0.0], cum))
    b_next = cum - np.where(last >= 1, cum0[np.maximum(last, 0)], 0.0)
    b = np.concatenate(([0.0], b_next[:-1]))
    areas = 0.5 * xs ** 2 + b * np.minimum(xs, ss)
    return float(areas.sum() / xs.sum())


@dataclass(frozen=True)
class ConditionRow:
    param: float | None
    x: float
    tail: float
    truncated_mean: float


@dataclass(frozen=True)
class SuffConditionReport:
    """Numeric check of the two heavy-tail limit conditions: for every
    probe point x, both P(S>x) and E[S 1{S<=x}] must fall below the
    threshold at the end of the parameter sequence."""

    kind: str
    mu: float
    threshold: float
    rows: list[ConditionRow] = field(default_factory=list)

    @property
    def final_rows(self) -> list[ConditionRow]:
        last = self.rows[-1].param if self.rows else None
        return [r for r in self.rows if r.param == last]

    @property
    def tail_ok(self) -> bool:
        return all(r.tail < self.threshold for r in self.final_rows)

    @property
    def truncated_mean_ok(self) -> bool:
        return all(r.truncated_mean < self.threshold for r in self.final_rows)

    @property
    def satisfied(self) -> bool:
        return self.tail_ok and self.truncated_mean_ok


def check_suff_conditions(kind: str, mu: float, params, x_grid,
                          threshold: float = 0.05) -> SuffConditionReport:
    """Evaluate tail(x) and truncated_mean(x) along a parameter sequence
    ordered toward the family's heavy-tail limit."""
    params = list(params) if params else [None]
    rows = []
    for p in params:
        dist = ServiceDistribution(kind, mu, p)
        for x in x_grid:
            rows.append(ConditionRow(p, float(x),
                                     float(dist.tail(x)),
                                     float(dist.truncated_mean(x))))
    return SuffConditionReport(kind, mu, threshold, rows)


@dataclass(frozen=True)
class WitnessRow:
    param: float | None
    min_term: MinTermEstimate


@dataclass(frozen=True)
class MinTermWitnessReport:
    conditions: SuffConditionReport
    rows: list[WitnessRow]

    @property
    def min_term_vanishes(self) -> bool:
        thr = self.conditions.threshold
        return self.rows[-1].min_term.value < thr

    @property
    def consistent(self) -> bool:
        """The residual-minimum term vanishes exactly when the two tail
        conditions do (the directional reading of the equivalence)."""
        return self.min_term_vanishes == self.conditions.satisfied


def min_term_to_zero_witness(arrival: ArrivalProcess, kind: str, mu: float,
                             params, n_paths: int,
                             rng: np.random.Generator,
                             x_grid=(0.1, 0.5, 1.0, 5.0),
                             threshold: float = 0.05) -> MinTermWitnessReport:
    """Pair the Monte Carlo residual-minimum estimates along a parameter
    sequence with the sufficient-condition report over the same grid."""
    cond = check_suff_conditions(kind, mu, params, x_grid, threshold)
    rows = []
    for p in (list(params) if params else [None]):
        dist = ServiceDistribution(kind, mu, p)
        rows.append(WitnessRow(p, estimate_min_term(arrival, dist, n_paths, rng)))
    return MinTermWitnessReport(cond, rows)
