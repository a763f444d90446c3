"""Parametric service-time and inter-generation-time laws.

Five families, each pinned to mean 1/mu: deterministic, exponential,
Pareto, log-normal, Weibull.  The shape parameter controls the tail;
scales are always derived from (mu, shape) so the mean constraint holds
exactly.  Heavy-tail evaluation (log-normal sigma up to 50, Weibull
kappa down to 0.05) is done in log space to avoid overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

DETERMINISTIC = "deterministic"
EXPONENTIAL = "exponential"
PARETO = "pareto"
LOGNORMAL = "lognormal"
WEIBULL = "weibull"

KINDS = (DETERMINISTIC, EXPONENTIAL, PARETO, LOGNORMAL, WEIBULL)
SHAPED_KINDS = (PARETO, LOGNORMAL, WEIBULL)

# Below this the Weibull scale beta = 1/(mu*Gamma(1+1/kappa)) leaves the
# comfortably representable range.
MIN_WEIBULL_SHAPE = 0.05

LAPLACE_RTOL = 1e-10

_TINY = float(np.finfo(float).tiny)
_HUGE = float(np.finfo(float).max)


class AdmissibilityError(ValueError):
    """Parameters outside the admissible range for a distribution kind."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class ServiceDistribution:
    """A positive law with mean exactly 1/mu.

    kind   one of KINDS
    mu     rate; the mean is 1/mu
    shape  alpha (Pareto, > 1), sigma (log-normal, > 0) or
           kappa (Weibull, >= MIN_WEIBULL_SHAPE); None otherwise
    """

    kind: str
    mu: float
    shape: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise AdmissibilityError(f"unknown distribution kind {self.kind!r}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise AdmissibilityError(f"mu must be a positive finite real, got {self.mu}")
        if self.kind in SHAPED_KINDS:
            if self.shape is None:
                raise AdmissibilityError(f"{self.kind} requires a shape parameter")
            if not math.isfinite(self.shape):
                raise AdmissibilityError(f"shape must be finite, got {self.shape}")
            if self.kind == PARETO and self.shape <= 1:
                raise AdmissibilityError(
                    f"pareto shape must satisfy alpha > 1, got {self.shape}")
            if self.kind == LOGNORMAL and self.shape <= 0:
                raise AdmissibilityError(
                    f"lognormal shape must satisfy sigma > 0, got {self.shape}")
            if self.kind == WEIBULL and self.shape < MIN_WEIBULL_SHAPE:
                raise AdmissibilityError(
                    f"weibull shape must satisfy kappa >= {MIN_WEIBULL_SHAPE}, "
                    f"got {self.shape}")
        elif self.shape is not None:
            raise AdmissibilityError(f"{self.kind} takes no shape parameter")

    # -- derived scale parameters ------------------------------------

    @property
    def mean(self) -> float:
        return 1.0 / self.mu

    @property
    def _theta(self) -> float:
        """Pareto scale; support is [theta, inf)."""
        a = self.shape
        return (a - 1.0) / (self.mu * a)

    @property
    def _log_beta(self) -> float:
        """log of the Weibull scale beta = 1/(mu*Gamma(1+1/kappa))."""
        return -math.log(self.mu) - special.gammaln(1.0 + 1.0 / self.shape)

    @property
    def _log_m(self) -> float:
        """Location of the underlying normal for the log-normal kind."""
        return -math.log(self.mu) - 0.5 * self.shape ** 2

    # -- sampling ------------------------------------------------------

    def sample(self, rng: np.random.Generator, size=None):
        """Draw from the law; inverse-CDF for Pareto/Weibull, normal
        transform for log-normal.  Samples are clipped into
        (tiny, max-float) so they stay strictly positive and finite."""
        if self.kind == DETERMINISTIC:
            if size is None:
                return self.mean
            return np.full(size, self.mean)
        if self.kind == EXPONENTIAL:
            return rng.exponential(self.mean, size)
        if self.kind == PARETO:
            u = rng.random(size)
            # (1-u)^(-1/alpha) with 1-u in (0, 1]
            return self._theta * np.exp(-np.log1p(-u) / self.shape)
        if self.kind == LOGNORMAL:
            z = rng.standard_normal(size)
            with np.errstate(over="ignore"):
                s = np.exp(self._log_m + self.shape * z)
            return np.clip(s, _TINY, _HUGE)
        # weibull
        u = rng.random(size)
        e = -np.log1p(-u)
        with np.errstate(divide="ignore", over="ignore"):
            s = np.exp(self._log_beta + np.log(e) / self.shape)
        return np.clip(s, _TINY, _HUGE)

    # -- distribution functions ----------------------------------------

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == DETERMINISTIC:
            out = np.where(x >= self.mean, 1.0, 0.0)
        elif self.kind == EXPONENTIAL:
            out = np.where(x > 0, -np.expm1(-self.mu * np.maximum(x, 0.0)), 0.0)
        elif self.kind == PARETO:
            th = self._theta
            with np.errstate(divide="ignore"):
                out = np.where(x > th, -np.expm1(self.shape * (math.log(th) - np.log(np.maximum(x, th)))), 0.0)
        elif self.kind == LOGNORMAL:
            out = np.where(x > 0, special.ndtr(self._z(np.maximum(x, _TINY))), 0.0)
        else:  # weibull
            out = np.where(x > 0, -np.expm1(-self._weibull_u(np.maximum(x, _TINY))), 0.0)
        return out.item() if out.ndim == 0 else out

    def tail(self, x):
        """P(S > x), evaluated in a numerically direct form (never as
        1 minus a near-one CDF)."""
        x = np.asarray(x, dtype=float)
        if self.kind == DETERMINISTIC:
            out = np.where(x < self.mean, 1.0, 0.0)
        elif self.kind == EXPONENTIAL:
            out = np.exp(-self.mu * np.maximum(x, 0.0))
        elif self.kind == PARETO:
            th = self._theta
            with np.errstate(divide="ignore"):
                out = np.where(x > th, np.exp(self.shape * (math.log(th) - np.log(np.maximum(x, th)))), 1.0)
        elif self.kind == LOGNORMAL:
            out = np.where(x > 0, special.ndtr(-self._z(np.maximum(x, _TINY))), 1.0)
        else:  # weibull
            with np.errstate(under="ignore"):
                out = np.where(x > 0, np.exp(-self._weibull_u(np.maximum(x, _TINY))), 1.0)
        return out.item() if out.ndim == 0 else out

    def _z(self, x):
        """Standardized log for the log-normal kind."""
        return (np.log(x) - self._log_m) / self.shape

    def _weibull_u(self, x):
        """(x/beta)^kappa computed in log space."""
        with np.errstate(over="ignore"):
            return np.exp(self.shape * (np.log(x) - self._log_beta))

    def pdf(self, x):
        if self.kind == DETERMINISTIC:
            raise ValueError("deterministic law has no density")
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            if self.kind == EXPONENTIAL:
                out = np.where(x >= 0, self.mu * np.exp(-self.mu * x), 0.0)
            elif self.kind == PARETO:
                th, a = self._theta, self.shape
                lx = np.log(np.maximum(x, _TINY))
                out = np.where(x >= th,
                               np.exp(math.log(a) + a * math.log(th) - (a + 1) * lx),
                               0.0)
            elif self.kind == LOGNORMAL:
                z = self._z(np.maximum(x, _TINY))
                out = np.where(x > 0,
                               np.exp(-0.5 * z * z) / (np.maximum(x, _TINY) * self.shape * math.sqrt(2 * math.pi)),
                               0.0)
            else:  # weibull
                k = self.shape
                u = self._weibull_u(np.maximum(x, _TINY))
                out = np.where(x > 0, k * u / np.maximum(x, _TINY) * np.exp(-u), 0.0)
        return out.item() if out.ndim == 0 else out

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        if np.any((q < 0) | (q >= 1)):
            raise ValueError("quantile requires 0 <= q < 1")
        if self.kind == DETERMINISTIC:
            out = np.full_like(q, self.mean)
        elif self.kind == EXPONENTIAL:
            out = -np.log1p(-q) / self.mu
        elif self.kind == PARETO:
            out = self._theta * np.exp(-np.log1p(-q) / self.shape)
        elif self.kind == LOGNORMAL:
            with np.errstate(over="ignore"):
                out = np.exp(self._log_m + self.shape * special.ndtri(q))
            out = np.clip(out, 0.0, _HUGE)
        else:  # weibull
            e = -np.log1p(-q)
            with np.errstate(divide="ignore", over="ignore"):
                out = np.where(e > 0, np.exp(self._log_beta + np.log(np.maximum(e, _TINY)) / self.shape), 0.0)
            out = np.clip(out, 0.0, _HUGE)
        return out.item() if out.ndim == 0 else out

    # -- moments ---------------------------------------------------------

    def truncated_mean(self, x: float) -> float:
        """E[S * 1{S <= x}] in closed form."""
        if x <= 0:
            return 0.0
        m = self.mean
        if self.kind == DETERMINISTIC:
            return m if x >= m else 0.0
        if self.kind == EXPONENTIAL:
            return m * (-math.expm1(-self.mu * x)) - x * math.exp(-self.mu * x)
        if self.kind == PARETO:
            th, a = self._theta, self.shape
            if x <= th:
                return 0.0
            return m * (-math.expm1((a - 1.0) * (math.log(th) - math.log(x))))
        if self.kind == LOGNORMAL:
            s = self.shape
            return m * special.ndtr(math.log(x * self.mu) / s - s / 2.0)
        # weibull
        u = float(self._weibull_u(x))
        return m * float(special.gammainc(1.0 + 1.0 / self.shape, u))

    def second_moment(self) -> float:
        """E[S^2]; math.inf when divergent (Pareto alpha <= 2)."""
        if self.kind == DETERMINISTIC:
            return self.mean ** 2
        if self.kind == EXPONENTIAL:
            return 2.0 / self.mu / self.mu
        if self.kind == PARETO:
            a = self.shape
            if a <= 2.0:
                return math.inf
            return a * self._theta ** 2 / (a - 2.0)
        if self.kind == LOGNORMAL:
            with np.errstate(over="ignore"):
                v = float(np.exp(self.shape ** 2 - 2.0 * math.log(self.mu)))
            return v if math.isfinite(v) else math.inf
        # weibull
        k = self.shape
        with np.errstate(over="ignore"):
            v = float(np.exp(2.0 * self._log_beta + special.gammaln(1.0 + 2.0 / k)))
        return v if math.isfinite(v) else math.inf

    def variance(self) -> float:
        m2 = self.second_moment()
        if math.isinf(m2):
            return math.inf
        return m2 - self.mean ** 2

    # -- transforms --------------------------------------------------------

    def laplace(self, s: float) -> float:
        """E[exp(-s*S)] for s >= 0."""
        if s < 0:
            raise ValueError("laplace transform requires s >= 0")
        if s == 0.0:
            return 1.0
        if self.kind == DETERMINISTIC:
            return math.exp(-s * self.mean)
        if self.kind == EXPONENTIAL:
            return self.mu / (self.mu + s)
        val = 1.0 - s * self.exp_weighted_tail_integral(s)
        return min(max(val, 0.0), 1.0)

    def exp_weighted_tail_integral(self, s: float) -> float:
        """integral_0^inf exp(-s*x) P(S > x) dx, so that
        laplace(s) = 1 - s * integral and E[min(Exp(s), S)] = integral."""
        if s < 0:
            raise ValueError("requires s >= 0")
        if self.kind == DETERMINISTIC:
            if s == 0.0:
                return self.mean
            return -math.expm1(-s * self.mean) / s
        if self.kind == EXPONENTIAL:
            return 1.0 / (self.mu + s)
        if s == 0.0:
            return self.mean

        def f(x):
            return math.exp(-s * x) * self.tail(x)

        knots = self._quad_knots(extra_scales=s)
        return _piecewise_quad(f, knots, rtol=LAPLACE_RTOL, floor=1.0 / max(s, 1.0))

    def _quad_knots(self, extra_scales: float | None = None) -> list[float]:
        """Subdivision points spanning the quantile range of a
        multi-scale integrand."""
        qs = [1e-9, 1e-6, 1e-3, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99,
              1 - 1e-3, 1 - 1e-6, 1 - 1e-9, 1 - 1e-12]
        pts = [float(self.quantile(q)) for q in qs]
        if extra_scales is not None and extra_scales > 0:
            pts.extend(10.0 ** k / extra_scales for k in range(-2, 3))
        pts = sorted({p for p in pts if p > 0 and math.isfinite(p)})
        return pts


def _piecewise_quad(f, knots, rtol, floor):
    """Adaptive quadrature of f over [0, inf), subdivided at knots.

    Raises QuadratureError when the summed error estimates exceed the
    relative tolerance against max(result, floor)."""
    edges = [0.0] + list(knots) + [math.inf]
    total, errsum = 0.0, 0.0
    with np.errstate(under="ignore"):
        for a, b in zip(edges[:-1], edges[1:]):
            v, e = integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
            total += v
            errsum += e
    if errsum > rtol * max(abs(total), floor):
        raise QuadratureError(
            f"quadrature error {errsum:g} exceeds tolerance on result {total:g}")
    return total


@dataclass(frozen=True)
class ArrivalProcess:
    """Renewal generation of update packets; the inter-generation law is a
    ServiceDistribution reused as F_X, so the rate is law.mu."""

    law: ServiceDistribution

    @property
    def rate(self) -> float:
        return self.law.mu

    @property
    def is_poisson(self) -> bool:
        return self.law.kind == EXPONENTIAL

    @property
    def mean_interarrival(self) -> float:
        return self.law.mean

    def interarrival_second_moment(self) -> float:
        return self.law.second_moment()

    def sample(self, rng: np.random.Generator, size=None):
        return self.law.sample(rng, size)

    @classmethod
    def poisson(cls, rate: float) -> "ArrivalProcess":
        return cls(ServiceDistribution(EXPONENTIAL, rate))

    @classmethod
    def periodic(cls, rate: float) -> "ArrivalProcess":
        return cls(ServiceDistribution(DETERMINISTIC, rate))
