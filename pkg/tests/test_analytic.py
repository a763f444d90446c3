import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agelab import analytic
from agelab.distributions import ArrivalProcess, ServiceDistribution

LAM, MU = 0.5, 0.8
POISSON = ArrivalProcess.poisson(LAM)

HEAVY_SEQ = {
    "pareto": [1.5, 1.1, 1.01, 1.001],
    "lognormal": [1.0, 2.0, 4.0, 50.0],
    "weibull": [1.0, 0.5, 0.2, 0.05],
}

FAMILY_GRID = [
    ("exponential", None),
    ("pareto", 1.5), ("pareto", 3.0),
    ("lognormal", 1.0), ("lognormal", 2.0),
    ("weibull", 0.5), ("weibull", 1.0),
]


def svc(kind, shape=None, mu=MU):
    return ServiceDistribution(kind, mu, shape)


# -- age floor -----------------------------------------------------------

def test_a_min_poisson_is_inverse_rate():
    assert analytic.a_min(POISSON) == 2.0


def test_a_min_periodic():
    assert analytic.a_min(ArrivalProcess.periodic(0.5)) == pytest.approx(1.0)


def test_a_min_infinite_second_moment_propagates():
    heavy = ArrivalProcess(ServiceDistribution("pareto", 0.5, 1.5))
    assert analytic.a_min(heavy) == math.inf


# -- closed-form age values (frozen) --------------------------------------

def test_mm1_lcfsp_age_exact():
    assert analytic.lcfsp_age(POISSON, svc("exponential")) == 3.25


def test_md1_lcfsp_age_frozen():
    # 1/lam + (1/mu) e^{lam/mu}: E[min(X,S)] = (1-e^{-lam c})/lam with c=1/mu
    expected = 2 * math.exp(0.625)
    assert analytic.lcfsp_age(POISSON, svc("deterministic")) == \
        pytest.approx(expected, rel=1e-12)


def test_periodic_arrival_exponential_service_age_frozen():
    # deterministic X = 2: E[min(X,S)]/P(S<X) = E[S] exactly, so age = 1+1.25
    arr = ArrivalProcess.periodic(0.5)
    assert analytic.lcfsp_age(arr, svc("exponential")) == \
        pytest.approx(2.25, rel=1e-10)


def test_mm1_expected_min_and_psx():
    emin, psx = analytic.expected_min_and_psx(POISSON, svc("exponential"))
    assert emin == pytest.approx(1 / 1.3, rel=1e-10)
    assert psx == pytest.approx(0.8 / 1.3, rel=1e-10)


def test_both_continuous_quadrature_path_against_monte_carlo():
    arr = ArrivalProcess(ServiceDistribution("pareto", LAM, 3.0))
    service = svc("lognormal", 1.0)
    emin, psx = analytic.expected_min_and_psx(arr, service)
    rng = np.random.default_rng(11)
    xs = np.asarray(arr.sample(rng, 400_000), float)
    ss = np.asarray(service.sample(rng, 400_000), float)
    assert emin == pytest.approx(float(np.minimum(xs, ss).mean()), rel=0.01)
    assert psx == pytest.approx(float((ss < xs).mean()), abs=0.005)


def test_alternate_age_form_mm1_value():
    # the documented inconsistent simplification: E[S]/P(S<X) = 1.25/(8/13)
    assert analytic.lcfsp_age_alt(POISSON, svc("exponential")) == \
        pytest.approx(2.03125, rel=1e-12)


def test_degenerate_preemption_raises():
    # X = 0.1 while S concentrates around 1.25: P(S < X) ~ 1e-23
    arr = ArrivalProcess.periodic(10.0)
    with pytest.raises(analytic.DegeneratePreemptionError):
        analytic.lcfsp_age(arr, svc("lognormal", 0.25))


def test_two_point_masses_rejected():
    arr = ArrivalProcess.periodic(10.0)
    with pytest.raises(ValueError):
        analytic.lcfsp_age(arr, svc("deterministic"))


# -- delay ----------------------------------------------------------------

def test_mm1_delay_exact():
    assert analytic.mg1_lcfsp_delay(POISSON, svc("exponential")) == 10 / 3


def test_md1_delay_frozen():
    # lam E[S^2] / (2 (1-rho)) + E[S] with E[S^2] = 1/mu^2
    expected = 0.5 * 1.5625 / 0.75 + 1.25
    assert analytic.mg1_lcfsp_delay(POISSON, svc("deterministic")) == \
        pytest.approx(expected, rel=1e-14)


def test_delay_requires_poisson():
    with pytest.raises(ValueError):
        analytic.mg1_lcfsp_delay(ArrivalProcess.periodic(0.5),
                                 svc("exponential"))


def test_delay_instability_raises():
    with pytest.raises(analytic.StabilityError):
        analytic.mg1_lcfsp_delay(ArrivalProcess.poisson(0.9),
                                 svc("exponential"))


@pytest.mark.parametrize("alpha", [1.5, 2.0])
def test_delay_divergent_second_moment(alpha):
    assert analytic.mg1_lcfsp_delay(POISSON, svc("pareto", alpha)) == math.inf


# -- structural invariants -------------------------------------------------

@pytest.mark.parametrize("kind,shape", FAMILY_GRID + [("deterministic", None)])
def test_age_lower_bound(kind, shape):
    assert analytic.lcfsp_age(POISSON, svc(kind, shape)) >= 2.0


@pytest.mark.parametrize("kind,shape", FAMILY_GRID)
def test_deterministic_worst_case_lcfsp(kind, shape):
    det_age = analytic.lcfsp_age(POISSON, svc("deterministic"))
    assert analytic.lcfsp_age(POISSON, svc(kind, shape)) <= det_age


@pytest.mark.parametrize("kind,shape", FAMILY_GRID)
def test_deterministic_worst_case_gginf(kind, shape):
    rng = np.random.default_rng(17)
    det_age, _ = analytic.gginf_age(POISSON, svc("deterministic"), 10_000, rng)
    age, est = analytic.gginf_age(POISSON, svc(kind, shape), 100_000, rng)
    assert age <= det_age + 3 * est.std_error


@pytest.mark.parametrize("kind,shape", FAMILY_GRID)
def test_jensen_consistency_psx(kind, shape):
    _, psx = analytic.expected_min_and_psx(POISSON, svc(kind, shape))
    assert psx >= math.exp(-LAM / MU) - 1e-12


def test_jensen_equality_deterministic():
    _, psx = analytic.expected_min_and_psx(POISSON, svc("deterministic"))
    assert psx == pytest.approx(math.exp(-LAM / MU), rel=1e-12)


@pytest.mark.parametrize("kind", sorted(HEAVY_SEQ))
def test_monotone_heaviness_lcfsp(kind):
    ages = [analytic.lcfsp_age(POISSON, svc(kind, p))
            for p in HEAVY_SEQ[kind]]
    assert all(b <= a + 1e-12 for a, b in zip(ages, ages[1:]))
    assert ages[-1] < 2.1  # approaches the floor


@pytest.mark.parametrize("kind", sorted(HEAVY_SEQ))
def test_monotone_heaviness_gginf(kind):
    rng = np.random.default_rng(23)
    ests = [analytic.gginf_age(POISSON, svc(kind, p), 100_000, rng)
            for p in HEAVY_SEQ[kind]]
    for (a, ea), (b, eb) in zip(ests, ests[1:]):
        slack = 3 * math.hypot(ea.std_error, eb.std_error)
        assert b <= a + slack
    assert ests[-1][0] < 2.1


# -- min-term estimator -----------------------------------------------------

def test_min_term_deterministic_short_circuit():
    est = analytic.estimate_min_term(POISSON, svc("deterministic"), 10,
                                     np.random.default_rng(0))
    assert est.value == 1.25 and est.std_error == 0.0


def test_gdinf_age_exact():
    age, est = analytic.gginf_age(POISSON, svc("deterministic"))
    assert age == 3.25
    assert est.std_error == 0.0


def test_min_term_path_early_stop_matches_brute_force():
    rng = np.random.default_rng(99)
    for _ in range(200):
        xs = rng.exponential(2.0, 1000)
        ss = rng.exponential(1.25, 1001)
        assert analytic.min_term_path(xs, ss, early_stop=True) == \
            analytic.min_term_path(xs, ss, early_stop=False)


@given(st.integers(0, 2 ** 31 - 1), st.floats(0.2, 5.0), st.floats(0.2, 5.0))
@settings(max_examples=60, deadline=None)
def test_min_term_path_early_stop_property(seed, mx, ms):
    rng = np.random.default_rng(seed)
    xs = rng.exponential(mx, 100)
    ss = rng.lognormal(0.0, 1.0, 101) * ms
    assert analytic.min_term_path(xs, ss, early_stop=True) == \
        analytic.min_term_path(xs, ss, early_stop=False)


def test_estimate_min_term_matches_scalar_paths_statistically():
    # vectorized estimator vs averaged scalar brute force, same law
    service = svc("lognormal", 1.0)
    est = analytic.estimate_min_term(POISSON, service, 100_000,
                                     np.random.default_rng(5))
    rng = np.random.default_rng(6)
    vals = [analytic.min_term_path(rng.exponential(2.0, 400),
                                   np.asarray(service.sample(rng, 401), float),
                                   early_stop=False)
            for _ in range(4000)]
    brute = float(np.mean(vals))
    se = float(np.std(vals) / math.sqrt(len(vals)))
    assert est.value == pytest.approx(brute,
                                      abs=4 * math.hypot(se, est.std_error))


def test_estimate_min_term_rejects_bad_paths():
    with pytest.raises(ValueError):
        analytic.estimate_min_term(POISSON, svc("exponential"), 0,
                                   np.random.default_rng(0))


def test_mm1_gginf_between_floor_and_lcfsp():
    age, est = analytic.gginf_age(POISSON, svc("exponential"), 200_000,
                                  np.random.default_rng(8))
    assert 2.0 < age < 3.25
    assert est.std_error < 0.01


# -- recursion-based age estimator -------------------------------------------

def test_recursion_estimate_matches_formula_mm1():
    rng = np.random.default_rng(31)
    est = analytic.lcfsp_age_recursion_estimate(POISSON, svc("exponential"),
                                                500_000, rng)
    assert est == pytest.approx(3.25, rel=0.01)


def test_recursion_estimate_matches_formula_md1():
    rng = np.random.default_rng(32)
    est = analytic.lcfsp_age_recursion_estimate(POISSON,
                                                svc("deterministic"),
                                                500_000, rng)
    assert est == pytest.approx(2 * math.exp(0.625), rel=0.01)


# -- sufficiency conditions and witness reports ------------------------------

@pytest.mark.parametrize("kind", sorted(HEAVY_SEQ))
def test_suff_conditions_satisfied_at_heavy_end(kind):
    rep = analytic.check_suff_conditions(kind, MU, HEAVY_SEQ[kind],
                                         (0.1, 0.5, 1.0, 5.0))
    assert rep.satisfied
    assert rep.tail_ok and rep.truncated_mean_ok
    assert all(r.param == HEAVY_SEQ[kind][-1] for r in rep.final_rows)


def test_suff_conditions_fail_for_light_tail():
    rep = analytic.check_suff_conditions("pareto", MU, [3.0],
                                         (0.1, 0.5, 1.0, 5.0))
    assert not rep.satisfied


@pytest.mark.parametrize("kind", sorted(HEAVY_SEQ))
def test_min_term_witness_consistency_heavy(kind):
    rep = analytic.min_term_to_zero_witness(
        POISSON, kind, MU, HEAVY_SEQ[kind], 50_000,
        np.random.default_rng(41))
    assert rep.min_term_vanishes
    assert rep.consistent


def test_min_term_witness_consistency_light():
    rep = analytic.min_term_to_zero_witness(
        POISSON, "pareto", MU, [3.0], 50_000, np.random.default_rng(42))
    assert not rep.min_term_vanishes
    assert rep.consistent
