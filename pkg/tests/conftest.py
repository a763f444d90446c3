"""Shared fixtures.

The full-scale M/M/1 runs (horizon 2e6, 8 replications) are expensive, so
they are computed once per session and shared between the module tests and
the acceptance suite.  Each fixture records its wall-clock cost so the
acceptance tests can assert their runtime budgets.
"""

import time

import pytest

from agelab.distributions import ArrivalProcess, ServiceDistribution
from agelab import simcore

LAM, MU = 0.5, 0.8


@pytest.fixture(scope="session")
def poisson_half():
    return ArrivalProcess.poisson(LAM)


@pytest.fixture(scope="session")
def exp_service():
    return ServiceDistribution("exponential", MU)


@pytest.fixture(scope="session")
def det_service():
    return ServiceDistribution("deterministic", MU)


def _timed_reps(arrival, service, policy, n_reps=8, horizon=2e6, warmup=2e5,
                seed=42):
    t0 = time.perf_counter()
    res = simcore.run_replications(arrival, service, policy, horizon, warmup,
                                   n_reps, seed)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def mm1_lcfsp_full(poisson_half, exp_service):
    """8-rep horizon-2e6 M/M/1 LCFSp aggregate plus its wall time."""
    return _timed_reps(poisson_half, exp_service, simcore.lcfsp())


@pytest.fixture(scope="session")
def mm1_fcfs_full(poisson_half, exp_service):
    """8-rep horizon-2e6 M/M/1 FCFS aggregate plus its wall time."""
    return _timed_reps(poisson_half, exp_service, simcore.fcfs())


@pytest.fixture(scope="session")
def gdinf_full(poisson_half, det_service):
    """Infinite-server deterministic-service run at full scale."""
    return _timed_reps(poisson_half, det_service, simcore.infinite(),
                       n_reps=4)
