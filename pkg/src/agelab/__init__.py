"""Age-of-information vs packet-delay laboratory."""

from .distributions import ArrivalProcess, ServiceDistribution
from .simcore import PolicyConfig, SimResult, run, run_replications

__all__ = [
    "ArrivalProcess",
    "ServiceDistribution",
    "PolicyConfig",
    "SimResult",
    "run",
    "run_replications",
]
