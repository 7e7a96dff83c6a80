"""URLLC vehicular network latency-reliability toolkit."""
from .errors import ConfigError, DomainError, GeometryError, InfeasibleError
from .numerics import FblQuery, fbl_min_latency, fbl_rate, fbl_required_snr, q_function, q_inverse
from .outage import DiversityChannel, ResourceGridConfig, lrtd_estimate, outage_mrc_iid, tradeoff_sweep
from .queueing import ArrivalProcess, QosRequirement, min_rate_for_qos, simulate_fifo_queue
from .urban import allocate_sharing, build_urban_scenario, run_episode
from .v2i import FreewayScenario, UserQos, epa_latencies, minmax_latency_allocation

__version__ = "0.1.0"

__all__ = [
    "ArrivalProcess", "ConfigError", "DiversityChannel", "DomainError", "FblQuery", "FreewayScenario",
    "GeometryError", "InfeasibleError", "QosRequirement", "ResourceGridConfig", "UserQos", "allocate_sharing",
    "build_urban_scenario", "epa_latencies", "fbl_min_latency", "fbl_rate", "fbl_required_snr", "lrtd_estimate",
    "min_rate_for_qos", "minmax_latency_allocation", "outage_mrc_iid", "q_function", "q_inverse", "run_episode",
    "simulate_fifo_queue", "tradeoff_sweep",
]
