"""Spatio-temporal model of contention-based random access in massive-IoT
cellular networks.

Closed-form per-slot success/detection probabilities and queue evolution
under baseline, access-class-barring, and back-off schemes, cross-validated
by a built-in Monte Carlo spatial simulator.
"""

__version__ = "0.1.0"

from .analysis import (  # noqa: F401
    ActivityState,
    NumericError,
    SlotAnalysis,
    interference_integral,
    laplace_inter,
    laplace_intra_device,
    optimal_bs_density,
    preamble_detection,
    preamble_success,
    received_packets_per_bs,
)
from .params import (  # noqa: F401
    ConfigError,
    Experiment,
    NetworkParams,
    SchemeConfig,
    TrafficProfile,
    from_config,
    load_config,
)
from .queueing import SchemeTrace, evolve, trace_means  # noqa: F401
from .sim import run_ensemble, run_realization, sample_deployment  # noqa: F401
