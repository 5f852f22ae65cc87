"""Deterministic desk-scale simulator for threshold functional encryption
over attested enclaves, exposure-notification analytics, and heatmap
reporting.

The stack, bottom up: seeded crypto primitives, a simulated attestation
registry with its three enclave programs, the ideal setup functionalities
(certification, repository, channels, bulletin board), the scripted world
model, the stateful-function framework with its aggregation compilers, the
threshold-FE ideal functionality and the enclave protocol realizing it,
the exposure-notification layer with its analytics extension, the heatmap
analysis function, and a scenario-replay driver with a CLI.
"""

from .driver import Transcript, run_fe_trace, random_fe_trace, run_scenario
from .scenario import Scenario, ScenarioParams, load_scenario

__version__ = "0.1.0"

__all__ = [
    "Scenario",
    "ScenarioParams",
    "Transcript",
    "load_scenario",
    "random_fe_trace",
    "run_fe_trace",
    "run_scenario",
    "__version__",
]
