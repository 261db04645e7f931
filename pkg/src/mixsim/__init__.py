"""mixsim: deterministic discrete-event simulation of mix network designs."""

from .engine import (ConfigurationError, RngStream, Simulation, SimulationLogicError,
                     sample_exponential, sample_poisson_interarrival, to_seconds, to_ticks)
from .harness import run_scenario, search, sweep, write_csv
from .scenario import Scenario, load_scenario, parse_scenario
from .simulate import MixnetSimulation, RunResult, run_single

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "RngStream", "Simulation", "SimulationLogicError",
    "sample_exponential", "sample_poisson_interarrival", "to_seconds", "to_ticks",
    "run_scenario", "search", "sweep", "write_csv",
    "Scenario", "load_scenario", "parse_scenario",
    "MixnetSimulation", "RunResult", "run_single",
    "__version__",
]
