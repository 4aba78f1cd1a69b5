"""Discrete-event simulation of video delivery over mobile multimedia sensor networks."""

from .config import RunConfig, expand_sweeps, parse_config
from .engine import RngStream, Simulator
from .scenario import IntrusionScenario, ScenarioParams, simulate, simulate_line
from .video import FecPolicy, GopPattern

__all__ = [
    "FecPolicy",
    "GopPattern",
    "IntrusionScenario",
    "RngStream",
    "RunConfig",
    "ScenarioParams",
    "Simulator",
    "expand_sweeps",
    "parse_config",
    "simulate",
    "simulate_line",
]

__version__ = "0.1.0"
