"""coalchain: continuous-time scheduling for a three-terminal coal export chain.

The package builds feasible vessel and stockpile schedules for a coal
export system whose terminals share a rail network on the inbound side and
a tidal channel on the outbound side.  A deterministic greedy constructor
turns a vessel order into a complete schedule; a hierarchical-population
genetic algorithm searches over orders to minimise average vessel delay.

Typical use::

    from coalchain import generate, scheduler, search
    inst = generate.generate_instance(generate.GeneratorConfig(vessels=50, seed=1))
    sol = scheduler.construct_schedule(inst, inst.eta_order())
    best, history = search.run_ga(inst, search.RunConfig(generations=20, seed=1))
"""

from .errors import (CoalChainError, HorizonError, IncompleteSolutionError,
                     InputError, SchedulingError)
from .model import (Component, Instance, Solution, Stockpile,
                    StockpileSchedule, TerminalConfig, TideTable, Vessel,
                    VesselSchedule, average_delay, earliest_departure,
                    stockpile_length, tidal_window_for)
from .scheduler import construct_schedule
from .validate import Violation, validate

__all__ = [
    "CoalChainError", "HorizonError", "IncompleteSolutionError", "InputError",
    "SchedulingError", "Component", "Instance", "Solution", "Stockpile",
    "StockpileSchedule", "TerminalConfig", "TideTable", "Vessel",
    "VesselSchedule", "average_delay", "earliest_departure",
    "stockpile_length", "tidal_window_for", "construct_schedule",
    "Violation", "validate",
]

__version__ = "0.1.0"
