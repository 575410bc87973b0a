"""Constraint-consistent funnel planning and prescribed-performance control.

Typical use::

    from ccfunnel import load, simulate, check_trace
    scenario = load("paper_kc3")
    trace = simulate(scenario)
    print(check_trace(trace, scenario).summary())
"""
from .checks import CheckReport, check_trace
from .controller import ControllerConfig, controller_step, control_input, normalize_output, \
    transform, inverse_transform, velocity_reference
from .engine import SimConfig, oracle_simulate, run_batch, simulate, with_sim
from .errors import FunnelError, ScenarioError, ScenarioParseError, TraceSchemaError
from .planner import ConstraintPair, PlannerConfig, PlannerState, funnel_bounds
from .plant import ELPlant, HandPointRobot, InitialState, MobileRobot, PointMass
from .scenario import Scenario, dumps, load, loads
from .signals import Constant, ExpEnvelope, Scaled, Sinusoid, Sum, TimeSignal
from .trace import SimTrace, read_csv

__all__ = [
    "CheckReport", "check_trace", "ControllerConfig", "controller_step", "control_input",
    "normalize_output", "transform", "inverse_transform", "velocity_reference", "SimConfig",
    "oracle_simulate", "run_batch", "simulate", "with_sim", "FunnelError", "ScenarioError",
    "ScenarioParseError", "TraceSchemaError", "ConstraintPair", "PlannerConfig", "PlannerState",
    "funnel_bounds", "ELPlant", "HandPointRobot", "InitialState", "MobileRobot", "PointMass",
    "Scenario", "dumps", "load", "loads", "Constant", "ExpEnvelope", "Scaled", "Sinusoid", "Sum",
    "TimeSignal", "SimTrace", "read_csv",
]
