"""Fault types raised by the planner, controller, plant and engine."""
from __future__ import annotations

from typing import Optional


class FunnelError(Exception):
    """Base class for every fault in this package.

    ``kind`` is a short machine-readable tag written to trace fault logs;
    ``index`` is the zero-based output/component index when one applies.
    """

    kind = "fault"

    def __init__(self, message: str, index: Optional[int] = None,
                 time: Optional[float] = None):
        super().__init__(message)
        self.index = index
        self.time = time


class FunnelViolation(FunnelError):
    """An output reached (within ``DELTA_EDGE``) the edge of its planned funnel."""

    kind = "funnel_violation"


class VelocityFunnelViolation(FunnelViolation):
    kind = "velocity_funnel_violation"


class TransformDomainError(FunnelError, ValueError):
    kind = "transform_domain"


class PlannerInfeasible(FunnelError):
    """``eta + phi`` dropped to the singularity floor of the modification dynamics."""

    kind = "planner_infeasible"


class NonFiniteValue(FunnelError):
    kind = "non_finite"


class SingularConfiguration(FunnelError):
    kind = "singular_configuration"


class ScenarioError(FunnelError):
    """Scenario failed a static validation check; ``issues`` lists every failure."""

    kind = "validation"

    def __init__(self, issues):
        if isinstance(issues, str):
            issues = [issues]
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


class ScenarioParseError(FunnelError):
    """Malformed scenario text.  ``line`` is 1-based when known."""

    kind = "parse"

    def __init__(self, message: str, line: Optional[int] = None,
                 source: Optional[str] = None):
        where = source or "<scenario>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.source = source


class TraceSchemaError(FunnelError):
    kind = "schema"
