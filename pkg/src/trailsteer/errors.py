"""Exception types shared across the package."""


class TrailsteerError(Exception):
    """Base class for all package errors."""


class InvalidSpec(TrailsteerError):
    """A configuration, path spec or parameter set is ill-formed."""


class CorridorExceeded(TrailsteerError):
    """A query point is farther from the reference path than the corridor allows."""


class DomainViolation(TrailsteerError):
    """A state left the domain a control law is defined on (e.g. |delta| >= pi/2)."""


class Infeasible(TrailsteerError):
    """No admissible parameter set exists for the requested operating point."""


class NoSolution(TrailsteerError):
    """A numeric search exhausted its budget without an admissible solution."""
