"""Exception types shared across the package."""

from __future__ import annotations


class OnrouteError(Exception):
    """Base class for all package-specific failures."""


class ParseError(OnrouteError):
    """Malformed JSON or JSONL input."""


class SchemaViolation(OnrouteError):
    """Structurally valid input that breaks a documented constraint."""


class MetricViolation(OnrouteError):
    """Distance matrix fails a metric axiom and repair was not requested."""


class CapExceeded(OnrouteError):
    """Exact solver invoked above its configured size cap."""


class EmptyBall(OnrouteError):
    """Generator found no candidate location within the release radius."""


class LocalityViolation(OnrouteError):
    """A replanning policy found its next target outside the release radius.

    Raised by policies whose analysis guarantees the target is reachable
    within the radius; seeing this means the request stream broke the
    release-distance contract (or an internal invariant is wrong).
    """


class SequentialityViolation(OnrouteError):
    """A sequential-arrival policy saw overlapping outstanding requests."""


class PolicyStalled(OnrouteError):
    """Requests remain but the policy produced no further movement."""


class NontermGuard(OnrouteError):
    """Simulation exceeded its runtime or event budget."""


class MissingPosition(OnrouteError):
    """Queried a trace position outside the recorded time range."""


class EmptyReport(OnrouteError):
    """Plot data requested from a report with no rows."""
