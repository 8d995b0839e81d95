"""Exception hierarchy shared by every statecraft module.

All domain errors derive from :class:`StatecraftError` so callers can catch
one base class at CLI and service boundaries.  Validation routines do not
raise; they return violation lists.  Exceptions are reserved for contract
breaches on operation inputs (unknown identifiers, exhausted populations,
malformed documents and the like).
"""

from __future__ import annotations


class StatecraftError(Exception):
    """Base class for all statecraft domain errors."""


# --- core bookkeeping -------------------------------------------------------

class InsufficientOccupancy(StatecraftError):
    """A departure event asked for more objects than the state holds."""


class TickOutOfRange(StatecraftError):
    """A tick falls outside the recorded series."""


class StateSetMismatch(StatecraftError):
    """Two distributions declare different state domains."""


class UnknownArc(StatecraftError):
    """An event references an arc the diagram does not declare."""


class UnknownState(StatecraftError):
    """A state identifier is not known to the receiving structure."""


# --- classification ---------------------------------------------------------

class DimensionMismatch(StatecraftError):
    """A parameter vector has the wrong number of components."""


class SeriesTooShort(StatecraftError):
    """Dynamics recognition needs at least three samples."""


class UnsampledBoundary(StatecraftError):
    """An object history is missing a sample at a partition boundary."""


# --- hierarchy and assembly -------------------------------------------------

class PreconditionViolated(StatecraftError):
    """A composition precondition does not hold."""


class IdCollision(StatecraftError):
    """Two structures that must be disjoint share an identifier."""


class AssemblyRejected(StatecraftError):
    """Model assembly failed; the full validation report is attached."""

    def __init__(self, report):
        self.report = list(report)
        lines = "; ".join(v.message for v in self.report[:5])
        more = "" if len(self.report) <= 5 else f" (+{len(self.report) - 5} more)"
        super().__init__(f"assembly rejected: {lines}{more}")


# --- scenario engine --------------------------------------------------------

class UnknownSymbol(StatecraftError):
    """A schedule references a control symbol the model does not declare."""


class InconsistentState(StatecraftError):
    """A simulation state does not fit the model it is stepped against."""


class TrajectoryModelMismatch(StatecraftError):
    """A trajectory is evaluated against a scenario from another model."""


class ModelMismatch(StatecraftError):
    """Reports being compared were produced from different models."""


class UnknownSupportState(StatecraftError):
    """A partial criterion references a state its diagram does not have."""


# --- planner ----------------------------------------------------------------

class NoPlanExists(StatecraftError):
    """Plan enumeration was asked about states outside the rule base."""


class InvalidOverride(StatecraftError):
    """A template override addresses a value the template never declared."""


class TransformBreaksOrder(StatecraftError):
    """A template transform would violate the rank discipline."""


class UnknownGoalState(StatecraftError):
    """An objectives-tree leaf points at a missing diagram or state."""


# --- io harness -------------------------------------------------------------

class UnsortedInput(StatecraftError):
    """A monitoring stream is not sorted by tick."""


class UnknownDiagram(StatecraftError):
    """A record or reference names a diagram the model does not contain."""


class ModelSyntaxError(StatecraftError):
    """Model text failed to parse; carries the full diagnostics list."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0] if self.diagnostics else None
        head = f"{first.code} at line {first.line}: {first.message}" if first else "no diagnostics"
        more = "" if len(self.diagnostics) <= 1 else f" (+{len(self.diagnostics) - 1} more)"
        super().__init__(f"model text rejected: {head}{more}")
