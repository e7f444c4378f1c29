"""Exception hierarchy shared across the package."""


class DerArmError(Exception):
    """Base class for all package errors."""


class ValidationError(DerArmError):
    """Invalid user input (dimensions, values, configuration)."""


class DimensionMismatch(ValidationError):
    """Array sizes inconsistent with the rod discretization."""


class DegenerateEdge(ValidationError):
    """Two consecutive nodes coincide (zero-length edge)."""


class NonFinite(ValidationError):
    """NaN or infinity in state or parameter data."""


class LayoutMismatch(ValidationError):
    """Segment layout inconsistent with the node count."""


class ScenarioError(ValidationError):
    """Scenario file failed parsing or validation."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class NumericalError(DerArmError):
    """Iterative solver failure."""


class AntipodalTangents(NumericalError):
    """Consecutive tangents antiparallel; curvature binormal singular."""


class NewtonDivergence(NumericalError):
    """Implicit-step Newton iteration hit the iteration cap."""


class IkDivergence(NumericalError):
    """Inverse-kinematics Newton iteration failed to converge."""


class Unreachable(ValidationError):
    """Task-space target outside the two-arc workspace."""


class TooFewSamples(ValidationError):
    """Not enough samples to form finite differences."""


class SingularLambda(ValidationError):
    """Actuation scaling matrix is singular."""


class SingularInertia(NumericalError):
    """Generalized inertia matrix not invertible (defensive)."""
