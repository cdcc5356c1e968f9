"""Exception hierarchy for platelab.

Every error raised on purpose by the library derives from ``PlateLabError``.
The CLI maps the four families below onto its exit codes.
"""


class PlateLabError(Exception):
    """Base class for all platelab errors."""


class ConfigError(PlateLabError):
    """Malformed or inconsistent user configuration."""


class MeshError(PlateLabError):
    """Geometry or mesh related failure."""


class SolveError(PlateLabError):
    """Numerical failure in a linear or eigen solve."""


class PreconditionError(PlateLabError):
    """Input data violates a mathematical hypothesis of the model."""


# tensors
class ConvexityViolation(PreconditionError):
    pass


class NonPositiveLeadingCoefficient(PreconditionError):
    pass


# geometry
class MeshFailure(MeshError):
    pass


class UnknownTag(MeshError):
    pass


class EmptyCurve(MeshError):
    pass


# fem
class TagMismatch(MeshError):
    pass


class CompatibilityViolation(PreconditionError):
    pass


class SolveFailure(SolveError):
    pass


class KindMismatch(PreconditionError):
    pass


# functionals
class OpenCurve(PreconditionError):
    pass


class DegenerateArc(PreconditionError):
    pass


# estimates
class ZeroReferenceWork(PreconditionError):
    pass


class EigensolveFailure(SolveError):
    pass


# ucprobe
class RadiusOrder(PreconditionError):
    pass


class DomainEscape(PreconditionError):
    pass


class EmptyGrid(PreconditionError):
    pass


class TrivialData(PreconditionError):
    """Boundary couple field is identically zero (no measurement signal)."""


class SupportViolation(PreconditionError):
    pass


class IoFailure(ConfigError):
    """Output location cannot be written."""
