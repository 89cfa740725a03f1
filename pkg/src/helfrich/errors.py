"""Exception types raised by the library.

Numerical failures derive from :class:`NumericalError` so the CLI can map
them to a distinct exit code.
"""


class HelfrichError(Exception):
    """Base class for all library errors."""


class MeshError(HelfrichError, ValueError):
    """Invalid mesh topology or geometry."""


class NonManifoldEdge(MeshError):
    pass


class InconsistentOrientation(MeshError):
    pass


class DegenerateFace(MeshError):
    pass


class NonPositiveScale(HelfrichError, ValueError):
    pass


class NumericalError(HelfrichError, ArithmeticError):
    """A computation did not reach its accuracy target."""


class NumericalDegeneracy(NumericalError):
    pass


class NonConvergent(NumericalError):
    pass


class ProjectionDiverged(NumericalError):
    pass


class MonitorAlarm(HelfrichError):
    """Raised (or recorded) when the embeddedness monitor fires during a flow."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class RhoBelowResolution(HelfrichError, ValueError):
    pass


class MismatchedFieldLength(HelfrichError, ValueError):
    pass


class TolOutOfRange(HelfrichError, ValueError):
    pass


class NegativeVolume(HelfrichError, ValueError):
    pass


class PointOnBoundary(HelfrichError, ValueError):
    pass


class PositiveC0(HelfrichError, ValueError):
    pass


class NonNegativeC0(HelfrichError, ValueError):
    pass


class ZeroEnergy(HelfrichError, ValueError):
    pass


class IsoperimetricViolation(HelfrichError, ValueError):
    pass


class NeckTooLarge(HelfrichError, ValueError):
    pass


class Unreachable(HelfrichError, ValueError):
    pass


class UnknownShape(HelfrichError, ValueError):
    pass


class BadParams(HelfrichError, ValueError):
    pass
