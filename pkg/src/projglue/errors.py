"""Exception hierarchy shared by every module."""

from __future__ import annotations


class GeometryError(ValueError):
    """Base class for all geometric precondition failures."""


class BadParameter(GeometryError):
    pass


class CollinearityViolation(GeometryError):
    pass


class DegenerateQuadruple(GeometryError):
    pass


class OutsideDomain(GeometryError):
    pass


class NotInClosure(GeometryError):
    pass


class NotOnBoundary(GeometryError):
    pass


class EmptyInput(GeometryError):
    pass


class NotProperlyConvex(GeometryError):
    pass


# tubes
class TrivialAngle(GeometryError):
    pass


class NotUniformisable(GeometryError):
    pass


class NotSpecial(GeometryError):
    pass


class NormalFormFailure(GeometryError):
    pass


class NotInFixator(GeometryError):
    pass


# blocks
class OffHyperboloid(GeometryError):
    pass


class SubcriticalTrace(GeometryError):
    def __init__(self, message: str, margin: float):
        super().__init__(message)
        self.margin = margin


class NotLorentz(GeometryError):
    pass


class OutsidePolytope(GeometryError):
    pass


class Infeasible(GeometryError):
    pass


class NotRealizable(GeometryError):
    pass


# gluekit
class SceneError(GeometryError):
    """Malformed or inconsistent scene description."""


class WallMismatch(GeometryError):
    def __init__(self, message: str, edge: object = None):
        super().__init__(message)
        self.edge = edge


class BadMeridian(GeometryError):
    pass


class NotCertified(GeometryError):
    pass


class FanDirection(GeometryError):
    """A tile ray that keeps turning around one corner was given where a telescope was expected."""


# arith
class UnsupportedField(GeometryError):
    pass


class DegenerateConfiguration(GeometryError):
    pass


class BadConcatenation(GeometryError):
    pass
