"""Exception types raised across the package."""


class LdgError(Exception):
    """Base class for all package errors."""


class NotInS0(LdgError):
    pass


class NotUnit(LdgError):
    pass


class NotOnSphere(LdgError):
    pass


class NotTangent(LdgError):
    pass


class IsotropicPoint(LdgError):
    pass


class BadParams(LdgError):
    pass


class ResolutionTooCoarse(LdgError):
    pass


class DomainInvalid(LdgError):
    pass


class GridMismatch(LdgError):
    pass


class DomainMismatch(LdgError):
    pass


class BallEscapesDomain(LdgError):
    pass


class LineSearchStalled(LdgError):
    pass


class NoConvergence(LdgError):
    pass


class SingularIntegrand(LdgError):
    pass


class EmptyLevelSet(LdgError):
    pass


class EigenvalueGapTooSmall(LdgError):
    pass


class LiftingObstructed(LdgError):
    pass


class DegreeUnresolved(LdgError):
    pass


class ConfigInvalid(LdgError):
    pass
