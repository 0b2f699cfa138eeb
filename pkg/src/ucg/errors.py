"""Exception types shared across the package."""


class UcgError(Exception):
    """Base class for all errors raised by this package."""


class DuplicateEdgeError(UcgError):
    pass


class SelfLoopError(UcgError):
    pass


class SemidirectedCycleError(UcgError):
    pass


class FaMoOverlapError(UcgError):
    pass


class UnknownNodeError(UcgError):
    pass


class NotAComponentError(UcgError):
    pass


class InvalidQueryError(UcgError):
    pass


class NodeSetMismatchError(UcgError):
    pass


class GraphTooLargeError(UcgError):
    pass


class SingularMatrixError(UcgError):
    pass


class MarkovViolationError(UcgError):
    pass


class RejectionLimitError(UcgError):
    pass


class SingularSampleCovarianceError(UcgError):
    pass


class SingularSystemError(UcgError):
    pass


class GraphMismatchError(UcgError):
    pass


class OverlappingTargetsError(UcgError):
    pass


class NonInterferingUnsupportedError(UcgError):
    pass
