"""Exception hierarchy shared by all tsa modules."""


class TsaError(Exception):
    """Base class for domain errors raised by tsa."""


# netmodel
class UnknownRegion(TsaError):
    pass


class MalformedGazetteer(TsaError):
    pass


class ParseError(TsaError):
    pass


class EmptyNetwork(TsaError):
    pass


class InvalidNetwork(TsaError):
    pass


# demand
class InvalidSpec(TsaError):
    pass


class TooFewAois(TsaError):
    pass


class Unreachable(TsaError):
    pass


class InconsistentCounts(TsaError):
    pass


# engine
class UnknownJunction(TsaError):
    pass


class ControllerFailure(TsaError):
    """Raised when a controller errors mid-run; ``trace`` holds the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NoHospital(TsaError):
    pass


# policies
class EndpointUnreachable(TsaError):
    pass


# metrics
class EmptyTrace(TsaError):
    pass


class DegenerateBoard(TsaError):
    pass


# context
class UnknownSession(TsaError):
    pass


class SchemaMismatch(TsaError):
    pass


class ContextLimitExceeded(TsaError):
    pass


# orchestrator
class UnintelligibleInstruction(TsaError):
    pass


class PlanFailure(TsaError):
    """A plan branch failed after its reflection retry; ``result`` keeps partial output."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
