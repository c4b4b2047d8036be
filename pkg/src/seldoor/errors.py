"""Exception types raised across the package."""


class SeldoorError(Exception):
    """Base class for every error raised by seldoor."""


class GraphError(SeldoorError, ValueError):
    pass


class CycleOrOrderViolation(GraphError):
    """A directed edge points against the causal ordering."""


class OrderViolation(CycleOrOrderViolation):
    """A nonlinear vertex does not come after its arguments."""


class DuplicateEdge(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class UnknownVertex(GraphError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class EndpointInConditioningSet(GraphError):
    pass


class OutcomeInSet(GraphError):
    pass


class QueryVertexInZ(GraphError):
    pass


class GraphTooLarge(GraphError):
    """Exhaustive path search refused above the configured vertex cap."""


class ModelError(SeldoorError, ValueError):
    pass


class NotLowerTriangular(ModelError):
    pass


class SigmaNotPD(ModelError):
    pass


class EdgeCoefficientMismatch(ModelError):
    pass


class SingularDesign(ModelError):
    pass


class PDGenerationFailed(ModelError):
    pass


class UnsupportedDistribution(ModelError):
    pass


class PreconditionNotMet(SeldoorError):
    """An analysis was requested outside the hypothesis it is proven under.

    ``witness`` carries the offending path when one exists.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ContractViolation(SeldoorError, AssertionError):
    """A numeric identity that must hold exactly did not."""
