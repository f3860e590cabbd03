"""Exception types raised across the package.

Every error that callers are expected to catch has its own class; the
shared base makes "anything went wrong in this library" a single except
clause.
"""


class ConsensusRhcError(Exception):
    """Base class for all errors raised by this package."""


# ---------------------------------------------------------------- linalg
class NonSquareError(ConsensusRhcError):
    pass


class DimensionError(ConsensusRhcError):
    pass


class ConvergenceError(ConsensusRhcError):
    """An iterative kernel hit its iteration cap without converging."""


class IndexTooHighError(ConsensusRhcError):
    """Group inverse requested for a matrix with rank(m) != rank(m^2)."""


class SingularCoreError(ConsensusRhcError):
    """The core factor G @ F of the group-inverse factorization is singular."""


class DivergedError(ConsensusRhcError):
    """A matrix series or fixed-point iteration diverged."""


# ---------------------------------------------------------------- graphs
class SelfLoopError(ConsensusRhcError):
    pass


class NonBinaryWeightError(ConsensusRhcError):
    pass


# ---------------------------------------------------------------- design
class NotSemistableError(ConsensusRhcError):
    pass


class NotSemiObservableError(ConsensusRhcError):
    pass


class NotObservableError(ConsensusRhcError):
    pass


class NoUnstableEigenvalueError(ConsensusRhcError):
    pass


class GeneralBUnsupportedError(ConsensusRhcError):
    """No closed form for the critical ratio: B is neither square invertible
    nor rank one.  Supply delta explicitly."""


class InfeasibleCouplingError(ConsensusRhcError):
    """The admissible coupling interval [delta/sigma_min, 1/sigma_max] is empty."""


class ConditionViolatedError(ConsensusRhcError):
    """One of the numbered protocol design conditions failed.

    ``condition`` is the 1-based index of the violated condition; 0 marks a
    standing assumption (controllability, spanning tree, input rank).
    """

    def __init__(self, condition: int, message: str):
        self.condition = condition
        super().__init__(f"design condition {condition} violated: {message}"
                         if condition else f"design assumption violated: {message}")


class RankDeficientQ2Error(ConditionViolatedError):
    def __init__(self, message: str):
        super().__init__(1, message)


# ---------------------------------------------------------------- solver
class InfeasibleError(ConsensusRhcError):
    """The constraint set of a condensed problem is (certified) empty."""


class NumericalFailureError(ConsensusRhcError):
    pass


# ------------------------------------------------------------ rhc engine
class RowOutsideRangeError(ConsensusRhcError):
    """A gain row is not in range(Sg); the terminal set cannot bound it."""


class DegenerateBoxError(ConsensusRhcError):
    pass


class ModeUnsupportedError(ConsensusRhcError):
    """Distributed operation requested for a design that does not split."""


class AgentInfeasibleError(InfeasibleError):
    def __init__(self, agent: int, message: str = ""):
        self.agent = agent
        super().__init__(f"agent {agent} subproblem infeasible{': ' + message if message else ''}")


# -------------------------------------------------------------- cli / io
class SchemaError(ConsensusRhcError):
    """Configuration document failed validation.  ``path`` is a JSON pointer."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class MalformedDesignError(ConsensusRhcError):
    pass
