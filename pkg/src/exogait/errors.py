"""Exception hierarchy for the gait planning toolchain."""


class ExogaitError(Exception):
    """Base class for all library errors."""


# kinematics
class Unreachable(ExogaitError):
    """IK target lies outside the reachable workspace of the leg."""


class OutOfRange(ExogaitError):
    """A joint solution violates the configured joint limits."""


# learning
class TooFewPoints(ExogaitError):
    """Not enough samples to fit the requested mixture size."""


class DegenerateComponent(ExogaitError):
    """A mixture component collapsed despite covariance flooring."""


# trajectory models
class SingularSystem(ExogaitError):
    """A regularized kernel system could not be factorized."""


class SingularCovariance(ExogaitError):
    """A covariance needed for fusion is not invertible after flooring."""


class DuplicateVia(ExogaitError):
    """Two via-points share the same phase."""


class HeightExceedsLimit(ExogaitError):
    """Requested step height exceeds the mechanical limit."""


# constrained solver
class IndexOutOfRange(ExogaitError):
    """A constraint refers to a phase index outside the database."""


class NotConverged(ExogaitError):
    """The dual QP solver did not reach the required KKT residual."""


class NonConcaveObjective(ExogaitError):
    """Dual quadratic term has a positive eigenvalue; constraint assembly is broken."""


# environment
class NoPlaneFound(ExogaitError):
    """Plane extraction found no plane with enough inliers."""


class AmbiguousTerrain(ExogaitError):
    """Scene mixes sloped and stepped surfaces; no single terrain class fits."""


class NoValidFoothold(ExogaitError):
    """Every candidate foothold window is blocked."""


# planner
class UnreachableConfiguration(Unreachable):
    """A terrain-specific final configuration is not kinematically reachable."""


class ObstacleTooLarge(ExogaitError):
    """Clearing the obstacle would require lifting the foot above the height limit."""


class InvalidBounds(ExogaitError):
    """A lower trajectory bound exceeds the corresponding upper bound."""


class PlanInfeasible(ExogaitError):
    """A generated plan violates its own constraint report; it is not emitted."""


# file formats
class FormatError(ExogaitError):
    """A structured input file does not match its documented format."""
