"""Exception types shared across the package."""


class PoleProximityError(ValueError):
    """Evaluation point lies too close to a pole."""


class ConvergenceError(RuntimeError):
    """A series or iterative refinement did not reach its tolerance."""


class AbelConditionError(ValueError):
    """The divisor pair does not satisfy the Abel condition."""


class DivisorError(ValueError):
    """Divisor supports are degenerate (coincident or overlapping points)."""


class ContourError(RuntimeError):
    """An argument-principle contour could not be placed or resolved."""


class ChartDegeneracyError(RuntimeError):
    """No projective chart keeps a finite-difference stencil finite."""


class RankConditioningError(RuntimeError):
    """Numerical rank is ambiguous: no clear gap in the singular values."""


class StepCollapseError(RuntimeError):
    """Adaptive integration step fell below the minimum step size.

    ``state`` carries the last accepted state so callers can report it.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
