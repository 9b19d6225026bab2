"""Failure classes shared across the package.

Numerical failures (singular solves, integration blow-ups) are kept apart
from infeasibility (a target outside what the actuation can reach) because
callers handle them differently: the first group means "the computation
broke", the second means "the request cannot be satisfied".
"""


class NumericsError(Exception):
    """Base class for numerical failures."""


class SingularSystem(NumericsError):
    """A linear system that must be inverted is numerically singular.

    Carries the reciprocal condition estimate that triggered the failure.
    """

    def __init__(self, message: str, rcond: float = 0.0):
        super().__init__(message)
        self.rcond = rcond


class RankDeficient(NumericsError):
    """A matrix required to have full row rank does not."""


class IntegrationBudgetExceeded(NumericsError):
    """The step budget of an adaptive integration ran out."""


class Divergence(NumericsError):
    """An integrated trajectory left the admissible region (|x_i| > 1e12)."""


class TargetOffChart(Exception):
    """Requested target does not lie on the reachable-set chart."""

    def __init__(self, message: str, residual: float = 0.0):
        super().__init__(message)
        self.residual = residual
