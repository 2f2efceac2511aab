"""Semantic exception hierarchy shared by all cspgap modules."""


class CspGapError(Exception):
    """Base class for all errors raised by this package."""


class InvalidRequestError(CspGapError):
    """Arguments violate an operation's precondition (bad arity, repeated
    coordinates, out-of-regime parameters, ...)."""


class CapacityError(CspGapError):
    """The request exceeds a configured desk-scale ceiling (dense transform
    size, brute-force variable count, ...)."""


class DegenerateProfileError(CspGapError):
    """The bias triple makes the disguise system singular (rho1 == rho3)."""


class InfeasibleBiasError(CspGapError):
    """The disguise system is solvable but some weight is <= 0.

    ``failed_conditions`` lists which positivity condition was violated,
    e.g. ``"rho2*rho3 > 1/4"``.
    """

    def __init__(self, message, failed_conditions=()):
        super().__init__(message)
        self.failed_conditions = tuple(failed_conditions)


class IntegralityError(CspGapError):
    """A slice weight gamma_l * k is not an integer."""


class DisjointnessError(CspGapError):
    """Mixture components do not have pairwise disjoint supports."""


class InvalidDistributionError(CspGapError):
    """An explicit distribution is malformed (probabilities negative or not
    summing to one)."""


class PreconditionError(CspGapError):
    """An operation's semantic precondition does not hold for the input
    (e.g. moments requested for a distribution that is not balanced
    pairwise independent)."""


class MalformedInstanceError(CspGapError):
    """A CSP instance violates its structural invariants."""


class IncompleteSubstitutionError(CspGapError):
    """A group substitution is missing values for referenced variables."""
