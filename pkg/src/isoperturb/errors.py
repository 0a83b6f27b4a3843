"""Exception types shared across the package.

Every failure mode that callers are expected to branch on gets its own
class so that the CLI can map families of errors to stable exit codes.
"""

__all__ = [
    "IsoperturbError",
    "NegativeInput",
    "NonFinite",
    "PositiveOverflow",
    "CapExceeded",
    "HalvingViolated",
    "EpsVanishes",
    "OutOfRange",
    "DimensionMismatch",
    "InversionDiverged",
    "BudgetExceeded",
    "ModulusMismatch",
    "HypothesisFailed",
    "CardinalityMismatch",
    "IndexOutOfRange",
    "MissingTableEntry",
    "MTooLarge",
    "RecoveryFailed",
    "NotSingleValued",
    "NotBijective",
    "ConditionIIViolated",
    "EmptyForBothSigns",
    "ConfigError",
]


class IsoperturbError(Exception):
    """Base class for all package errors."""


class NegativeInput(IsoperturbError, ValueError):
    """A perturbation function was evaluated at t < 0."""


class NonFinite(IsoperturbError, ValueError):
    """NaN or infinity where a finite number is required."""


class PositiveOverflow(IsoperturbError, OverflowError):
    """An intermediate value crossed the overflow ceiling."""


class CapExceeded(IsoperturbError):
    """An iterated composition would need more steps than the cap allows."""


class HalvingViolated(IsoperturbError):
    """phi(t)/2 <= phi(t/2) failed somewhere on the check grid."""


class EpsVanishes(IsoperturbError):
    """phi(x) - x is not strictly positive on the integration range."""


class OutOfRange(IsoperturbError, ValueError):
    """A parameter sits outside the domain an operation supports."""


class DimensionMismatch(IsoperturbError, ValueError):
    """Operands disagree on dimension."""


class InversionDiverged(IsoperturbError):
    """Fixed point refinement did not reach tolerance within the step cap."""


class BudgetExceeded(IsoperturbError):
    """A brute force sweep would exceed its pair evaluation budget."""


class ModulusMismatch(IsoperturbError):
    """The supplied perturbation function does not dominate the map's claimed modulus."""


class HypothesisFailed(IsoperturbError):
    """The empirical modulus at the separation scale is too large for repair."""


class CardinalityMismatch(IsoperturbError, ValueError):
    """Finite samples whose sizes must agree do not."""


class IndexOutOfRange(IsoperturbError, IndexError):
    """Coordinate index outside the operator's domain."""


class MissingTableEntry(IsoperturbError, KeyError):
    """A tabulated operator was queried at an input it has no row for."""


class MTooLarge(IsoperturbError):
    """Claimed expansion constant at or beyond the recovery threshold."""


class RecoveryFailed(IsoperturbError):
    """Base class for isometry recovery failures after escalation."""


class NotSingleValued(RecoveryFailed):
    """Some candidate set still has more than one element."""


class NotBijective(RecoveryFailed):
    """Candidate assignment is single valued but not a bijection."""


class ConditionIIViolated(RecoveryFailed):
    """The algebraic separation margin is not positive."""


class EmptyForBothSigns(IsoperturbError):
    """Neither sign produced a non-empty candidate set."""


class ConfigError(IsoperturbError):
    """Bad or inconsistent run configuration."""
