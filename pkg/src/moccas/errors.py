"""Exception types shared across the package."""


class MoccasError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(MoccasError):
    """Operands have incompatible shapes."""


class NotPositiveDefinite(MoccasError):
    """Matrix is not positive definite even after the jitter schedule."""


class AllCandidatesFailed(MoccasError):
    """Every hyperparameter grid element failed to factorize."""


class EmptyReference(MoccasError):
    """A reference set for fill-distance evaluation has no feasible points."""


class EmptyShortlist(MoccasError):
    """Candidate shortlist construction produced no candidates."""


class Exhausted(MoccasError):
    """The candidate pool has no unvisited entries left."""


class PoolTooSmall(MoccasError):
    """The pool has fewer candidates than the requested warm start."""


class DegeneratePool(MoccasError):
    """Pool outcomes are too degenerate to calibrate thresholds."""


class ParseError(MoccasError):
    """A config or CSV file could not be parsed."""


class ValidationError(MoccasError):
    """A config value violates a documented invariant."""


class SchemaError(MoccasError):
    """A CSV header does not match the expected schema."""


class DuplicateId(MoccasError):
    """A pool CSV contains a repeated id."""


class NonNumericCell(MoccasError):
    """A pool CSV cell could not be parsed as a number."""


class CheckFailed(MoccasError):
    """The acquisition consistency check found violations."""
