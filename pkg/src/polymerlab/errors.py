class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class UsageError(ValueError):
    """Call that violates a structural precondition (wrong boundary, bad window...)."""
