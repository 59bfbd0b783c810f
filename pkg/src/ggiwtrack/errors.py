"""Exception types shared across the package."""


class DomainError(ValueError):
    """An operation was called with inputs outside its mathematical domain."""


class CapacityError(RuntimeError):
    """An enumeration would exceed its configured size cap."""
