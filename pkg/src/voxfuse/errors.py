"""Exception types shared across the engine."""


class VoxfuseError(Exception):
    """Base class for engine errors."""


class BudgetError(VoxfuseError):
    """Requested volume exceeds the configured memory budget."""


class FormatError(VoxfuseError):
    """A binary or JSON artifact violates its on-disk format."""


class StoreError(VoxfuseError):
    """Scene store is missing, corrupt, or refused an operation."""
