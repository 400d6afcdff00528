"""Exception types shared across the package."""


class DmaceError(Exception):
    """Base class for library errors."""


class ShapeError(DmaceError, ValueError):
    """Operand shapes do not agree."""


class DomainError(DmaceError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class ContractError(DmaceError, ValueError):
    """A caller violated an API precondition (e.g. non-scalar loss)."""


class DegenerateProblemError(DmaceError, ValueError):
    """The problem has no usable step size (e.g. a zero sensing matrix)."""


class ConfigError(DmaceError, ValueError):
    """Invalid or inconsistent configuration."""


class PersistenceError(DmaceError, OSError):
    """Reading or writing a persisted artifact failed."""
