"""Exception types shared across the package."""


class PotsimError(Exception):
    """Base class for all package specific errors."""


class ParameterError(PotsimError, ValueError):
    """A numeric argument is outside its allowed domain."""


class ConfigError(PotsimError, ValueError):
    """An object or file describing a run is inconsistent or incomplete."""


class DegenerateFilterError(PotsimError, ArithmeticError):
    """Orthogonalization hit a near-zero divisor and cannot proceed."""


class PolicyUnavailableError(PotsimError, LookupError):
    """A trained policy has no entry for the requested aggressor count."""


class MissingArtifactError(PotsimError, FileNotFoundError):
    """A required artifact file (for example a Q-table) does not exist."""
