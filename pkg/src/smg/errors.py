"""Exception hierarchy shared by every part of the package."""


class SmgError(Exception):
    """Base class for all package errors."""


class ContractError(SmgError, ValueError):
    """A caller violated an operation's precondition."""


class DimensionError(ContractError):
    """Tensor shapes are incompatible for the requested operation."""


class DatasetError(SmgError):
    """A dataset directory is missing files or contains malformed lines."""


class ConfigError(SmgError, ValueError):
    """A training or model configuration is invalid."""


class TrainingError(SmgError):
    """Training produced non-finite values and was aborted."""


class ConstraintError(SmgError):
    """A model violates the structural constraints the equivalence checks rely on."""
