"""Exception types shared across the package."""


class MyodynError(Exception):
    """Base class for package-specific failures."""


class ConfigError(MyodynError):
    """Invalid configuration value or malformed config document."""


class RangeError(MyodynError):
    """Input outside its declared validity range."""


class GeometryError(MyodynError):
    """Musculotendon geometry cannot be resolved (fiber would collapse)."""


class DimensionError(MyodynError):
    """Operands have incompatible shapes or lengths."""


class ContractError(MyodynError):
    """An operation was called outside its contract."""


class TrainingError(MyodynError):
    """Training aborted: divergence or non-finite gradients."""


class EvaluationError(MyodynError):
    """Metric is undefined for the given inputs."""
