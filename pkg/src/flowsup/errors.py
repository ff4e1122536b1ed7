"""Exception hierarchy shared across the library and mapped to CLI exit codes."""


class FlowsupError(Exception):
    """Base class for all library errors."""


class ParameterError(FlowsupError):
    """Invalid parameter or configuration value (CLI exit code 2)."""


class ConfigError(ParameterError):
    """Malformed or inconsistent run configuration."""


class PlacementError(ParameterError):
    """Occluders could not be placed without overlap."""


class DimensionError(FlowsupError):
    """Operands have incompatible shapes."""


class FormatError(FlowsupError):
    """Corrupt or unsupported file content (CLI exit code 3)."""


class UndefinedMetricError(FlowsupError):
    """Metric requested over an empty pixel set."""
