"""Exception types shared across the package."""


class CityGwrError(Exception):
    """Base class for all package errors."""


class ConfigError(CityGwrError, ValueError):
    """Invalid hyperparameters or pipeline configuration."""


class InputError(CityGwrError, ValueError):
    """Malformed input to a network or transform (e.g. dimension mismatch)."""


class PersistenceError(CityGwrError, RuntimeError):
    """Snapshot or checkpoint could not be read or written."""


class PipelineOrderError(CityGwrError, RuntimeError):
    """Pipeline stages were invoked out of their required order."""


class DegeneratePartitionError(CityGwrError, ValueError):
    """Voronoi generators coincide; no valid partition exists."""


class ExportError(CityGwrError, RuntimeError):
    """An exporter was asked to render inconsistent state."""
