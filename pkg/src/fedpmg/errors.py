"""Exception types shared across the package."""


class FedPMGError(Exception):
    """Base class for all package errors."""


class InvalidInput(FedPMGError, ValueError):
    pass


class ShapeError(FedPMGError, ValueError):
    pass


class MissingModalityError(FedPMGError):
    pass


class AggregationError(FedPMGError):
    pass


class FormatError(FedPMGError):
    pass


class ConfigError(FedPMGError, ValueError):
    pass
