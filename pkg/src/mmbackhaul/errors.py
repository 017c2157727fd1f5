class BackhaulError(Exception):
    """Base class for all package errors."""


class ConfigError(BackhaulError, ValueError):
    """Invalid scenario or generator configuration; names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class MalformedTopologyError(BackhaulError, ValueError):
    pass


class InfeasibleError(BackhaulError):
    """No integer slot assignment exists even with every active link at one slot."""


class InconsistentInputError(BackhaulError, ValueError):
    pass


class OracleOverflowError(BackhaulError):
    pass


class PlacementError(BackhaulError):
    pass


class UndefinedFairnessError(BackhaulError, ValueError):
    pass
