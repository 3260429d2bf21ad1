"""Exception hierarchy shared by the library and the CLI."""


class ErpsError(Exception):
    """Base class for all library errors."""


class InvalidStateError(ErpsError):
    pass


class NodeProximityError(ErpsError):
    """Density underflowed at a sampled position; the point should be redrawn."""


class PersistentNodeError(ErpsError):
    """Redraws kept landing on density nodes after the retry budget."""


class UnknownGateError(ErpsError):
    pass


class PolynomialBlowupError(ErpsError):
    """An intermediate polynomial exceeded the configured term budget."""


class InadmissibleObservableError(ErpsError):
    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = list(offending)


class NonFiniteSampleError(ErpsError):
    pass


class OracleDimensionError(ErpsError):
    pass


class TruncationInsufficientError(ErpsError):
    pass


class OracleUnsupportedError(ErpsError):
    """The state has no number-basis representation available to the oracle."""


class ConfigError(ErpsError):
    pass
