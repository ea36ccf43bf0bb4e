"""Exception hierarchy shared across the package."""


class WorkbenchError(Exception):
    """Base class for every error raised by llmtime_bench."""


class InvalidArgument(WorkbenchError, ValueError):
    pass


class ConvergenceFailure(WorkbenchError):
    """The optimizer could not improve on its starting point.

    ``best_params`` and ``best_value`` hold the best point seen so far.
    """

    def __init__(self, message, best_params=None, best_value=None):
        super().__init__(message)
        self.best_params = best_params
        self.best_value = best_value


class DecodeFailure(WorkbenchError):
    pass


class TuningFailure(WorkbenchError):
    pass


class ProviderError(WorkbenchError):
    pass


class ProviderUnavailable(ProviderError):
    pass


class RateLimited(ProviderError):
    def __init__(self, message, retry_after=None):
        super().__init__(message)
        self.retry_after = retry_after


class ProtocolError(ProviderError):
    pass


class ForecastFailure(WorkbenchError):
    def __init__(self, message, num_invalid=0):
        super().__init__(message)
        self.num_invalid = num_invalid


class DataError(WorkbenchError):
    pass


class SchemaError(DataError):
    pass


class ConfigError(WorkbenchError):
    pass


class ExperimentFailure(WorkbenchError):
    pass
