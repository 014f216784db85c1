"""Exception hierarchy shared by the library and the CLI."""


class TremorBenchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TremorBenchError):
    pass


class DatasetError(TremorBenchError):
    pass


class PreprocessError(TremorBenchError):
    pass


class ModelError(TremorBenchError):
    pass


class ConvergenceError(ModelError):
    pass


class SelectionError(TremorBenchError):
    pass
