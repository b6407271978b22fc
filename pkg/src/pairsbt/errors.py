"""Exception hierarchy shared across the package.

Every failure mode raised by the library derives from PairsbtError so the
CLI can map classes of failure to distinct exit codes.
"""


class PairsbtError(Exception):
    """Base class for all package errors."""


class ConfigError(PairsbtError):
    """Invalid run configuration (bad flag value, malformed config file)."""


# --- market data ----------------------------------------------------------

class DataError(PairsbtError):
    """Base class for input-data problems."""


class MissingFile(DataError):
    pass


class MalformedRow(DataError):
    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DuplicateObservation(DataError):
    pass


class NonPositivePrice(DataError):
    pass


class EmptyUniverse(DataError):
    pass


class MissingBasePrice(DataError):
    pass


# --- pair selection / statistics ------------------------------------------

class LengthMismatch(PairsbtError):
    pass


class TooShort(PairsbtError):
    pass


class TooFewTickers(PairsbtError):
    pass


class DegenerateRegressor(PairsbtError):
    pass


class NumericalSingularity(PairsbtError):
    pass


class ConstantSeries(PairsbtError):
    pass


class InsufficientLength(PairsbtError):
    pass


# --- trade simulation ------------------------------------------------------

class MissingHedgeRatio(PairsbtError):
    pass


class DegenerateSpread(PairsbtError):
    pass


class EmptyTradingWindow(PairsbtError):
    pass


class IndexMismatch(PairsbtError):
    pass


# --- metrics / sweeps ------------------------------------------------------

class BenchmarkCoverageGap(PairsbtError):
    pass


class RangeTooShort(PairsbtError):
    pass


class TooFewResults(PairsbtError):
    pass
