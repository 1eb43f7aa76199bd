class CalpropException(Exception):
    """
    Exceptions related to estimating treatment effects with calibrated
    propensity scores. Each subclass carries a machine-readable code and
    the process exit code the command line uses for its family.
    """

    code = None
    exit_code = 1

    def __init__(self, *args):
        super().__init__(self.code, *args)


# Configuration family (exit code 2).

class ConfigError(CalpropException):
    code = "config_error"
    exit_code = 2


class ParameterError(ConfigError):
    code = "parameter_error"


# Data family (exit code 3).

class DataError(CalpropException):
    code = "data_error"
    exit_code = 3


class SizingError(DataError):
    code = "sizing_error"


class ShapeError(DataError):
    code = "shape_error"


class InputError(DataError):
    code = "input_error"


class EstimationError(DataError):
    code = "estimation_error"


class ParseError(DataError):
    """
    A malformed row in a CSV document. Row r is file line r + 1, so the
    first row after a header on line 1 is row 1; row 0 stands for the
    header itself.
    """

    code = "parse_error"

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


# Numeric family (exit code 4).

class NumericError(CalpropException):
    code = "numeric_error"
    exit_code = 4


class DomainError(NumericError):
    code = "domain_error"


class FitError(NumericError):
    code = "fit_error"


class InvariantError(NumericError):
    code = "invariant_error"


class OptimizationError(NumericError):
    """
    The objective became non-finite and no step could recover it.
    """

    code = "optimization_error"

    def __init__(self, iteration: int, message: str):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration
