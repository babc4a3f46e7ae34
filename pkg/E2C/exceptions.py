"""Exceptions raised by the E2C package. The command line maps each family to a stable exit code."""


class E2CException(Exception):
    """Base class of every error raised on purpose by this package"""

    exit_code = 1


class DomainError(E2CException, ValueError):
    """An input is outside the domain of an operation (negative price, empty quote set, bad fraction...)"""

    exit_code = 3


class DataFormatError(E2CException):
    """An input file does not follow the expected layout"""

    exit_code = 2


class PipelineError(E2CException):
    """A pipeline stage cannot run on what the previous stage produced"""

    exit_code = 3


class CompatibilityError(E2CException):
    """A forest file and a dataset (or a reader and a file version) do not fit together"""

    exit_code = 4


class NumericalWarning(RuntimeWarning):
    pass
