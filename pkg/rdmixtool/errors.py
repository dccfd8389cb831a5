# coding=utf-8

"""Exceptions raised by rdmixtool, and the debug printer. Every exception knows which module
raised it and which exit code the command line tool should return for it."""
import sys
from typing import Optional

import rdmixtool


def debug_log(*args, **kwargs) -> None:
    """
    Wrapper around print that prints to stderr, and is silenced if DEBUG_MODE is not True.
    :param args: positional args for print
    :param kwargs: keyword args for print
    """
    if rdmixtool.DEBUG_MODE:
        kwargs['file'] = sys.stderr
        print(*args, **kwargs)


def warn(*args) -> None:
    """Prints a warning to stderr regardless of DEBUG_MODE."""
    print('Warning:', *args, file=sys.stderr)


class RdMixError(Exception):
    """Base class. Carries the name of the module it originated from."""
    exit_code: int = 1

    def __init__(self, message: str, module: str = 'rdmixtool') -> None:
        super().__init__(message)
        self.module = module

    def as_dict(self) -> dict:
        """Machine readable form, as written to stderr by the command line tool."""
        return {'error': type(self).__name__, 'module': self.module, 'message': str(self)}


class ConfigError(RdMixError):
    """The run configuration is not usable."""
    exit_code = 2

    def __init__(self, message: str, module: str = 'cli') -> None:
        super().__init__(message, module)


class DataError(RdMixError):
    """The input data violates the preconditions of an operation."""
    exit_code = 3

    def __init__(self, message: str, module: str = 'data_model') -> None:
        super().__init__(message, module)


class SchemaError(DataError):
    """A mapped column is missing from the input file."""


class EmptyDatasetError(DataError):
    """Nothing survived ingestion, or a required group is empty."""


class NumericError(RdMixError):
    """A factorization or another numerical step failed beyond recovery."""
    exit_code = 4

    def __init__(self, message: str, module: str = 'stat_kernels',
                 condition_number: Optional[float] = None) -> None:
        super().__init__(message, module)
        self.condition_number = condition_number

    def as_dict(self) -> dict:
        result = super().as_dict()
        if self.condition_number is not None:
            result['condition number'] = self.condition_number
        return result


class DomainError(RdMixError, ValueError):
    """An argument is outside the domain of a function."""
    exit_code = 4

    def __init__(self, message: str, module: str = 'stat_kernels') -> None:
        super().__init__(message, module)
