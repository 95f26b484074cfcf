"""Exception types shared across the package.

Each maps onto one CLI exit code (see ``paradisc.cli``).
"""


class ParadiscError(Exception):
    exit_code = 1


class DimensionError(ParadiscError, ValueError):
    """Operand shapes do not conform."""


class ConfigError(ParadiscError, ValueError):
    exit_code = 1


class DataError(ParadiscError, ValueError):
    exit_code = 2


class ParseError(DataError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class TrainingError(ParadiscError, RuntimeError):
    exit_code = 3


class VerificationError(ParadiscError, AssertionError):
    exit_code = 3

    def __init__(self, message, offenders=()):
        self.offenders = list(offenders)
        super().__init__(message)
