"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end.
"""


class PiezoStabError(Exception):
    exit_code = 1


class InvalidParameters(PiezoStabError, ValueError):
    exit_code = 2


class ConfigError(PiezoStabError, ValueError):
    exit_code = 3

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DecoupledGamma(PiezoStabError, ValueError):
    exit_code = 4


class WrongVariant(PiezoStabError, ValueError):
    exit_code = 5


class NotResonant(PiezoStabError):
    exit_code = 6


class NotCoprime(PiezoStabError, ValueError):
    exit_code = 7


class PrecisionExhausted(PiezoStabError, ArithmeticError):
    exit_code = 8


class UnknownConstant(PiezoStabError, KeyError):
    exit_code = 9

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class DimensionMismatch(PiezoStabError, ValueError):
    exit_code = 10


class MeshError(PiezoStabError, ValueError):
    exit_code = 11


class DegenerateTrace(PiezoStabError, ValueError):
    exit_code = 12


class SingularSolve(PiezoStabError, ArithmeticError):
    exit_code = 13


class TooLarge(PiezoStabError, ValueError):
    exit_code = 14
