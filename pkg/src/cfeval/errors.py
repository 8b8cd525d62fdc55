"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class CFEvalError(Exception):
    exit_code = 1


class ConfigError(CFEvalError, ValueError):
    exit_code = 1


class DataError(CFEvalError, ValueError):
    exit_code = 2


class NumericalError(CFEvalError, ArithmeticError):
    exit_code = 3
