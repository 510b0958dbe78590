"""Exception hierarchy.

Two families matter to callers: :class:`InputError` (bad data or
configuration, CLI exit code 2) and :class:`NumericalFailure` (a stage
broke down during computation, CLI exit code 3).
"""


class HeatDynError(Exception):
    """Base class for all package errors."""


class InputError(HeatDynError, ValueError):
    pass


class NumericalFailure(HeatDynError, ArithmeticError):
    pass


class DomainError(InputError):
    pass


class ExcludedIndexError(InputError):
    pass


class GridMismatch(InputError):
    pass


class GridTooCoarse(InputError):
    pass


class ValidationError(InputError):
    """Data outside the admissible class, raised unless the caller opts out."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class HypothesisViolation(InputError):
    pass


class AssumptionViolation(InputError):
    """One of the inverse-problem assumptions A1, A2, A3 failed."""

    def __init__(self, tag, message, report=None):
        super().__init__(f"{tag}: {message}")
        self.tag = tag
        self.report = report


class NonpositiveE(AssumptionViolation):
    def __init__(self, message, report=None):
        super().__init__("A2", message, report)


class ParseError(InputError):
    pass


class SchemaError(InputError):
    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class FormatError(InputError):
    def __init__(self, message, line=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class NonMonotoneGrid(InputError):
    pass


class BracketFailure(NumericalFailure):
    pass


class SingularSystem(NumericalFailure):
    pass


class NonpositiveQ(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


class ClosureFailure(NumericalFailure):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
