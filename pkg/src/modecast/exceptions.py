"""Exception hierarchy shared by all modecast modules.

Two broad families matter to callers: problems with user-supplied data or
parameters (``InputError``) and failures that occur while computing
(``ComputationError``).  The CLI maps them to distinct exit codes.
"""


class ModecastError(Exception):
    """Base class for all errors raised by this package."""


class InputError(ModecastError):
    """Invalid input data or parameters supplied by the caller."""


class CsvFormatError(InputError):
    """A CSV file violates the expected format.

    Carries the 1-based line number of the offending row when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateInputError(InputError):
    """Input is structurally valid but degenerate (constant series, zero range)."""


class SeriesTooShortError(InputError):
    """The series has too few samples for the requested operation."""


class MonotoneInputError(ModecastError):
    """Signal raised when a sequence has no interior extrema to sift.

    Callers in the decomposition loop treat the offending sequence as the
    final residual rather than as a failure.
    """


class ComputationError(ModecastError):
    """A numerical procedure failed to complete."""


class ConvergenceError(ComputationError):
    """An iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message: str, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")
