"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ValidationError -> 1, ParseError -> 2,
ConvergenceError -> 3. Plain OSError is treated like ParseError (I/O).
"""


class ValidationError(ValueError):
    """Input parsed fine but violates a contract (bad id, bad range, bad combination)."""


class ParseError(ValueError):
    """Input could not be decoded (malformed file, truncated stream, bad header)."""


class ConvergenceError(RuntimeError):
    """An iterative numerical routine failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
