"""Exception types shared across the toolkit, mapped to CLI exit codes."""


class ValidationError(ValueError):
    """Bad input or configuration (CLI exit code 2)."""


class FormatError(ValueError):
    """Malformed or inconsistent binary file (CLI exit code 2)."""


class NumericalError(RuntimeError):
    """Numerical failure such as a NaN loss (CLI exit code 4)."""
