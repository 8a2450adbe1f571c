"""Exception types and CLI exit codes for conformal-density."""

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3


class ConformalDensityError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(ConformalDensityError, ValueError):
    """Bad argument: non-finite point, dimension mismatch, parameter out of range."""


class DataFileError(InvalidInputError):
    """Malformed CSV input. Messages carry 1-based row/column positions."""


class ConfigError(InvalidInputError):
    """Config file failed schema validation or could not be parsed."""


class GridMismatchError(InvalidInputError):
    """Set arithmetic attempted on regions rasterized on different grids."""


class GridCoverageError(InvalidInputError):
    """A quadrature grid does not cover the support it integrates over."""


class NumericalDegeneracyError(ConformalDensityError, ValueError):
    """The computation is well-posed in input terms but numerically degenerate."""


class GridTooSmallError(NumericalDegeneracyError):
    """The oracle region reaches the boundary of its grid."""


class PlateauError(NumericalDegeneracyError):
    """The density has an atom or plateau at the requested cutoff."""


class CoverageWarning(UserWarning):
    """Emitted when an integration grid truncates the estimator's support."""


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code (2 input/config, 3 numerical)."""
    if isinstance(exc, NumericalDegeneracyError):
        return EXIT_DEGENERATE
    if isinstance(exc, (InvalidInputError, FileNotFoundError)):
        return EXIT_INPUT
    return 1
