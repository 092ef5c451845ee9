from enum import IntEnum, unique

# Lamb Framework
from lamb.exc import ClientError, ServerError, InvalidParamValueError

__all__ = [
    "AppExceptionCodes",
    "NotExpansiveError",
    "SingularMatrixError",
    "DimensionMismatchError",
    "SeriesDivergenceError",
    "IndexSaturationError",
    "ShapeMismatchError",
    "DegenerateProjectionError",
    "PhaseUnderResolvedError",
    "TailDominantError",
    "GridTooCoarseError",
    "ConfigInvalidError",
    "error_exit_code",
    "error_message",
]


@unique
class AppExceptionCodes(IntEnum):
    # dilation
    NotExpansive = 2001
    SingularMatrix = 2002
    DimensionMismatch = 2003
    SeriesDivergence = 2004
    # quasi norm
    IndexSaturation = 2101
    # mixed norm
    ShapeMismatch = 2201
    # atoms
    DegenerateProjection = 2301
    # fourier
    PhaseUnderResolved = 2401
    # estimates
    TailDominant = 2501
    GridTooCoarse = 2502
    # experiments
    ConfigInvalid = 2601


class NotExpansiveError(InvalidParamValueError):
    """some eigenvalue modulus is not above one"""

    _app_error_code = AppExceptionCodes.NotExpansive
    _status_code = 400
    _message = "Dilation matrix is not expansive"
    _exit_code = 2


class SingularMatrixError(InvalidParamValueError):
    """determinant vanishes"""

    _app_error_code = AppExceptionCodes.SingularMatrix
    _status_code = 400
    _message = "Dilation matrix is singular"
    _exit_code = 2


class DimensionMismatchError(InvalidParamValueError):
    """shapes of matrices, points or exponents disagree"""

    _app_error_code = AppExceptionCodes.DimensionMismatch
    _status_code = 400
    _message = "Dimension mismatch"
    _exit_code = 2


class SeriesDivergenceError(ServerError):
    """ellipsoid series did not reach truncation tolerance"""

    _app_error_code = AppExceptionCodes.SeriesDivergence
    _status_code = 500
    _message = "Ellipsoid series failed to converge"
    _exit_code = 2


class IndexSaturationError(ServerError):
    """ball index left the searchable range"""

    _app_error_code = AppExceptionCodes.IndexSaturation
    _status_code = 500
    _message = "Quasi-norm index outside of search range"
    _exit_code = 2


class ShapeMismatchError(ServerError):
    """grid values do not match grid axes"""

    _app_error_code = AppExceptionCodes.ShapeMismatch
    _status_code = 500
    _message = "Grid shape mismatch"
    _exit_code = 2


class DegenerateProjectionError(ServerError):
    """moment projection removed the whole profile"""

    _app_error_code = AppExceptionCodes.DegenerateProjection
    _status_code = 500
    _message = "Moment projection degenerated"
    _exit_code = 2


class PhaseUnderResolvedError(ServerError):
    """oscillatory quadrature hit its refinement cap"""

    _app_error_code = AppExceptionCodes.PhaseUnderResolved
    _status_code = 500
    _message = "Fourier quadrature phase under-resolved"
    _exit_code = 2


class TailDominantError(ServerError):
    """extrapolated shell tail outweighs the computed shells"""

    _app_error_code = AppExceptionCodes.TailDominant
    _status_code = 500
    _message = "Shell integral tail dominates"
    _exit_code = 2


class GridTooCoarseError(ServerError):
    """convolution kernel is not resolved by the grid"""

    _app_error_code = AppExceptionCodes.GridTooCoarse
    _status_code = 500
    _message = "Grid too coarse for convolution kernel"
    _exit_code = 2


class ConfigInvalidError(ClientError):
    """experiment configuration failed validation"""

    _app_error_code = AppExceptionCodes.ConfigInvalid
    _status_code = 400
    _message = "Invalid experiment configuration"
    _exit_code = 2


def error_exit_code(e: Exception) -> int:
    return getattr(e, "_exit_code", 2)


def error_message(e: Exception) -> str:
    message = getattr(e, "message", None) or str(e) or getattr(e, "_message", None)
    return f"{e.__class__.__name__}: {message}"
