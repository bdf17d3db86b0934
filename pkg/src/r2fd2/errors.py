"""Exception types raised by the pipeline."""


class R2FD2Error(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(R2FD2Error, ValueError):
    """Invalid parameter values or mismatched array shapes."""


class ImageFormatError(R2FD2Error, ValueError):
    """Raster with an unsupported bit depth, channel count or non-finite data."""


class InvalidTransformError(R2FD2Error, ValueError):
    """Singular or non-finite projective transform."""


class EstimationError(R2FD2Error):
    """Degenerate point configuration during model estimation."""
