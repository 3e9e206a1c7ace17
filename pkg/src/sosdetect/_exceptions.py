# sosdetect/_exceptions.py
# !/usr/bin/env python3

"""
Exception hierarchy for the sosdetect library.

Every class carries the process exit code the command-line front end uses
when the error reaches it.
"""

from typing import Optional


class SosDetectError(Exception):
    """Base exception for the sosdetect library."""

    exit_code = 1


class ConfigError(SosDetectError, ValueError):
    """Invalid or unknown configuration value."""

    exit_code = 2


class InputFormatError(SosDetectError, ValueError):
    """An input file does not follow its declared format."""

    exit_code = 2


class PpmParseError(InputFormatError):
    """Base class for binary P6 PPM decoding failures."""

    pass


class PpmMagicError(PpmParseError):
    pass


class PpmHeaderError(PpmParseError):
    pass


class PpmMaxvalError(PpmParseError):
    pass


class PpmTruncatedError(PpmParseError):
    pass


class AnnotationFormatError(InputFormatError):
    """A JSON-lines record could not be parsed; names the offending line."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class CheckpointError(InputFormatError):
    """Base class for checkpoint decoding failures."""

    pass


class CheckpointMagicError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class ShapeError(SosDetectError, ValueError):
    """Tensor shapes disagree with what an operation requires."""

    exit_code = 2


class NumericalError(SosDetectError, ArithmeticError):
    """A loss, gradient or activation became non-finite."""

    exit_code = 3


class ImageReadError(SosDetectError, IOError):
    """An image could not be read or decoded."""

    exit_code = 4

    def __init__(self, path: str, reason: str):
        super().__init__(f"Cannot read image '{path}': {reason}")
        self.path = path
