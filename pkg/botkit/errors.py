"""This module implements the exception hierarchy shared by every botkit package."""

class BotkitError(Exception):
    """Root of every error raised by botkit."""

class DimensionError(BotkitError, ValueError):
    """Operand dimensions do not line up."""

class ShapeError(BotkitError, ValueError):
    """An output extent would be empty or negative, or an extent is invalid."""

class UnsupportedShapeError(BotkitError, ValueError):
    """The op does not handle this shape (e.g. odd extents for 2x2 average pooling)."""

class ParameterError(BotkitError, ValueError):
    """A parameter tensor has the wrong length or dtype."""

class ConfigurationError(BotkitError, ValueError):
    """An architecture, block or attention configuration is invalid."""

class ResolutionError(ConfigurationError):
    """A featuremap does not match the resolution the position tables were built for."""
    def __init__(self, expected: tuple, actual: tuple):
        """Build the message from both resolutions.

        Args:
            expected:
                (H, W) the position encodings were sized for.

            actual:
                (H, W) of the featuremap or input that was supplied.
        """
        super().__init__(
            f'featuremap {actual[0]}x{actual[1]} does not match {expected[0]}x{expected[1]}: '
            'position-encoding resolution dependency, the model can only run at the '
            'resolution its position tables were built for'
        )
        self.expected = tuple(expected)
        self.actual = tuple(actual)

class SerializationError(BotkitError, ValueError):
    """A tensor file, parameter bundle or JSON document is malformed."""

class UnsupportedOpError(BotkitError):
    """A recorded op has no registered vector-Jacobian product."""

class GradCheckError(BotkitError):
    """The forward value turned non-finite while checking gradients."""
