"""Exception types raised across the package, grouped by the stage that raises them."""


class GlyphmorphError(Exception):
    """Base class for all errors raised by this package."""


# --- IDX container I/O ---

class BadMagic(GlyphmorphError):
    """Stream does not start with the expected magic number."""


class Truncated(GlyphmorphError):
    """Stream ends before the payload promised by the header."""


class Oversized(GlyphmorphError):
    """Stream carries trailing bytes beyond the declared payload."""


class DimensionMismatch(GlyphmorphError):
    """Images in one dataset do not share a single (height, width)."""


# --- raster kernels ---

class NonDivisibleDimensions(GlyphmorphError):
    """Image dimensions are not divisible by the requested downscale factor."""


class FlatImage(GlyphmorphError):
    """Image has zero intensity range, so no threshold exists."""


class NoBackground(GlyphmorphError):
    """Binary image has no background pixel, so distances are undefined."""


class EmptyForeground(GlyphmorphError):
    """Binary image has no foreground pixel."""


# --- measurement ---

class EmptySkeleton(GlyphmorphError):
    """Skeleton has no pixels, so skeleton-based attributes are undefined."""


class ZeroMass(GlyphmorphError):
    """Image has zero total intensity."""


class DegenerateRow(GlyphmorphError):
    """All image mass lies on a single row; slant is undefined."""


class MeasurementError(GlyphmorphError):
    """A shape attribute could not be measured; names the failing attribute."""

    def __init__(self, attribute: str, cause: Exception):
        super().__init__(f"{attribute}: {type(cause).__name__}: {cause}")
        self.attribute = attribute
        self.cause = cause


# --- perturbations ---

class EmptyResult(GlyphmorphError):
    """A perturbation erased the whole glyph."""


class NoCandidateSites(GlyphmorphError):
    """No skeleton pixel is far enough from every tip and fork."""


# --- statistics ---

class TooFewSamples(GlyphmorphError):
    """Not enough rows for the requested statistic."""


class DegenerateColumn(GlyphmorphError):
    """A column has zero variance where nonzero variance is required."""


class SingularCovariance(GlyphmorphError):
    """Joint sample covariance is (near-)singular; names collinear columns."""


class DegenerateAttribute(GlyphmorphError):
    """An attribute has zero entropy after discretisation."""
