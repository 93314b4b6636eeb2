"""Exception types shared across the package.

Every error raised on a documented failure path derives from FeatregError so
callers (and the CLI) can distinguish expected failures from bugs.
"""


class FeatregError(Exception):
    """Base class for all errors raised by this package."""


class DataError(FeatregError):
    """Base for malformed or missing input data (CLI exit code 2)."""


# --- geometry ---------------------------------------------------------------

class DegeneratePoint(FeatregError):
    """Point maps to infinity under a projective transform."""


class DegenerateConfiguration(FeatregError):
    """Point configuration too degenerate to fit a homography."""


class InsufficientData(FeatregError):
    """Fewer correspondences than the estimator's minimum."""


class NoConsensus(FeatregError):
    """RANSAC found no model with enough inliers."""


# --- parsing / files ---------------------------------------------------------

class ParseError(DataError):
    """Malformed text or binary payload."""


class UnsupportedFormat(DataError):
    """Input format not handled by this decoder."""


class TruncatedData(DataError):
    """Payload shorter than its header promises."""


class MissingFile(DataError):
    """A required dataset file is absent."""


class IoError(DataError):
    """Failure writing an output artifact."""


# --- imaging / detector ------------------------------------------------------

class TooSmall(FeatregError):
    """Image below the minimum size for the operation."""


class OutOfBounds(FeatregError):
    """Sampling window crosses the image border."""


# --- CNN engine ---------------------------------------------------------------

class ShapeMismatch(FeatregError):
    """Layer shapes do not chain; message names the offending layer."""


class WeightSizeMismatch(DataError):
    """Weights blob length disagrees with the network config."""


# --- distances ----------------------------------------------------------------

class LengthMismatch(FeatregError):
    """Vectors of different lengths."""


class DimMismatch(FeatregError):
    """Descriptor sets of different dimensionality."""


class ZeroVector(FeatregError):
    """Zero-norm vector where cosine distance is undefined."""


class ConstantVector(FeatregError):
    """Zero-variance vector where correlation is undefined."""


class BadOrder(FeatregError):
    """Minkowski order r must be finite and > 0."""


# --- matcher -------------------------------------------------------------------

class TooFewColumns(FeatregError):
    """Ratio matching needs at least two candidate columns."""


# --- evaluation ------------------------------------------------------------------

class IndexOutOfRange(FeatregError):
    """Match references a keypoint index that does not exist."""


# --- harness -----------------------------------------------------------------------

class ConfigError(FeatregError):
    """Invalid benchmark run configuration (CLI exit code 1)."""
