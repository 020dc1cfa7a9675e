"""Exception types raised across the toolkit.

Every operation raises one of these rather than bare ValueError so that
pipeline stages can surface machine-readable failure categories.
"""


class SolarSRError(Exception):
    """Base class for all toolkit errors."""


# --- FITS I/O ---------------------------------------------------------------

class MalformedFile(SolarSRError):
    """File violates FITS block structure (size, END card, first keyword)."""


class UnsupportedBitpix(SolarSRError):
    """BITPIX outside the supported set {8, 16, 32, -32, -64}."""


class NotAnImage(SolarSRError):
    """HDU is not a 2-D image."""


class MissingKeyword(SolarSRError):
    """A required header keyword is absent (strict mode)."""


class HeaderOverflow(SolarSRError):
    """A header card does not fit the 80-character card format."""


# --- registration -----------------------------------------------------------

class InsufficientOverlap(SolarSRError):
    """Images cannot overlap enough at the maximum search shift."""


class DegenerateImage(SolarSRError):
    """Zero variance where a correlation is required; correlation undefined."""


class EmptyValidRegion(SolarSRError):
    """No valid pixels to operate on."""


class TooFewKeypoints(SolarSRError):
    """Feature matching produced fewer matches than required."""


class InsufficientMatches(SolarSRError):
    """Not enough correspondences to constrain a similarity transform."""


class NoConsensus(SolarSRError):
    """RANSAC found no acceptable inlier consensus."""


class ResidualTooLow(SolarSRError):
    """Co-aligned pair correlates below the configured floor."""


# --- numerics / tensors -----------------------------------------------------

class ShapeMismatch(SolarSRError):
    """Operands have incompatible shapes."""


class NonFiniteInput(SolarSRError):
    """An input contains NaN or Inf where finite values are required."""


# --- checkpoints ------------------------------------------------------------

class IncompatibleCheckpoint(SolarSRError):
    """Checkpoint parameters do not match the generator architecture."""


class AlphaOutOfRange(SolarSRError):
    """Blend coefficient outside [0, 1]."""


class BadMagic(SolarSRError):
    """Checkpoint container does not start with the expected magic string."""


class VersionUnsupported(SolarSRError):
    """Checkpoint container version is not readable by this code."""


class CorruptDirectory(SolarSRError):
    """Checkpoint parameter directory points outside the payload."""


# --- spectra ----------------------------------------------------------------

class InvalidRegionPresent(SolarSRError):
    """Operation requires a fully valid image; crop invalid regions first."""


class IncompatibleShapes(SolarSRError):
    """Image dimensions are not related by the required integer factor."""


# --- aggregation / pipeline -------------------------------------------------

class EmptyInput(SolarSRError):
    """Non-empty input sequence required."""


class EmptyInputs(SolarSRError):
    """Both frame catalogs must be non-empty to build splits."""


class ConfigError(SolarSRError):
    """Configuration file is invalid or misses required keys."""


class StageError(SolarSRError):
    """A pipeline stage failed; carries context for the error summary."""

    def __init__(self, message, stage=None, pair_id=None):
        super().__init__(message)
        self.stage = stage
        self.pair_id = pair_id
