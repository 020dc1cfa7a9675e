"""Batch toolkit for solar H-alpha super-resolution data preparation,
generator inference, and evaluation."""

from . import errors
from .fits_io import (
    FitsFile,
    ImageSource,
    ObsMetadata,
    parse_fits,
    read_image_hdu,
    write_fits,
)
from .image import Image2D, Rect, crop, shift_image
from .losses import (
    CriticScores,
    LossWeights,
    combined_generator_loss,
    perceptual_loss,
    pixel_l1_loss,
    ra_discriminator_loss,
    ra_generator_loss,
)
from .metrics import ImageMetrics, MetricsReport, aggregate_metrics, image_metrics
from .spectra import azimuthal_average, power_spectrum_2d, spectra_report

__version__ = "0.1.0"
