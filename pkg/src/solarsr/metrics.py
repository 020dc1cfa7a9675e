"""Per-image quality metrics and their per-image-averaged aggregates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateImage, EmptyInput, ShapeMismatch
from .image import Image2D


@dataclass(frozen=True)
class ImageMetrics:
    mse: float
    rmse: float
    cc: float


@dataclass
class MetricsReport:
    """Aggregate = arithmetic mean of each per-image metric independently.

    Note mean(rmse) != sqrt(mean(mse)) whenever the per-image MSEs differ.
    """

    per_image: list[ImageMetrics]
    mean_mse: float
    mean_rmse: float
    mean_cc: float


def image_metrics(pred: Image2D, truth: Image2D) -> ImageMetrics:
    """MSE, RMSE and Pearson correlation over the jointly valid pixels."""
    if pred.shape != truth.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs truth {truth.shape}")
    joint = pred.valid_mask & truth.valid_mask
    n = int(joint.sum())
    if n < 2:
        raise DegenerateImage(f"only {n} jointly valid pixels")
    a = pred.pixels[joint]
    b = truth.pixels[joint]
    diff = a - b
    mse = float(diff @ diff) / n
    va = a - a.mean()
    vb = b - b.mean()
    denom = math.sqrt(float(va @ va) * float(vb @ vb))
    if denom == 0.0:
        raise DegenerateImage("zero variance; correlation undefined")
    cc = float(np.clip(float(va @ vb) / denom, -1.0, 1.0))
    return ImageMetrics(mse=mse, rmse=math.sqrt(mse), cc=cc)


def aggregate_metrics(reports: list[ImageMetrics]) -> MetricsReport:
    if not reports:
        raise EmptyInput("no per-image metrics to aggregate")
    return MetricsReport(
        per_image=list(reports),
        mean_mse=float(np.mean([r.mse for r in reports])),
        mean_rmse=float(np.mean([r.rmse for r in reports])),
        mean_cc=float(np.mean([r.cc for r in reports])),
    )
