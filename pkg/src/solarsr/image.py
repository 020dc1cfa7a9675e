"""2-D image raster with a per-pixel validity mask.

Pixel values are stored as 64-bit floats in physical units. The mask marks
pixels that carry real data; resampling operations mark pixels they cannot
compute as invalid instead of inventing fill values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyValidRegion, ShapeMismatch


@dataclass
class Image2D:
    """Row-major float64 raster plus boolean validity mask of equal shape."""

    pixels: np.ndarray
    valid_mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2:
            raise ShapeMismatch(f"expected 2-D pixel array, got shape {self.pixels.shape}")
        if self.valid_mask is None:
            self.valid_mask = np.ones(self.pixels.shape, dtype=bool)
        else:
            self.valid_mask = np.asarray(self.valid_mask, dtype=bool)
        if self.valid_mask.shape != self.pixels.shape:
            raise ShapeMismatch(
                f"mask shape {self.valid_mask.shape} != pixel shape {self.pixels.shape}"
            )
        if not np.all(np.isfinite(self.pixels[self.valid_mask])):
            raise ValueError("non-finite pixel value inside the valid region")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape  # type: ignore[return-value]

    def all_valid(self) -> bool:
        return bool(self.valid_mask.all())

    def copy(self) -> "Image2D":
        return Image2D(self.pixels.copy(), self.valid_mask.copy())


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle; x/y is the top-left corner (x = column)."""

    x: int
    y: int
    w: int
    h: int

    @property
    def area(self) -> int:
        return self.w * self.h

    def scaled(self, factor: float) -> "Rect":
        """Rectangle covering the same region on a grid `factor` times finer."""
        return Rect(
            int(round(self.x * factor)),
            int(round(self.y * factor)),
            int(round(self.w * factor)),
            int(round(self.h * factor)),
        )


def crop(image: Image2D, rect: Rect) -> Image2D:
    if rect.x < 0 or rect.y < 0 or rect.x + rect.w > image.width or rect.y + rect.h > image.height:
        raise ShapeMismatch(f"crop {rect} exceeds image bounds {image.shape}")
    if rect.w <= 0 or rect.h <= 0:
        raise EmptyValidRegion("crop rectangle has no area")
    ys = slice(rect.y, rect.y + rect.h)
    xs = slice(rect.x, rect.x + rect.w)
    return Image2D(image.pixels[ys, xs].copy(), image.valid_mask[ys, xs].copy())


def shift_image(image: Image2D, dx: int, dy: int) -> Image2D:
    """Translate content by integer (dx, dy); vacated pixels become invalid."""
    h, w = image.shape
    out = np.zeros((h, w), dtype=np.float64)
    mask = np.zeros((h, w), dtype=bool)
    src_y = slice(max(0, -dy), min(h, h - dy))
    src_x = slice(max(0, -dx), min(w, w - dx))
    dst_y = slice(max(0, dy), min(h, h + dy))
    dst_x = slice(max(0, dx), min(w, w + dx))
    if src_y.start < src_y.stop and src_x.start < src_x.stop:
        out[dst_y, dst_x] = image.pixels[src_y, src_x]
        mask[dst_y, dst_x] = image.valid_mask[src_y, src_x]
    return Image2D(out, mask)
