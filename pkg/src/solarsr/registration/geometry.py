"""Geometric operations for co-alignment: rotation, warping, valid-rect cropping."""

from __future__ import annotations

import math

import numpy as np

from ..errors import EmptyValidRegion
from ..image import Image2D, Rect
from ..resample import bilinear_sample
from .similarity import Transform


def _dest_grid(h: int, w: int):
    ys, xs = np.mgrid[0:h, 0:w]
    return xs.astype(np.float64), ys.astype(np.float64)


def rotate_and_mask(image: Image2D, angle: float) -> Image2D:
    """Rotate about the image center with bilinear resampling.

    Positive angles turn +x toward +y. Destination pixels whose sample point
    falls outside the source, or touches invalid source pixels, are masked
    invalid. Multiples of 90 degrees on a square grid are lattice-exact.
    """
    if not math.isfinite(angle):
        raise ValueError(f"rotation angle must be finite, got {angle}")
    angle = float(angle)
    turns = angle / 90.0
    if turns == int(turns):
        k = int(turns) % 4
        if k == 0:
            return image.copy()
        if k == 2:
            return Image2D(image.pixels[::-1, ::-1].copy(),
                           image.valid_mask[::-1, ::-1].copy())
        if image.width == image.height:
            # +90 turns +x toward +y, matching np.rot90 with k=-1
            return Image2D(np.rot90(image.pixels, -k).copy(),
                           np.rot90(image.valid_mask, -k).copy())

    h, w = image.shape
    cx = (w - 1) / 2.0
    cy = (h - 1) / 2.0
    theta = math.radians(angle)
    c = math.cos(theta)
    s = math.sin(theta)
    xs, ys = _dest_grid(h, w)
    dx = xs - cx
    dy = ys - cy
    # inverse map: rotate destination offsets by -angle
    sx = c * dx + s * dy + cx
    sy = -s * dx + c * dy + cy
    values, valid = bilinear_sample(image, sx, sy)
    return Image2D(values, valid)


def warp_similarity(image: Image2D, transform: Transform,
                    out_shape: tuple[int, int] | None = None) -> Image2D:
    """Resample `image` so that output pixel p holds image(transform^-1(p))."""
    h, w = out_shape if out_shape is not None else image.shape
    inv = transform.inverse().matrix()
    xs, ys = _dest_grid(h, w)
    sx = inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]
    sy = inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]
    values, valid = bilinear_sample(image, sx, sy)
    return Image2D(values, valid)


def largest_valid_rect(image: Image2D) -> Rect:
    """Maximum-area axis-aligned rectangle of valid pixels.

    Histogram-stack dynamic programming, O(H*W). Raises EmptyValidRegion
    when no pixel is valid.
    """
    mask = image.valid_mask
    if not mask.any():
        raise EmptyValidRegion("no valid pixels")
    h, w = mask.shape
    heights = np.zeros(w, dtype=np.int64)
    best_area = 0
    best = Rect(0, 0, 0, 0)
    for row in range(h):
        heights = np.where(mask[row], heights + 1, 0)
        # largest rectangle under the histogram for this row
        stack: list[int] = []
        for col in range(w + 1):
            cur = heights[col] if col < w else 0
            while stack and heights[stack[-1]] >= cur:
                idx = stack.pop()
                height = int(heights[idx])
                left = stack[-1] + 1 if stack else 0
                area = height * (col - left)
                if area > best_area:
                    best_area = area
                    best = Rect(left, row - height + 1, col - left, height)
            if col < w:
                stack.append(col)
    return best
