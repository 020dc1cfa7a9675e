"""Grid resampling primitives shared by registration and spectra.

All routines propagate the validity mask conservatively: an output pixel is
valid only when every source pixel that contributes real weight is valid.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import InvalidRegionPresent, ShapeMismatch
from .image import Image2D

_WEIGHT_TOL = 1e-12
_EDGE_TOL = 1e-9


def bilinear_sample(image: Image2D, sx: np.ndarray, sy: np.ndarray):
    """Sample at float source coordinates; returns (values, valid).

    A sample is valid when it lies inside the source grid and every neighbor
    with non-negligible bilinear weight is a valid pixel.
    """
    h, w = image.shape
    pix = np.where(image.valid_mask, image.pixels, 0.0)
    mask = image.valid_mask

    inside = (
        (sx >= -_EDGE_TOL) & (sx <= w - 1 + _EDGE_TOL)
        & (sy >= -_EDGE_TOL) & (sy <= h - 1 + _EDGE_TOL)
    )
    cx = np.clip(sx, 0.0, w - 1)
    cy = np.clip(sy, 0.0, h - 1)
    x0 = np.clip(np.floor(cx).astype(np.intp), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(cy).astype(np.intp), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = cx - x0
    fy = cy - y0

    w00 = (1.0 - fx) * (1.0 - fy)
    w01 = fx * (1.0 - fy)
    w10 = (1.0 - fx) * fy
    w11 = fx * fy

    values = (
        w00 * pix[y0, x0] + w01 * pix[y0, x1]
        + w10 * pix[y1, x0] + w11 * pix[y1, x1]
    )
    valid = inside.copy()
    for wgt, yy, xx in ((w00, y0, x0), (w01, y0, x1), (w10, y1, x0), (w11, y1, x1)):
        valid &= mask[yy, xx] | (wgt <= _WEIGHT_TOL)
    return np.where(valid, values, 0.0), valid


def _interval_weights(n_out: int, n_in: int, factor: float) -> np.ndarray:
    """Overlap length of output cell j = [j*f, (j+1)*f) with input cell i."""
    weights = np.zeros((n_out, n_in), dtype=np.float64)
    for j in range(n_out):
        lo = j * factor
        hi = (j + 1) * factor
        i0 = int(np.floor(lo))
        i1 = min(int(np.ceil(hi)), n_in)
        for i in range(i0, i1):
            weights[j, i] = max(0.0, min(hi, i + 1) - max(lo, i))
    return weights


def downsample_area(image: Image2D, factor: float) -> Image2D:
    """Area-averaging downsample by an arbitrary factor >= 1.

    Output pixel j covers source interval [j*factor, (j+1)*factor) along each
    axis; the value is the valid-area-weighted mean. Output pixels whose
    footprint touches any invalid source area are invalid.
    """
    if factor < 1.0:
        raise ValueError(f"downsample factor must be >= 1, got {factor}")
    if factor == 1.0:
        return image.copy()
    h, w = image.shape
    out_h = int(np.floor(h / factor + _EDGE_TOL))
    out_w = int(np.floor(w / factor + _EDGE_TOL))
    if out_h < 1 or out_w < 1:
        raise ShapeMismatch(f"factor {factor} collapses image {image.shape}")

    wr = _interval_weights(out_h, h, factor)
    wc = _interval_weights(out_w, w, factor)
    pix = np.where(image.valid_mask, image.pixels, 0.0)
    m = image.valid_mask.astype(np.float64)

    num = wr @ (pix * m) @ wc.T
    den = wr @ m @ wc.T
    full = np.outer(wr.sum(axis=1), wc.sum(axis=1))
    valid = den >= full * (1.0 - _EDGE_TOL)
    values = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return Image2D(np.where(valid, values, 0.0), valid)


def upsample_image(image: Image2D, factor: int, method: str = "bicubic") -> Image2D:
    """Integer-factor upsample with nearest, bilinear, or bicubic kernels."""
    if factor < 1 or int(factor) != factor:
        raise ValueError(f"upsample factor must be a positive integer, got {factor}")
    factor = int(factor)
    if factor == 1:
        return image.copy()
    if method == "nearest":
        pix = np.repeat(np.repeat(image.pixels, factor, axis=0), factor, axis=1)
        mask = np.repeat(np.repeat(image.valid_mask, factor, axis=0), factor, axis=1)
        return Image2D(pix, mask)
    if method not in ("bilinear", "bicubic"):
        raise ValueError(f"unknown upsample method {method!r}")
    if not image.all_valid():
        raise InvalidRegionPresent(f"{method} upsampling requires a fully valid image")
    order = 1 if method == "bilinear" else 3
    pix = ndimage.zoom(
        image.pixels, factor, order=order, mode="grid-mirror",
        grid_mode=True, prefilter=order > 1,
    )
    return Image2D(pix, np.ones(pix.shape, dtype=bool))
