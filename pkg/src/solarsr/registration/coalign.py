"""Geometric co-alignment of one LR/HR frame pair."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateImage, ResidualTooLow
from ..fits_io import ObsMetadata
from ..image import Image2D, Rect, crop
from ..resample import downsample_area
from .geometry import largest_valid_rect, rotate_and_mask, warp_similarity
from .sift import detect_and_match
from .similarity import Transform, estimate_similarity


@dataclass
class AlignedPair:
    """Co-registered LR/HR images plus the transform and crop that made them.

    `transform` maps original HR pixel coordinates to LR pixel coordinates,
    header rotation included. `crop` is in LR coordinates; the stored HR
    image is the same sky region resampled onto the LR grid refined by the
    plate-scale ratio.
    """

    lr: Image2D
    hr: Image2D
    lr_meta: ObsMetadata
    hr_meta: ObsMetadata
    transform: Transform
    crop: Rect
    residual_score: float


def _masked_pearson(a: Image2D, b: Image2D) -> float:
    joint = a.valid_mask & b.valid_mask
    if joint.sum() < 2:
        raise DegenerateImage("fewer than 2 jointly valid pixels")
    va = a.pixels[joint]
    vb = b.pixels[joint]
    va = va - va.mean()
    vb = vb - vb.mean()
    denom = np.sqrt((va @ va) * (vb @ vb))
    if denom == 0:
        raise DegenerateImage("zero variance in the overlap region")
    return float(np.clip((va @ vb) / denom, -1.0, 1.0))


def _center_rotation(shape: tuple[int, int], angle: float) -> Transform:
    """Point map of rotate_and_mask: x -> c + R(angle) (x - c)."""
    h, w = shape
    cx = (w - 1) / 2.0
    cy = (h - 1) / 2.0
    theta = math.radians(angle)
    c = math.cos(theta)
    s = math.sin(theta)
    return Transform(1.0, angle, cx - (c * cx - s * cy), cy - (s * cx + c * cy))


def _downsample_map(factor: float) -> Transform:
    """Coordinate map of downsample_area: x_out = (x_in + 0.5)/f - 0.5."""
    shift = (1.0 - factor) / (2.0 * factor)
    return Transform(1.0 / factor, 0.0, shift, shift)


def coalign_pair(
    lr: Image2D,
    lr_meta: ObsMetadata,
    hr: Image2D,
    hr_meta: ObsMetadata,
    manual_offset: tuple[float, float] = (0.0, 0.0),
    *,
    match_ratio: float = 0.75,
    inlier_tol: float = 2.0,
    ransac_iterations: int = 1000,
    seed: int = 0,
    residual_floor: float = 0.3,
    detect_kwargs: dict | None = None,
) -> AlignedPair:
    """Register an HR frame onto its LR counterpart and crop both.

    Steps: undo the header rotation on the HR frame, area-average it down to
    the LR plate scale, estimate the remaining similarity from feature
    matches, add the manual offset, then crop both images to the largest
    valid rectangle of the warped HR footprint. The residual score is the
    Pearson correlation of the cropped pair at LR scale.
    """
    factor = lr_meta.plate_scale / hr_meta.plate_scale
    if factor < 1.0:
        raise ValueError(
            f"HR plate scale {hr_meta.plate_scale} must be finer than "
            f"LR {lr_meta.plate_scale}"
        )

    hr_rot = rotate_and_mask(hr, -hr_meta.rotation_angle)
    hr_small = downsample_area(hr_rot, factor) if factor != 1.0 else hr_rot

    matches = detect_and_match(hr_small, lr, ratio=match_ratio,
                               **(detect_kwargs or {}))
    points = [(m[0].xy, m[1].xy) for m in matches]
    estimated = estimate_similarity(points, inlier_tol=inlier_tol,
                                    iterations=ransac_iterations, seed=seed)
    residual = estimated.translated(manual_offset[0], manual_offset[1])

    warped_small = warp_similarity(hr_small, residual, out_shape=lr.shape)
    joint = warped_small.valid_mask & lr.valid_mask
    footprint = Image2D(np.zeros(lr.shape), joint)
    rect = largest_valid_rect(footprint)
    # 1 px margin guards against rounding when the rect is scaled to HR
    if rect.w > 4 and rect.h > 4:
        rect = Rect(rect.x + 1, rect.y + 1, rect.w - 2, rect.h - 2)

    lr_crop = crop(lr, rect)
    score = _masked_pearson(crop(warped_small, rect), lr_crop)
    if score < residual_floor:
        raise ResidualTooLow(
            f"residual correlation {score:.4f} below floor {residual_floor}"
        )

    # exact coordinate chain: rotated HR -> downsampled HR -> LR
    down = _downsample_map(factor)
    rot_to_lr = residual.compose(down)
    full_transform = rot_to_lr.compose(_center_rotation(hr.shape,
                                                        -hr_meta.rotation_angle))

    # re-align at full HR resolution on the LR grid refined by `factor`;
    # the crop rectangle scales exactly in cell space
    residual_hr = down.inverse().compose(residual).compose(down)
    rect_hr = rect.scaled(factor)
    warped_hr = warp_similarity(
        hr_rot, residual_hr,
        out_shape=(rect_hr.y + rect_hr.h, rect_hr.x + rect_hr.w),
    )
    hr_crop = crop(warped_hr, rect_hr)

    return AlignedPair(
        lr=lr_crop,
        hr=hr_crop,
        lr_meta=lr_meta,
        hr_meta=hr_meta,
        transform=full_transform,
        crop=rect,
        residual_score=score,
    )
