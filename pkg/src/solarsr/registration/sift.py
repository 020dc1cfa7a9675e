"""Scale-invariant keypoint detection, description, and matching.

Difference-of-Gaussians extrema with sub-pixel refinement, gradient
orientation assignment, and 4x4x8 gradient-histogram descriptors
(unit L2-normalized floats). Matching uses the nearest-descriptor rule
with a ratio test plus a symmetric cross-check. Defaults: 4 octaves,
3 scales per octave, contrast threshold 0.03 on [0, 1]-normalized
intensities, edge-curvature ratio 10, ratio test 0.75.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import TooFewKeypoints
from ..image import Image2D
from .geometry import largest_valid_rect

N_OCTAVES = 4
SCALES_PER_OCTAVE = 3
SIGMA0 = 1.6
CONTRAST_THRESHOLD = 0.03
EDGE_RATIO = 10.0
MATCH_RATIO = 0.75

_ASSUMED_BLUR = 0.5
_ORI_BINS = 36
_ORI_SIGMA_FACTOR = 1.5
_ORI_PEAK_RATIO = 0.8
_DESC_WIDTH = 4
_DESC_BINS = 8
_DESC_SCALE_FACTOR = 3.0
_MIN_OCTAVE_SIZE = 8
_MIN_VALID_SIDE = 64


@dataclass
class Keypoint:
    """Sub-pixel feature location with scale, orientation and descriptor."""

    x: float
    y: float
    scale: float
    orientation: float
    descriptor: np.ndarray = field(repr=False)
    response: float = 0.0

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


def _upsample2_bilinear(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    ys = np.arange(2 * h) * 0.5
    xs = np.arange(2 * w) * 0.5
    y0 = np.minimum(ys.astype(np.intp), h - 1)
    x0 = np.minimum(xs.astype(np.intp), w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    return (
        (1 - fy) * (1 - fx) * img[np.ix_(y0, x0)]
        + (1 - fy) * fx * img[np.ix_(y0, x1)]
        + fy * (1 - fx) * img[np.ix_(y1, x0)]
        + fy * fx * img[np.ix_(y1, x1)]
    )


def _build_pyramid(base: np.ndarray, n_octaves: int, s: int, sigma0: float,
                   initial_blur: float):
    """Gaussian pyramid: per octave, s+3 levels at sigma0 * 2^(i/s)."""
    level_sigmas = [sigma0 * 2.0 ** (i / s) for i in range(s + 3)]
    increments = [
        math.sqrt(max(level_sigmas[i] ** 2 - level_sigmas[i - 1] ** 2, 1e-12))
        for i in range(1, s + 3)
    ]
    first_inc = math.sqrt(max(sigma0 ** 2 - initial_blur ** 2, 1e-12))
    octaves = []
    current = ndimage.gaussian_filter(base, first_inc, mode="nearest")
    for _ in range(n_octaves):
        levels = [current]
        for inc in increments:
            levels.append(ndimage.gaussian_filter(levels[-1], inc, mode="nearest"))
        octaves.append(levels)
        nxt = levels[s][::2, ::2]
        if min(nxt.shape) < _MIN_OCTAVE_SIZE:
            break
        current = nxt
    return octaves, level_sigmas


def _find_extrema(dogs: np.ndarray, prefilter: float):
    """Strict 26-neighbor extrema in the DoG stack of shape (layers, h, w)."""
    footprint = np.ones((3, 3, 3), dtype=bool)
    footprint[1, 1, 1] = False
    neighbor_max = ndimage.maximum_filter(dogs, footprint=footprint, mode="nearest")
    neighbor_min = ndimage.minimum_filter(dogs, footprint=footprint, mode="nearest")
    strong = np.abs(dogs) > prefilter
    extrema = strong & ((dogs > neighbor_max) | (dogs < neighbor_min))
    extrema[0] = False
    extrema[-1] = False
    extrema[:, :1, :] = False
    extrema[:, -1:, :] = False
    extrema[:, :, :1] = False
    extrema[:, :, -1:] = False
    return np.argwhere(extrema)


def _refine(dogs: np.ndarray, layer: int, y: int, x: int, s: int,
            contrast_threshold: float, edge_ratio: float):
    """Quadratic sub-pixel refinement; returns (layer, y, x, offsets, value)."""
    n_layers, h, w = dogs.shape
    for _ in range(5):
        d = dogs
        grad = np.array([
            (d[layer + 1, y, x] - d[layer - 1, y, x]) / 2.0,
            (d[layer, y + 1, x] - d[layer, y - 1, x]) / 2.0,
            (d[layer, y, x + 1] - d[layer, y, x - 1]) / 2.0,
        ])
        v = d[layer, y, x]
        hss = d[layer + 1, y, x] + d[layer - 1, y, x] - 2 * v
        hyy = d[layer, y + 1, x] + d[layer, y - 1, x] - 2 * v
        hxx = d[layer, y, x + 1] + d[layer, y, x - 1] - 2 * v
        hsy = (d[layer + 1, y + 1, x] - d[layer + 1, y - 1, x]
               - d[layer - 1, y + 1, x] + d[layer - 1, y - 1, x]) / 4.0
        hsx = (d[layer + 1, y, x + 1] - d[layer + 1, y, x - 1]
               - d[layer - 1, y, x + 1] + d[layer - 1, y, x - 1]) / 4.0
        hyx = (d[layer, y + 1, x + 1] - d[layer, y + 1, x - 1]
               - d[layer, y - 1, x + 1] + d[layer, y - 1, x - 1]) / 4.0
        hess = np.array([[hss, hsy, hsx], [hsy, hyy, hyx], [hsx, hyx, hxx]])
        try:
            offset = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            return None
        if np.all(np.abs(offset) < 0.5):
            value = v + 0.5 * float(grad @ offset)
            if abs(value) < contrast_threshold / s:
                return None
            tr = hyy + hxx
            det = hyy * hxx - hyx * hyx
            if det <= 0 or tr * tr / det >= (edge_ratio + 1) ** 2 / edge_ratio:
                return None
            return layer, y, x, offset, value
        layer += int(np.clip(round(offset[0]), -1, 1))
        y += int(np.clip(round(offset[1]), -1, 1))
        x += int(np.clip(round(offset[2]), -1, 1))
        if not (1 <= layer <= n_layers - 2 and 1 <= y < h - 1 and 1 <= x < w - 1):
            return None
    return None


def _gradients(level: np.ndarray):
    gy, gx = np.gradient(level)
    return np.hypot(gx, gy), np.arctan2(gy, gx)


def _orientation_histogram(mag, ang, y, x, sigma):
    h, w = mag.shape
    radius = max(1, int(round(3.0 * sigma)))
    y0, y1 = max(0, int(y) - radius), min(h, int(y) + radius + 1)
    x0, x1 = max(0, int(x) - radius), min(w, int(x) + radius + 1)
    yy, xx = np.mgrid[y0:y1, x0:x1]
    dy = yy - y
    dx = xx - x
    weight = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
    m = (mag[y0:y1, x0:x1] * weight).ravel()
    a = ang[y0:y1, x0:x1].ravel() % (2.0 * np.pi)
    bins = np.rint(a / (2.0 * np.pi) * _ORI_BINS).astype(np.intp) % _ORI_BINS
    hist = np.zeros(_ORI_BINS)
    np.add.at(hist, bins, m)
    for _ in range(2):
        hist = (np.roll(hist, 1) + hist + np.roll(hist, -1)) / 3.0
    return hist


def _orientation_peaks(hist):
    peaks = []
    top = hist.max()
    if top <= 0:
        return peaks
    for k in range(_ORI_BINS):
        left = hist[(k - 1) % _ORI_BINS]
        right = hist[(k + 1) % _ORI_BINS]
        if hist[k] > left and hist[k] > right and hist[k] >= _ORI_PEAK_RATIO * top:
            denom = left - 2.0 * hist[k] + right
            delta = 0.5 * (left - right) / denom if denom != 0 else 0.0
            theta = ((k + delta) * 2.0 * np.pi / _ORI_BINS) % (2.0 * np.pi)
            peaks.append(float(theta))
    return peaks


def _descriptor(mag, ang, y, x, sigma, theta):
    """4x4x8 gradient histogram, trilinear soft assignment, unit L2 norm."""
    h, w = mag.shape
    d = _DESC_WIDTH
    nb = _DESC_BINS
    hist_width = _DESC_SCALE_FACTOR * sigma
    radius = int(round(hist_width * math.sqrt(2) * (d + 1) * 0.5))
    radius = min(radius, int(math.hypot(h, w)))
    y0, y1 = max(0, int(y) - radius), min(h, int(y) + radius + 1)
    x0, x1 = max(0, int(x) - radius), min(w, int(x) + radius + 1)
    if y1 - y0 < 2 or x1 - x0 < 2:
        return None
    yy, xx = np.mgrid[y0:y1, x0:x1]
    dy = (yy - y).ravel()
    dx = (xx - x).ravel()
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    # rotate into the keypoint frame, in histogram units
    c_rot = (dx * cos_t + dy * sin_t) / hist_width
    r_rot = (-dx * sin_t + dy * cos_t) / hist_width
    rbin = r_rot + d / 2.0 - 0.5
    cbin = c_rot + d / 2.0 - 0.5
    inside = (rbin > -1) & (rbin < d) & (cbin > -1) & (cbin < d)
    if not inside.any():
        return None
    rbin = rbin[inside]
    cbin = cbin[inside]
    m = mag[y0:y1, x0:x1].ravel()[inside]
    a = (ang[y0:y1, x0:x1].ravel()[inside] - theta) % (2.0 * np.pi)
    obin = a / (2.0 * np.pi) * nb
    weight = np.exp(-(r_rot[inside] ** 2 + c_rot[inside] ** 2) / (0.5 * d * d))
    m = m * weight

    r0 = np.floor(rbin).astype(np.intp)
    c0 = np.floor(cbin).astype(np.intp)
    o0 = np.floor(obin).astype(np.intp)
    fr = rbin - r0
    fc = cbin - c0
    fo = obin - o0

    hist = np.zeros((d + 2, d + 2, nb))
    flat = hist.ravel()
    stride_r = (d + 2) * nb
    stride_c = nb
    for bit_r in (0, 1):
        wr = m * (fr if bit_r else 1 - fr)
        rr = r0 + 1 + bit_r
        for bit_c in (0, 1):
            wc = wr * (fc if bit_c else 1 - fc)
            cc = c0 + 1 + bit_c
            base = rr * stride_r + cc * stride_c
            for bit_o in (0, 1):
                wo = wc * (fo if bit_o else 1 - fo)
                oo = (o0 + bit_o) % nb
                np.add.at(flat, base + oo, wo)
    vec = hist[1:-1, 1:-1, :].ravel()
    norm = np.linalg.norm(vec)
    if norm <= 1e-12:
        return None
    vec = np.minimum(vec, 0.2 * norm)
    norm = np.linalg.norm(vec)
    if norm <= 1e-12:
        return None
    return vec / norm


def detect_keypoints(
    image: Image2D,
    n_octaves: int = N_OCTAVES,
    scales_per_octave: int = SCALES_PER_OCTAVE,
    sigma0: float = SIGMA0,
    contrast_threshold: float = CONTRAST_THRESHOLD,
    edge_ratio: float = EDGE_RATIO,
) -> list[Keypoint]:
    """Detect scale-space keypoints on the largest valid region of `image`."""
    rect = largest_valid_rect(image)
    region = image.pixels[rect.y:rect.y + rect.h, rect.x:rect.x + rect.w]
    lo = region.min()
    hi = region.max()
    if hi <= lo:
        return []
    norm = (region - lo) / (hi - lo)

    s = scales_per_octave
    base = _upsample2_bilinear(norm)
    octaves, level_sigmas = _build_pyramid(
        base, n_octaves, s, sigma0, _ASSUMED_BLUR * 2.0
    )

    keypoints: list[Keypoint] = []
    grad_cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
    prefilter = 0.5 * contrast_threshold / s

    for o, levels in enumerate(octaves):
        dogs = np.stack([levels[i + 1] - levels[i] for i in range(s + 2)])
        candidates = _find_extrema(dogs, prefilter)
        oct_scale = 0.5 * 2.0 ** o  # octave pixels -> original image pixels
        h_img, w_img = image.shape
        for layer, y, x in candidates:
            refined = _refine(dogs, int(layer), int(y), int(x), s,
                              contrast_threshold, edge_ratio)
            if refined is None:
                continue
            layer_r, y_r, x_r, offset, value = refined
            sigma_oct = sigma0 * 2.0 ** ((layer_r + offset[0]) / s)
            key = (o, layer_r)
            if key not in grad_cache:
                grad_cache[key] = _gradients(levels[layer_r])
            mag, ang = grad_cache[key]
            y_f = y_r + offset[1]
            x_f = x_r + offset[2]
            hist = _orientation_histogram(mag, ang, y_f, x_f,
                                          _ORI_SIGMA_FACTOR * sigma_oct)
            for theta in _orientation_peaks(hist):
                desc = _descriptor(mag, ang, y_f, x_f, sigma_oct, theta)
                if desc is None:
                    continue
                x_img = x_f * oct_scale + rect.x
                y_img = y_f * oct_scale + rect.y
                if not (0 <= x_img <= w_img - 1 and 0 <= y_img <= h_img - 1):
                    continue
                keypoints.append(Keypoint(
                    x=float(x_img),
                    y=float(y_img),
                    scale=float(sigma_oct * oct_scale),
                    orientation=theta,
                    descriptor=desc,
                    response=abs(float(value)),
                ))
    return keypoints


def match_descriptors(
    kps_a: list[Keypoint],
    kps_b: list[Keypoint],
    ratio: float = MATCH_RATIO,
) -> list[tuple[int, int]]:
    """Nearest-descriptor matches passing the ratio test and cross-check."""
    if len(kps_a) < 1 or len(kps_b) < 2:
        return []
    da = np.stack([k.descriptor for k in kps_a])
    db = np.stack([k.descriptor for k in kps_b])
    # descriptors are unit norm: d^2 = 2 - 2 * cos similarity
    sim = da @ db.T
    d2 = np.maximum(2.0 - 2.0 * sim, 0.0)

    nearest_b = np.argmin(d2, axis=1)
    back_nearest = np.argmin(d2, axis=0)
    matches = []
    for i, j in enumerate(nearest_b):
        row = d2[i]
        d1 = row[j]
        row_rest = np.delete(row, j)
        d2nd = row_rest.min() if row_rest.size else np.inf
        if math.sqrt(d1) >= ratio * math.sqrt(d2nd):
            continue
        if back_nearest[j] != i:
            continue
        matches.append((i, int(j)))
    return matches


def detect_and_match(
    a: Image2D,
    b: Image2D,
    ratio: float = MATCH_RATIO,
    **detect_kwargs,
) -> list[tuple[Keypoint, Keypoint]]:
    """Detect keypoints on both images and return the filtered matches.

    Raises TooFewKeypoints when fewer than 4 matches survive the ratio test
    and cross-check, or when either image lacks a 64x64 valid region.
    """
    for name, img in (("first", a), ("second", b)):
        rect = largest_valid_rect(img)
        if rect.w < _MIN_VALID_SIDE or rect.h < _MIN_VALID_SIDE:
            raise TooFewKeypoints(
                f"{name} image valid region {rect.w}x{rect.h} is below "
                f"{_MIN_VALID_SIDE}x{_MIN_VALID_SIDE}"
            )
    kps_a = detect_keypoints(a, **detect_kwargs)
    kps_b = detect_keypoints(b, **detect_kwargs)
    pairs = match_descriptors(kps_a, kps_b, ratio)
    if len(pairs) < 4:
        raise TooFewKeypoints(
            f"only {len(pairs)} matches after filtering "
            f"({len(kps_a)} vs {len(kps_b)} keypoints)"
        )
    return [(kps_a[i], kps_b[j]) for i, j in pairs]
