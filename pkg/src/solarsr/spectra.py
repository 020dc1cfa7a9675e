"""Frequency-domain evaluation: 2-D power spectra and radial profiles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft

from .errors import IncompatibleShapes, InvalidRegionPresent
from .image import Image2D, Rect, crop
from .resample import upsample_image


@dataclass
class PowerSpectrum2D:
    """Squared DFT magnitudes with the zero-frequency bin centered."""

    power: np.ndarray

    @property
    def size(self) -> tuple[int, int]:
        return self.power.shape  # type: ignore[return-value]


@dataclass
class RadialSpectrum:
    """Azimuthally averaged power per integer radial frequency bin."""

    bins: np.ndarray
    power: np.ndarray
    counts: np.ndarray


@dataclass
class SpectraReport:
    """Paired SR/LR radial spectra on a common grid plus the HF power ratio."""

    bins: np.ndarray
    sr_power: np.ndarray
    lr_power: np.ndarray
    counts: np.ndarray
    high_freq_ratio: float
    upscale_factor: int
    upscale_method: str


def _centered_square(image: Image2D) -> Image2D:
    h, w = image.shape
    if h == w:
        return image
    side = min(h, w)
    return crop(image, Rect((w - side) // 2, (h - side) // 2, side, side))


def power_spectrum_2d(image: Image2D, window: str = "none") -> PowerSpectrum2D:
    """|DFT2|^2 of the (optionally Hann-windowed) image, zero frequency centered.

    Requires a fully valid image; non-square inputs are reduced to the
    largest centered square so radial bins are unambiguous. Without a window
    the output satisfies Parseval: sum(power) == N^2 * sum(image^2).
    """
    if not image.all_valid():
        raise InvalidRegionPresent("power spectrum requires a fully valid image")
    square = _centered_square(image)
    n = square.shape[0]
    if n < 4:
        raise IncompatibleShapes(f"image too small for spectra: {image.shape}")
    data = square.pixels
    if window == "hann":
        w1 = np.hanning(n)
        data = data * np.outer(w1, w1)
    elif window != "none":
        raise ValueError(f"unknown window {window!r}")
    spectrum = sp_fft.fft2(data)
    power = np.abs(spectrum) ** 2
    return PowerSpectrum2D(sp_fft.fftshift(power))


def azimuthal_average(ps: PowerSpectrum2D) -> RadialSpectrum:
    """Mean power in annuli of 1 frequency-pixel width; bin = floor(radius).

    Energy is conserved exactly: sum(power_b * count_b) over bins equals the
    sum over all spectrum pixels.
    """
    h, w = ps.size
    cy, cx = h // 2, w // 2
    ys, xs = np.mgrid[0:h, 0:w]
    r = np.hypot(xs - cx, ys - cy)
    idx = np.floor(r).astype(np.intp).ravel()
    sums = np.bincount(idx, weights=ps.power.ravel())
    counts = np.bincount(idx)
    present = counts > 0
    bins = np.nonzero(present)[0].astype(np.float64)
    return RadialSpectrum(
        bins=bins,
        power=sums[present] / counts[present],
        counts=counts[present],
    )


def spectra_report(sr: Image2D, lr: Image2D, upscale: str = "bicubic",
                   window: str = "none") -> SpectraReport:
    """Compare SR and upscaled-LR radial power on the SR grid.

    The high-frequency ratio is total SR power over total LR power in the
    bins above half the Nyquist radius.
    """
    if sr.shape[0] % lr.shape[0] or sr.shape[1] % lr.shape[1]:
        raise IncompatibleShapes(
            f"sr {sr.shape} is not an integer multiple of lr {lr.shape}"
        )
    fy = sr.shape[0] // lr.shape[0]
    fx = sr.shape[1] // lr.shape[1]
    if fy != fx:
        raise IncompatibleShapes(f"axis factors differ: {fy} vs {fx}")
    lr_up = upsample_image(lr, fy, method=upscale)

    sr_radial = azimuthal_average(power_spectrum_2d(sr, window))
    lr_radial = azimuthal_average(power_spectrum_2d(lr_up, window))
    if sr_radial.bins.shape != lr_radial.bins.shape:
        raise IncompatibleShapes("radial grids differ after upscaling")

    n = min(_centered_square(sr).shape)
    cutoff = (n / 2.0) / 2.0
    hf = sr_radial.bins > cutoff
    sr_energy = float((sr_radial.power[hf] * sr_radial.counts[hf]).sum())
    lr_energy = float((lr_radial.power[hf] * lr_radial.counts[hf]).sum())
    if lr_energy == 0.0:
        ratio = float("inf") if sr_energy > 0 else 1.0
    else:
        ratio = sr_energy / lr_energy
    return SpectraReport(
        bins=sr_radial.bins,
        sr_power=sr_radial.power,
        lr_power=lr_radial.power,
        counts=sr_radial.counts,
        high_freq_ratio=ratio,
        upscale_factor=fy,
        upscale_method=upscale,
    )
