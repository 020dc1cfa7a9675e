"""Shared synthetic fixtures with exact ground-truth bookkeeping."""

from __future__ import annotations

import math
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import scipy.ndimage as ndi

from solarsr.image import Image2D, Rect, crop
from solarsr.fits_io import Card, ImageSource, ObsMetadata, format_timestamp, write_fits
from solarsr.registration import Transform, largest_valid_rect, warp_similarity
from solarsr.sr_engine import GeneratorConfig, random_checkpoint, save_checkpoint


def texture(seed: int, n: int, smooth: float = 2.5, lo: float = 500.0,
            hi: float = 3500.0) -> np.ndarray:
    """Smoothed random field with structure at many scales."""
    rng = np.random.default_rng(seed)
    t = ndi.gaussian_filter(rng.normal(0.0, 1.0, (n, n)), smooth)
    t = (t - t.min()) / (t.max() - t.min())
    return lo + t * (hi - lo)


def center_rotation(shape, angle: float) -> Transform:
    h, w = shape
    cx = (w - 1) / 2.0
    cy = (h - 1) / 2.0
    theta = math.radians(angle)
    c = math.cos(theta)
    s = math.sin(theta)
    return Transform(1.0, angle, cx - (c * cx - s * cy), cy - (s * cx + c * cy))


def make_lr_hr_pair(seed: int, nominal_factor: float = 2.0,
                    noise_frac: float = 0.05, lr_size: int = 200,
                    header_angle_error: float = 2.0):
    """Synthesize an LR/HR pair related by a known similarity transform.

    Returns (lr, lr_meta, hr, hr_meta, truth) where truth holds the exact
    scene-to-frame mappings. The HR frame is the scene sampled on a grid
    nominal_factor * u finer (u in [0.9, 1.1]), rotated by theta (|theta|
    <= 15 deg) and translated by up to 20 LR px; the header records theta
    only to within +-header_angle_error degrees, as real headers would.
    """
    rng = np.random.default_rng(seed)
    scene_n = lr_size + 120
    scene = Image2D(texture(seed, scene_n))

    # LR view: plain window into the scene
    lr_off = 60
    lr = crop(scene, Rect(lr_off, lr_off, lr_size, lr_size))

    u = rng.uniform(0.9, 1.1)
    theta = rng.uniform(-15.0, 15.0)
    shift = rng.uniform(-20.0, 20.0, size=2)  # LR px, on top of centering
    s_hr = nominal_factor * u

    # scene -> HR frame: center the LR window, then offset by `shift`
    hr_n = int(lr_size * nominal_factor * 1.4)
    c_lr = lr_off + (lr_size - 1) / 2.0
    rot = Transform(s_hr, theta, 0.0, 0.0)
    mapped = rot.apply([(c_lr, c_lr)])[0]
    t_hr = np.array([(hr_n - 1) / 2.0, (hr_n - 1) / 2.0]) - mapped \
        + shift * nominal_factor
    scene_to_hr = Transform(s_hr, theta, float(t_hr[0]), float(t_hr[1]))

    hr_full = warp_similarity(scene, scene_to_hr, out_shape=(hr_n, hr_n))
    r = largest_valid_rect(hr_full)
    side = min(r.w, r.h) // 2 * 2
    hr_rect = Rect(r.x + (r.w - side) // 2, r.y + (r.h - side) // 2, side, side)
    hr = crop(hr_full, hr_rect)
    # cropping shifts HR coordinates
    scene_to_hr = Transform(s_hr, theta,
                            scene_to_hr.tx - hr_rect.x,
                            scene_to_hr.ty - hr_rect.y)

    # exact original-HR -> LR map: through the scene, then the LR window
    hr_to_lr_true = Transform(1.0, 0.0, -lr_off, -lr_off).compose(
        scene_to_hr.inverse()
    )

    drange = 3000.0
    lr_noisy = Image2D(
        lr.pixels + rng.normal(0.0, noise_frac * drange, lr.shape),
        lr.valid_mask,
    )
    hr_noisy = Image2D(
        hr.pixels + rng.normal(0.0, noise_frac * drange, hr.shape),
        hr.valid_mask,
    )

    header_angle = theta + rng.uniform(-header_angle_error, header_angle_error)
    base_ts = datetime(2023, 8, 31, 16, 35, 0, tzinfo=timezone.utc)
    lr_meta = ObsMetadata(base_ts, 1.0, 0.0, ImageSource.LR_GONG)
    hr_meta = ObsMetadata(base_ts + timedelta(seconds=2), 1.0 / nominal_factor,
                          header_angle, ImageSource.HR_GST)
    truth = {
        "theta": theta,
        "scale_jitter": u,
        "hr_to_lr": hr_to_lr_true,
        "header_angle": header_angle,
        "shift": shift,
    }
    return lr_noisy, lr_meta, hr_noisy, hr_meta, truth


# ---------------------------------------------------------------------------
# full synthetic observing day for pipeline tests
# ---------------------------------------------------------------------------

CONFIG_TEMPLATE = """\
rotation_keyword = ROT_ANG
plate_scale_check = false
lambda_adv = 0.005
eta_pixel = 0.01
alpha = 0.8
max_shift = 12
align_passes = 3
seed = 7
max_pair_gap_seconds = 60
split_train_start = 2023-08-31T16:35:00
split_train_end = 2023-08-31T16:40:00
split_test_end = 2023-08-31T16:45:00
residual_floor = 0.3
scale_factor = 2
normalization_max = 4096
checkpoint = {checkpoint}
lr_dir = {lr_dir}
hr_dir = {hr_dir}
output_dir = {output_dir}
"""


def build_synth_day(root: Path, seed: int = 0, n_lr: int = 10,
                    output_dir: Path | None = None) -> dict:
    """Write a synthetic observing day: 10 LR frames with known jitter,
    3 HR frames with known transforms, a tiny seeded checkpoint, and a
    config file. Returns the fixture paths and ground truth."""
    rng = np.random.default_rng(seed)
    root = Path(root)
    lr_dir = root / "lr"
    hr_dir = root / "hr"
    lr_dir.mkdir(parents=True, exist_ok=True)
    hr_dir.mkdir(parents=True, exist_ok=True)

    scene = Image2D(texture(seed, 360))
    lr_size = 192
    off = 60
    base_ts = datetime(2023, 8, 31, 16, 35, 0, tzinfo=timezone.utc)

    jitters = [(0, 0)]
    while len(jitters) < n_lr:
        jitters.append((int(rng.integers(-6, 7)), int(rng.integers(-6, 7))))
    lr_paths = []
    for i, (jx, jy) in enumerate(jitters):
        frame = crop(scene, Rect(off + jx, off + jy, lr_size, lr_size))
        noisy = Image2D(frame.pixels + rng.normal(0, 30.0, frame.shape))
        ts = base_ts + timedelta(seconds=60 * i)
        cards = [Card.make("DATE-OBS", format_timestamp(ts)),
                 Card.make("CDELT1", 1.0)]
        path = lr_dir / f"gong_{i:03d}.fits"
        path.write_bytes(write_fits(noisy, cards, bitpix=-64))
        lr_paths.append(path)

    # HR frames near LR frames 1 (train), 6 and 8 (test)
    hr_specs = [
        (1, 2.0, 3.0),    # lr index, seconds offset, rotation deg
        (6, 5.0, -2.5),
        (8, 10.0, 5.0),
    ]
    hr_paths = []
    hr_truth = []
    for k, (lr_idx, sec, theta) in enumerate(hr_specs):
        u = float(rng.uniform(0.97, 1.03))
        shift = rng.uniform(-8.0, 8.0, 2)
        s_hr = 2.0 * u
        hr_n = 2 * lr_size + 80
        c_lr = off + (lr_size - 1) / 2.0
        rot = Transform(s_hr, theta, 0.0, 0.0)
        mapped = rot.apply([(c_lr, c_lr)])[0]
        t_hr = np.array([(hr_n - 1) / 2.0] * 2) - mapped + shift * 2.0
        scene_to_hr = Transform(s_hr, theta, float(t_hr[0]), float(t_hr[1]))
        hr_full = warp_similarity(scene, scene_to_hr, out_shape=(hr_n, hr_n))
        r = largest_valid_rect(hr_full)
        side = min(r.w, r.h) // 2 * 2
        hr_img = crop(hr_full, Rect(r.x + (r.w - side) // 2,
                                    r.y + (r.h - side) // 2, side, side))
        hr_img = Image2D(hr_img.pixels + rng.normal(0, 30.0, hr_img.shape),
                         hr_img.valid_mask)
        ts = base_ts + timedelta(seconds=60 * lr_idx + sec)
        header_angle = theta + float(rng.uniform(-0.5, 0.5))
        cards = [Card.make("DATE-OBS", format_timestamp(ts)),
                 Card.make("CDELT1", 0.5),
                 Card.make("ROT_ANG", header_angle)]
        path = hr_dir / f"gst_{k:03d}.fits"
        path.write_bytes(write_fits(hr_img, cards, bitpix=-64))
        hr_paths.append(path)
        hr_truth.append({"lr_idx": lr_idx, "theta": theta, "u": u})

    cfg = GeneratorConfig(in_channels=1, out_channels=1, base_features=8,
                          num_rrdb=1, growth_channels=4, residual_scale=0.2,
                          scale_factor=2)
    ckpt_path = root / "tiny.ckpt"
    ckpt_path.write_bytes(save_checkpoint(random_checkpoint(cfg, seed=seed)))

    out_dir = Path(output_dir) if output_dir is not None else root / "out"
    config_path = root / "pipeline.cfg"
    config_path.write_text(CONFIG_TEMPLATE.format(
        checkpoint=ckpt_path, lr_dir=lr_dir, hr_dir=hr_dir, output_dir=out_dir,
    ))
    return {
        "config": config_path,
        "lr_dir": lr_dir,
        "hr_dir": hr_dir,
        "output_dir": out_dir,
        "checkpoint": ckpt_path,
        "jitters": jitters,
        "hr_truth": hr_truth,
        "lr_paths": lr_paths,
        "hr_paths": hr_paths,
    }
