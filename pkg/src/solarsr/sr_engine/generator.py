"""Forward pass of the residual-in-residual dense-block generator.

Topology: head conv -> N RRDB blocks -> trunk conv with a global residual
add -> log2(scale) stages of (nearest 2x upsample, conv, leaky ReLU) ->
penultimate conv + leaky ReLU -> output conv. No batch normalization
anywhere. Each RRDB chains three dense blocks; a dense block is five 3x3
convs over concatenated inputs with leaky ReLU (slope 0.2) on all but the
last, closed by a residual add scaled by beta.

Parameter names are dot-delimited; the mapping to the public Real-ESRGAN
RRDBNet naming is:

    head          <-> conv_first
    body.{i}.db{j}.conv{k} <-> body.{i}.rdb{j}.conv{k}
    trunk         <-> conv_body
    up.{j}        <-> conv_up{j+1}
    hr_conv       <-> conv_hr
    out_conv      <-> conv_last
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import IncompatibleCheckpoint, InvalidRegionPresent, ShapeMismatch
from ..image import Image2D
from .ops import as_tensor, conv2d, leaky_relu, upsample_nearest2x

LEAKY_SLOPE = 0.2


@dataclass(frozen=True)
class GeneratorConfig:
    """Architecture hyperparameters; defaults follow the ESRGAN lineage."""

    in_channels: int = 1
    out_channels: int = 1
    base_features: int = 64
    num_rrdb: int = 23
    growth_channels: int = 32
    residual_scale: float = 0.2
    scale_factor: int = 4

    def __post_init__(self):
        for name in ("in_channels", "out_channels", "base_features",
                     "num_rrdb", "growth_channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 < self.residual_scale <= 1.0:
            raise ValueError(
                f"residual_scale must be in (0, 1], got {self.residual_scale}"
            )
        if self.scale_factor not in (1, 2, 4, 8):
            raise ValueError(
                f"scale_factor must be a power of two in {{1,2,4,8}}, "
                f"got {self.scale_factor}"
            )

    @property
    def num_upsample_stages(self) -> int:
        return self.scale_factor.bit_length() - 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        return cls(**data)


def parameter_shapes(config: GeneratorConfig) -> dict[str, tuple[int, ...]]:
    """Canonical (name -> shape) map of every generator parameter."""
    f = config.base_features
    g = config.growth_channels
    shapes: dict[str, tuple[int, ...]] = {}

    def conv(name, out_c, in_c):
        shapes[f"{name}.weight"] = (out_c, in_c, 3, 3)
        shapes[f"{name}.bias"] = (out_c,)

    conv("head", f, config.in_channels)
    for i in range(config.num_rrdb):
        for j in range(1, 4):
            for k in range(1, 5):
                conv(f"body.{i}.db{j}.conv{k}", g, f + (k - 1) * g)
            conv(f"body.{i}.db{j}.conv5", f, f + 4 * g)
    conv("trunk", f, f)
    for j in range(config.num_upsample_stages):
        conv(f"up.{j}", f, f)
    conv("hr_conv", f, f)
    conv("out_conv", config.out_channels, f)
    return shapes


def _dense_block(x: np.ndarray, params, prefix: str, beta: float) -> np.ndarray:
    feats = [x]
    for k in range(1, 5):
        cat = np.concatenate(feats, axis=1) if len(feats) > 1 else x
        out = conv2d(cat, params[f"{prefix}.conv{k}.weight"],
                     params[f"{prefix}.conv{k}.bias"], padding=1)
        feats.append(leaky_relu(out, LEAKY_SLOPE))
    cat = np.concatenate(feats, axis=1)
    last = conv2d(cat, params[f"{prefix}.conv5.weight"],
                  params[f"{prefix}.conv5.bias"], padding=1)
    return x + np.float32(beta) * last


def rrdb_forward(x: np.ndarray, params, beta: float, prefix: str = "") -> np.ndarray:
    """One residual-in-residual dense block; shape preserving.

    `params` maps names like "{prefix}db1.conv1.weight" to arrays.
    """
    x = as_tensor(x)
    out = x
    for j in range(1, 4):
        out = _dense_block(out, params, f"{prefix}db{j}", beta)
    return x + np.float32(beta) * out


def generator_forward(lr: np.ndarray, ckpt) -> np.ndarray:
    """Run the generator; output shape is (n, out_channels, h*s, w*s)."""
    from .checkpoint import Checkpoint  # local import to avoid a cycle

    if not isinstance(ckpt, Checkpoint):
        raise IncompatibleCheckpoint("expected a Checkpoint instance")
    ckpt.validate()
    config = ckpt.config
    params = ckpt.params
    x = as_tensor(lr)
    if x.shape[1] != config.in_channels:
        raise ShapeMismatch(
            f"input has {x.shape[1]} channels, generator expects {config.in_channels}"
        )

    fea = conv2d(x, params["head.weight"], params["head.bias"], padding=1)
    out = fea
    for i in range(config.num_rrdb):
        out = rrdb_forward(out, params, config.residual_scale, prefix=f"body.{i}.")
    out = conv2d(out, params["trunk.weight"], params["trunk.bias"], padding=1)
    fea = fea + out
    for j in range(config.num_upsample_stages):
        fea = upsample_nearest2x(fea)
        fea = leaky_relu(
            conv2d(fea, params[f"up.{j}.weight"], params[f"up.{j}.bias"], padding=1),
            LEAKY_SLOPE,
        )
    fea = leaky_relu(
        conv2d(fea, params["hr_conv.weight"], params["hr_conv.bias"], padding=1),
        LEAKY_SLOPE,
    )
    return conv2d(fea, params["out_conv.weight"], params["out_conv.bias"], padding=1)


def random_checkpoint(config: GeneratorConfig, seed: int = 0,
                      weight_scale: float = 0.1):
    """Seeded small-weight checkpoint, mainly for tests and smoke runs."""
    from .checkpoint import Checkpoint

    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".weight"):
            fan_in = int(np.prod(shape[1:]))
            std = weight_scale / np.sqrt(fan_in)
        else:
            std = weight_scale * 0.1
        params[name] = rng.normal(0.0, std, size=shape).astype(np.float32)
    return Checkpoint(params=params, config=config)


# ---------------------------------------------------------------------------
# image-level inference
# ---------------------------------------------------------------------------

def _blend_weights(length: int, overlap: int, start: bool, end: bool) -> np.ndarray:
    w = np.ones(length, dtype=np.float64)
    ramp = (np.arange(1, overlap + 1)) / (overlap + 1)
    if start and overlap and length >= overlap:
        w[:overlap] = ramp
    if end and overlap and length >= overlap:
        w[-overlap:] = ramp[::-1]
    return w


def apply_generator(
    image: Image2D,
    ckpt,
    normalization_max: float,
    tile: int | None = None,
    tile_overlap: int = 8,
) -> Image2D:
    """Super-resolve a fully valid image.

    Values are divided by `normalization_max` before inference and scaled
    back afterwards. With `tile` set, the frame is processed in overlapping
    tiles cross-faded with linear ramps; the blend is deterministic and
    independent of tile order.
    """
    if not image.all_valid():
        raise InvalidRegionPresent("generator input must be fully valid; crop first")
    if normalization_max <= 0:
        raise ValueError(f"normalization_max must be positive, got {normalization_max}")
    config = ckpt.config
    s = config.scale_factor
    h, w = image.shape
    norm = (image.pixels / normalization_max).astype(np.float32)

    if tile is None or (h <= tile and w <= tile):
        x = norm[np.newaxis, np.newaxis, :, :]
        y = generator_forward(x, ckpt)[0, 0]
        return Image2D(y.astype(np.float64) * normalization_max)

    if tile <= 2 * tile_overlap:
        raise ValueError(f"tile size {tile} must exceed twice the overlap")
    step = tile - tile_overlap
    out = np.zeros((h * s, w * s), dtype=np.float64)
    weight = np.zeros((h * s, w * s), dtype=np.float64)
    y_starts = list(range(0, max(h - tile_overlap, 1), step))
    x_starts = list(range(0, max(w - tile_overlap, 1), step))
    for y0 in y_starts:
        y1 = min(y0 + tile, h)
        for x0 in x_starts:
            x1 = min(x0 + tile, w)
            patch = norm[np.newaxis, np.newaxis, y0:y1, x0:x1]
            sr = generator_forward(patch, ckpt)[0, 0].astype(np.float64)
            wy = _blend_weights((y1 - y0) * s, tile_overlap * s, y0 > 0, y1 < h)
            wx = _blend_weights((x1 - x0) * s, tile_overlap * s, x0 > 0, x1 < w)
            wgt = np.outer(wy, wx)
            out[y0 * s:y1 * s, x0 * s:x1 * s] += sr * wgt
            weight[y0 * s:y1 * s, x0 * s:x1 * s] += wgt
    out = np.divide(out, weight, out=out, where=weight > 0)
    return Image2D(out * normalization_max)
