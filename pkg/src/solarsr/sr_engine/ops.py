"""Float32 NCHW tensor primitives for generator inference."""

from __future__ import annotations

import numpy as np

from ..errors import NonFiniteInput, ShapeMismatch


def as_tensor(data) -> np.ndarray:
    """Validate and convert to a float32 NCHW array."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim != 4:
        raise ShapeMismatch(f"tensor must be 4-D (n, c, h, w), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("tensor contains NaN or Inf")
    return arr


def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None,
           padding: int) -> np.ndarray:
    """Stride-1 cross-correlation with zero padding.

    weight has shape (out_c, in_c, kh, kw); spatial size is preserved when
    padding == k // 2 for odd k.
    """
    if x.ndim != 4:
        raise ShapeMismatch(f"input must be 4-D, got shape {x.shape}")
    if weight.ndim != 4:
        raise ShapeMismatch(f"weight must be 4-D, got shape {weight.shape}")
    n, c, h, w = x.shape
    out_c, in_c, kh, kw = weight.shape
    if c != in_c:
        raise ShapeMismatch(f"input has {c} channels, weight expects {in_c}")
    if bias is not None and bias.shape != (out_c,):
        raise ShapeMismatch(f"bias shape {bias.shape} != ({out_c},)")
    if padding < 0:
        raise ValueError(f"padding must be >= 0, got {padding}")

    if padding:
        xp = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=np.float32)
        xp[:, :, padding:padding + h, padding:padding + w] = x
    else:
        xp = x
    out_h = xp.shape[2] - kh + 1
    out_w = xp.shape[3] - kw + 1
    if out_h < 1 or out_w < 1:
        raise ShapeMismatch(f"kernel {kh}x{kw} larger than padded input")

    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    cols = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5))
    cols = cols.reshape(n * out_h * out_w, c * kh * kw)
    flat_w = weight.reshape(out_c, c * kh * kw).astype(np.float32)
    out = cols @ flat_w.T
    if bias is not None:
        out += bias.astype(np.float32)
    return np.ascontiguousarray(
        out.reshape(n, out_h, out_w, out_c).transpose(0, 3, 1, 2)
    )


def leaky_relu(x: np.ndarray, slope: float = 0.2) -> np.ndarray:
    return np.where(x >= 0, x, np.float32(slope) * x)


def upsample_nearest2x(x: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)
