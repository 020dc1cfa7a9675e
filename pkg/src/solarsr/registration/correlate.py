"""Temporal alignment by exhaustive integer-shift cross-correlation search.

The score is the Pearson correlation of the overlapping valid pixels; a
candidate shift (dx, dy) means the moving image equals the reference
translated by (dx, dy). The default path evaluates every candidate with a
masked FFT correlation (all the Pearson sufficient statistics are linear
cross-correlations); the direct sliding-window evaluation is kept as the
slow reference path and must select the same shift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft

from ..errors import DegenerateImage, InsufficientOverlap, ShapeMismatch
from ..image import Image2D, shift_image

_MIN_OVERLAP_FRACTION = 0.25
_VAR_EPS = 1e-12


@dataclass(frozen=True)
class Shift:
    """Integer shift of the moving image relative to the reference."""

    dx: int
    dy: int
    score: float


def _check_inputs(reference: Image2D, moving: Image2D, max_shift: int):
    if reference.shape != moving.shape:
        raise ShapeMismatch(
            f"reference {reference.shape} vs moving {moving.shape}"
        )
    if max_shift < 0:
        raise ValueError(f"max_shift must be >= 0, got {max_shift}")
    h, w = reference.shape
    if (h - max_shift) * (w - max_shift) < _MIN_OVERLAP_FRACTION * h * w:
        raise InsufficientOverlap(
            f"max_shift {max_shift} leaves under 25% overlap for {h}x{w} frames"
        )


def _select_best(scores: np.ndarray, defined: np.ndarray, max_shift: int) -> Shift:
    """Pick the maximizing shift; ties by |dx|+|dy|, then dy, then dx."""
    if not defined.any():
        raise DegenerateImage("correlation undefined at every candidate shift")
    masked = np.where(defined, scores, -np.inf)
    best_score = masked.max()
    ties = np.argwhere(masked == best_score)
    offsets = ties - max_shift  # rows are (dy, dx)
    keys = (np.abs(offsets).sum(axis=1), offsets[:, 0], offsets[:, 1])
    order = np.lexsort((keys[2], keys[1], keys[0]))
    dy, dx = offsets[order[0]]
    return Shift(int(dx), int(dy), float(best_score))


def _score_grid_direct(reference: Image2D, moving: Image2D, max_shift: int):
    h, w = reference.shape
    ref = np.where(reference.valid_mask, reference.pixels, 0.0)
    mov = np.where(moving.valid_mask, moving.pixels, 0.0)
    size = 2 * max_shift + 1
    scores = np.full((size, size), -np.inf)
    defined = np.zeros((size, size), dtype=bool)
    for dy in range(-max_shift, max_shift + 1):
        ref_y = slice(max(0, -dy), min(h, h - dy))
        mov_y = slice(max(0, dy), min(h, h + dy))
        for dx in range(-max_shift, max_shift + 1):
            ref_x = slice(max(0, -dx), min(w, w - dx))
            mov_x = slice(max(0, dx), min(w, w + dx))
            joint = reference.valid_mask[ref_y, ref_x] & moving.valid_mask[mov_y, mov_x]
            n = int(joint.sum())
            if n < 2:
                continue
            a = ref[ref_y, ref_x][joint]
            b = mov[mov_y, mov_x][joint]
            va = a - a.mean()
            vb = b - b.mean()
            var_a = float(va @ va)
            var_b = float(vb @ vb)
            if var_a <= _VAR_EPS or var_b <= _VAR_EPS:
                continue
            r = float(va @ vb) / np.sqrt(var_a * var_b)
            scores[dy + max_shift, dx + max_shift] = min(1.0, max(-1.0, r))
            defined[dy + max_shift, dx + max_shift] = True
    return scores, defined


def _score_grid_fft(reference: Image2D, moving: Image2D, max_shift: int):
    """Masked Pearson correlation at every lag via FFT cross-correlations."""
    h, w = reference.shape
    pad_h = sp_fft.next_fast_len(h + max_shift)
    pad_w = sp_fft.next_fast_len(w + max_shift)

    m1 = reference.valid_mask.astype(np.float64)
    m2 = moving.valid_mask.astype(np.float64)
    f1 = np.where(reference.valid_mask, reference.pixels, 0.0)
    f2 = np.where(moving.valid_mask, moving.pixels, 0.0)

    def fwd(a):
        return sp_fft.rfft2(a, s=(pad_h, pad_w))

    def corr(fa_conj, fb):
        # correlation c(dy, dx) = sum_x a(x) * b(x + d)
        return sp_fft.irfft2(fa_conj * fb, s=(pad_h, pad_w))

    c_m1 = np.conj(fwd(m1))
    c_f1 = np.conj(fwd(f1))
    c_q1 = np.conj(fwd(f1 * f1))
    t_m2 = fwd(m2)
    t_f2 = fwd(f2)
    t_q2 = fwd(f2 * f2)

    n = corr(c_m1, t_m2)
    s1 = corr(c_f1, t_m2)
    s2 = corr(c_m1, t_f2)
    prod = corr(c_f1, t_f2)
    q1 = corr(c_q1, t_m2)
    q2 = corr(c_m1, t_q2)

    # gather the (2m+1)^2 window of lags around zero
    idx_y = np.arange(-max_shift, max_shift + 1) % pad_h
    idx_x = np.arange(-max_shift, max_shift + 1) % pad_w

    def window(a):
        return a[np.ix_(idx_y, idx_x)]

    n_w = np.rint(window(n))
    s1_w = window(s1)
    s2_w = window(s2)
    p_w = window(prod)
    q1_w = window(q1)
    q2_w = window(q2)

    # variance below FFT roundoff (relative to the raw second moment) is
    # treated as zero so constant regions stay undefined
    rel_eps = 1e-9
    with np.errstate(invalid="ignore", divide="ignore"):
        cov = p_w - s1_w * s2_w / n_w
        var1 = q1_w - s1_w * s1_w / n_w
        var2 = q2_w - s2_w * s2_w / n_w
        defined = (
            (n_w >= 2)
            & (var1 > rel_eps * np.abs(q1_w) + _VAR_EPS)
            & (var2 > rel_eps * np.abs(q2_w) + _VAR_EPS)
        )
        scores = np.where(defined, cov / np.sqrt(np.maximum(var1 * var2, 1e-300)), -np.inf)
    scores = np.clip(scores, -1.0, 1.0, out=scores)
    return scores, defined


def find_shift(
    reference: Image2D,
    moving: Image2D,
    max_shift: int = 30,
    method: str = "fft",
) -> Shift:
    """Integer (dx, dy) in [-max_shift, max_shift]^2 maximizing the Pearson
    correlation over the overlapping valid pixels.

    method "fft" (default) and "direct" must select the same shift; "direct"
    is the O(max_shift^2 * H * W) reference evaluation.
    """
    _check_inputs(reference, moving, max_shift)
    if method == "fft":
        scores, defined = _score_grid_fft(reference, moving, max_shift)
    elif method == "direct":
        scores, defined = _score_grid_direct(reference, moving, max_shift)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _select_best(scores, defined, max_shift)


def align_sequence(
    frames: list[Image2D],
    max_shift: int = 30,
    passes: int = 3,
    method: str = "fft",
) -> list[Shift]:
    """Cumulative shift of every frame relative to frame 0.

    Each pass measures neighbor-to-neighbor shifts on the currently aligned
    frames and accumulates them along the chain; frames are re-shifted
    between passes. Stops early once a pass measures all-zero shifts.
    """
    if not frames:
        raise ValueError("frames must be non-empty")
    shapes = {f.shape for f in frames}
    if len(shapes) > 1:
        raise ShapeMismatch(f"frames have mixed dimensions: {sorted(shapes)}")
    n = len(frames)
    cum_dx = [0] * n
    cum_dy = [0] * n
    scores = [1.0] * n

    for _ in range(max(1, passes)):
        work = [
            shift_image(frames[i], -cum_dx[i], -cum_dy[i])
            if (cum_dx[i] or cum_dy[i]) else frames[i]
            for i in range(n)
        ]
        residual_dx = 0
        residual_dy = 0
        all_zero = True
        for i in range(1, n):
            try:
                s = find_shift(work[i - 1], work[i], max_shift, method)
            except (DegenerateImage, InsufficientOverlap, ShapeMismatch) as exc:
                raise type(exc)(f"frame {i}: {exc}") from exc
            residual_dx += s.dx
            residual_dy += s.dy
            if s.dx or s.dy:
                all_zero = False
            cum_dx[i] += residual_dx
            cum_dy[i] += residual_dy
            scores[i] = s.score
        if all_zero:
            break
    return [Shift(cum_dx[i], cum_dy[i], scores[i]) for i in range(n)]
