"""Integer-shift search: exact recovery, tie-breaking, FFT/direct agreement."""

import numpy as np
import pytest

from solarsr.errors import DegenerateImage, InsufficientOverlap, ShapeMismatch
from solarsr.image import Image2D, shift_image
from solarsr.registration import align_sequence, find_shift


def rolled(ref: Image2D, dx: int, dy: int) -> Image2D:
    """Circular roll with the rolled-in edges masked invalid."""
    pix = np.roll(ref.pixels, (dy, dx), axis=(0, 1))
    mask = np.ones_like(pix, dtype=bool)
    if dy > 0:
        mask[:dy, :] = False
    elif dy < 0:
        mask[dy:, :] = False
    if dx > 0:
        mask[:, :dx] = False
    elif dx < 0:
        mask[:, dx:] = False
    return Image2D(pix, mask)


@pytest.fixture(scope="module")
def texture128():
    rng = np.random.default_rng(42)
    return Image2D(rng.normal(1000.0, 50.0, (128, 128)))


class TestFindShift:
    def test_identical_images(self, texture128):
        s = find_shift(texture128, texture128.copy())
        assert (s.dx, s.dy) == (0, 0)
        assert s.score == pytest.approx(1.0, abs=1e-12)

    def test_roll_recovery(self, texture128):
        s = find_shift(texture128, rolled(texture128, 5, -12))
        assert (s.dx, s.dy) == (5, -12)
        assert s.score > 0.99

    @pytest.mark.parametrize("method", ["fft", "direct"])
    def test_extreme_shifts(self, texture128, method):
        for dx, dy in [(30, 30), (-30, -30), (30, -30), (0, 30)]:
            s = find_shift(texture128, rolled(texture128, dx, dy), method=method)
            assert (s.dx, s.dy) == (dx, dy)

    def test_constant_moving_image(self, texture128):
        flat = Image2D(np.full((128, 128), 7.0))
        with pytest.raises(DegenerateImage):
            find_shift(texture128, flat)

    def test_insufficient_overlap(self):
        img = Image2D(np.random.default_rng(0).normal(0, 1, (16, 16)))
        with pytest.raises(InsufficientOverlap):
            find_shift(img, img.copy(), max_shift=10)

    def test_shape_mismatch(self, texture128):
        other = Image2D(np.zeros((64, 64)))
        with pytest.raises(ShapeMismatch):
            find_shift(texture128, other)

    def test_tie_break_prefers_smallest_shift(self):
        # 4-periodic texture ties (0,0) with (+-4,0),(0,+-4),...
        rng = np.random.default_rng(3)
        tile = rng.normal(0, 1, (4, 4))
        img = Image2D(np.tile(tile, (16, 16)))
        s = find_shift(img, img.copy(), max_shift=8, method="direct")
        assert (s.dx, s.dy) == (0, 0)

    @pytest.mark.parametrize("seed", range(6))
    def test_fft_matches_direct(self, seed):
        """The fast path must select the same shift as the reference path."""
        rng = np.random.default_rng(seed)
        a_pix = rng.normal(100.0, 20.0, (48, 48))
        b = rolled(Image2D(a_pix), int(rng.integers(-9, 10)),
                   int(rng.integers(-9, 10)))
        # poke extra invalid holes into both masks
        a_mask = rng.random((48, 48)) > 0.05
        b_mask = b.valid_mask & (rng.random((48, 48)) > 0.05)
        a = Image2D(a_pix, a_mask)
        b = Image2D(b.pixels, b_mask)
        s_fft = find_shift(a, b, max_shift=10, method="fft")
        s_dir = find_shift(a, b, max_shift=10, method="direct")
        assert (s_fft.dx, s_fft.dy) == (s_dir.dx, s_dir.dy)
        assert s_fft.score == pytest.approx(s_dir.score, abs=1e-9)

    @pytest.mark.parametrize("dx,dy", [(-30, 17), (8, 0), (-1, -1), (23, -30)])
    def test_shift_recovery_samples(self, texture128, dx, dy):
        s = find_shift(texture128, rolled(texture128, dx, dy))
        assert (s.dx, s.dy) == (dx, dy)


class TestAlignSequence:
    def test_identical_frames(self, texture128):
        shifts = align_sequence([texture128.copy() for _ in range(5)])
        assert all((s.dx, s.dy) == (0, 0) for s in shifts)

    def test_single_frame(self, texture128):
        shifts = align_sequence([texture128])
        assert len(shifts) == 1 and (shifts[0].dx, shifts[0].dy) == (0, 0)

    def test_jitter_recovered_in_one_pass(self, texture128):
        jitter = [(0, 0), (3, 1), (-2, 4), (0, -5)]
        frames = [rolled(texture128, dx, dy) for dx, dy in jitter]
        shifts = align_sequence(frames, passes=1)
        assert [(s.dx, s.dy) for s in shifts] == jitter

    def test_iterative_stability(self, texture128):
        jitter = [(0, 0), (3, 1), (-2, 4), (0, -5)]
        frames = [rolled(texture128, dx, dy) for dx, dy in jitter]
        shifts = align_sequence(frames, passes=3)
        aligned = [shift_image(f, -s.dx, -s.dy) for f, s in zip(frames, shifts)]
        again = align_sequence(aligned, passes=1)
        assert all((s.dx, s.dy) == (0, 0) for s in again)

    def test_error_carries_frame_index(self, texture128):
        frames = [texture128.copy(), texture128.copy(),
                  Image2D(np.full((128, 128), 3.0))]
        with pytest.raises(DegenerateImage, match="frame 2"):
            align_sequence(frames)

    def test_mixed_dimensions_rejected(self, texture128):
        with pytest.raises(ShapeMismatch):
            align_sequence([texture128, Image2D(np.zeros((64, 64)))])
