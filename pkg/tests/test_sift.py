"""Keypoint detection and descriptor matching on synthetic textures."""

import numpy as np
import pytest

from solarsr.errors import TooFewKeypoints
from solarsr.image import Image2D
from solarsr.registration import detect_and_match, detect_keypoints

from synth import texture


@pytest.fixture(scope="module")
def tex():
    return Image2D(texture(0, 192, smooth=2.0))


class TestDetect:
    def test_finds_many_keypoints(self, tex):
        kps = detect_keypoints(tex)
        assert len(kps) > 100

    def test_descriptors_unit_normalized(self, tex):
        kps = detect_keypoints(tex)
        norms = np.array([np.linalg.norm(k.descriptor) for k in kps])
        assert np.all(np.abs(norms - 1.0) < 1e-6)

    def test_coordinates_inside_bounds(self, tex):
        for k in detect_keypoints(tex):
            assert 0 <= k.x <= tex.width - 1
            assert 0 <= k.y <= tex.height - 1
            assert k.scale > 0

    def test_flat_image_has_no_keypoints(self):
        assert detect_keypoints(Image2D(np.full((96, 96), 5.0))) == []

    def test_detection_restricted_to_valid_region(self, tex):
        mask = np.zeros(tex.shape, dtype=bool)
        mask[40:160, 30:150] = True
        masked = Image2D(tex.pixels, mask)
        for k in detect_keypoints(masked):
            assert 30 <= k.x <= 149 and 40 <= k.y <= 159


class TestMatch:
    def test_self_match(self, tex):
        matches = detect_and_match(tex, tex)
        assert len(matches) >= 20
        disp = np.array([[b.x - a.x, b.y - a.y] for a, b in matches])
        assert np.allclose(np.median(disp, axis=0), [0.0, 0.0], atol=1e-9)

    def test_integer_translation_recovered(self):
        big = texture(1, 256)
        a = Image2D(big[20:210, 20:210].copy())
        # b content at (x, y) equals a content at (x - 8, y + 3)
        b = Image2D(big[23:213, 12:202].copy())
        matches = detect_and_match(a, b)
        assert len(matches) >= 20
        disp = np.array([[kb.x - ka.x, kb.y - ka.y] for ka, kb in matches])
        med = np.median(disp, axis=0)
        assert abs(med[0] - 8.0) < 0.5 and abs(med[1] + 3.0) < 0.5

    def test_independent_noise_fields_fail(self):
        n1 = Image2D(np.random.default_rng(10).normal(0, 1, (128, 128)))
        n2 = Image2D(np.random.default_rng(11).normal(0, 1, (128, 128)))
        with pytest.raises(TooFewKeypoints):
            detect_and_match(n1, n2)

    def test_small_valid_region_rejected(self, tex):
        mask = np.zeros(tex.shape, dtype=bool)
        mask[:40, :40] = True
        with pytest.raises(TooFewKeypoints):
            detect_and_match(Image2D(tex.pixels, mask), tex)

    def test_rotation_invariance(self):
        from solarsr.registration import rotate_and_mask
        img = Image2D(texture(2, 200, smooth=2.0))
        rot = rotate_and_mask(img, 30.0)
        matches = detect_and_match(img, rot)
        assert len(matches) >= 20
