"""Relativistic-average losses, perceptual loss, combined loss."""

import math

import mpmath
import numpy as np
import pytest

from solarsr.errors import NonFiniteInput, ShapeMismatch
from solarsr.losses import (
    CriticScores,
    LossWeights,
    combined_generator_loss,
    perceptual_loss,
    pixel_l1_loss,
    ra_discriminator_loss,
    ra_discriminator_loss_grad,
    ra_generator_loss,
    ra_generator_loss_grad,
)

TWO_LN_TWO = 2.0 * math.log(2.0)


def _mp_disc_loss(real, fake):
    """Closed form evaluated with 50-digit arithmetic."""
    mpmath.mp.dps = 50
    real = [mpmath.mpf(v) for v in real]
    fake = [mpmath.mpf(v) for v in fake]
    mr = sum(real) / len(real)
    mf = sum(fake) / len(fake)
    sig = lambda z: 1 / (1 + mpmath.exp(-z))
    t1 = -sum(mpmath.log(sig(r - mf)) for r in real) / len(real)
    t2 = -sum(mpmath.log(1 - sig(f - mr)) for f in fake) / len(fake)
    return float(t1 + t2)


class TestRaLosses:
    def test_symmetric_case_is_two_ln_two(self):
        scores = CriticScores([0.0], [0.0])
        assert ra_discriminator_loss(scores) == pytest.approx(TWO_LN_TWO, abs=1e-9)
        assert ra_generator_loss(scores) == pytest.approx(TWO_LN_TWO, abs=1e-9)

    def test_confident_discriminator(self):
        scores = CriticScores([20.0], [-20.0])
        assert ra_discriminator_loss(scores) < 1e-8
        assert ra_discriminator_loss(scores) == pytest.approx(
            _mp_disc_loss([20.0], [-20.0]), abs=1e-12)

    def test_fooled_discriminator(self):
        scores = CriticScores([-20.0], [20.0])
        loss = ra_discriminator_loss(scores)
        assert loss == pytest.approx(80.0, abs=0.1)
        assert loss == pytest.approx(_mp_disc_loss([-20.0], [20.0]), rel=1e-12)

    def test_generator_penalized_when_discriminator_confident(self):
        assert ra_generator_loss(CriticScores([20.0], [-20.0])) == \
            pytest.approx(80.0, abs=0.1)

    def test_role_swap_symmetry_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            r = rng.normal(0, 3, rng.integers(1, 6))
            f = rng.normal(0, 3, rng.integers(1, 6))
            assert ra_generator_loss(CriticScores(r, f)) == \
                ra_discriminator_loss(CriticScores(f, r))

    def test_equal_scores_give_two_ln_two(self):
        for c in (-5.0, 0.0, 17.5):
            scores = CriticScores([c, c, c], [c, c])
            assert ra_discriminator_loss(scores) == pytest.approx(TWO_LN_TWO, abs=1e-9)
            assert ra_generator_loss(scores) == pytest.approx(TWO_LN_TWO, abs=1e-9)

    def test_losses_nonnegative(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            scores = CriticScores(rng.normal(0, 10, 4), rng.normal(0, 10, 4))
            assert ra_discriminator_loss(scores) >= 0.0
            assert ra_generator_loss(scores) >= 0.0

    def test_finite_at_extreme_scores(self):
        for mag in (1e2, 1e3, 1e4):
            scores = CriticScores([mag, -mag, mag / 3], [-mag, mag, 0.0])
            assert math.isfinite(ra_discriminator_loss(scores))
            assert math.isfinite(ra_generator_loss(scores))

    def test_nonfinite_input_rejected(self):
        with pytest.raises(NonFiniteInput):
            CriticScores([float("nan")], [0.0])
        with pytest.raises(NonFiniteInput):
            CriticScores([], [1.0])


class TestGradients:
    @pytest.mark.parametrize("trial", range(20))
    def test_finite_difference_agreement(self, trial):
        rng = np.random.default_rng(trial)
        nr = int(rng.integers(1, 6))
        nf = int(rng.integers(1, 6))
        real = rng.normal(0, 2, nr)
        fake = rng.normal(0, 2, nf)
        eps = 1e-6
        for loss_fn, grad_fn in (
            (ra_discriminator_loss, ra_discriminator_loss_grad),
            (ra_generator_loss, ra_generator_loss_grad),
        ):
            g_real, g_fake = grad_fn(CriticScores(real, fake))
            for which, scores, grad in (("real", real, g_real),
                                        ("fake", fake, g_fake)):
                for i in range(len(scores)):
                    plus = scores.copy()
                    minus = scores.copy()
                    plus[i] += eps
                    minus[i] -= eps
                    if which == "real":
                        fd = (loss_fn(CriticScores(plus, fake))
                              - loss_fn(CriticScores(minus, fake))) / (2 * eps)
                    else:
                        fd = (loss_fn(CriticScores(real, plus))
                              - loss_fn(CriticScores(real, minus))) / (2 * eps)
                    denom = max(abs(fd), 1e-8)
                    assert abs(grad[i] - fd) / denom < 1e-4


class TestPerceptual:
    def test_zero_for_identical_inputs(self):
        x = np.random.default_rng(0).normal(0, 1, (1, 1, 4, 4))
        assert perceptual_loss(lambda t: t, x, x) == 0.0

    def test_identity_extractor_equals_l1(self):
        rng = np.random.default_rng(1)
        a = rng.normal(0, 1, (1, 2, 3, 3))
        b = rng.normal(0, 1, (1, 2, 3, 3))
        assert perceptual_loss(lambda t: t, a, b) == pytest.approx(
            pixel_l1_loss(a, b), abs=1e-15)

    def test_single_conv_extractor_hand_computed(self):
        # extractor: 2x2 valid conv with kernel [[1, -1], [0, 2]]
        kernel = np.array([[1.0, -1.0], [0.0, 2.0]])

        def extractor(t):
            img = t[0, 0]
            out = np.zeros((1, 1, 1, 1))
            out[0, 0, 0, 0] = (img[:2, :2] * kernel).sum()
            return out

        a = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        b = np.array([[[[2.0, 2.0], [3.0, 1.0]]]])
        # features: a -> 1-2+8 = 7; b -> 2-2+2 = 2; |7-2| = 5
        assert perceptual_loss(extractor, a, b) == pytest.approx(5.0, abs=1e-12)

    def test_multi_stage_stages_weigh_equally(self):
        a = np.zeros((1, 1, 2, 2))
        b = np.ones((1, 1, 2, 2))
        extractor = lambda t: [t, np.full((1, 1, 8, 8), t.mean())]
        assert perceptual_loss(extractor, a, b) == pytest.approx(1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            perceptual_loss(lambda t: t, np.zeros((1, 1, 2, 2)),
                            np.zeros((1, 1, 3, 3)))


class TestCombined:
    def test_zero_weights_return_perceptual(self):
        w = LossWeights(lambda_adv=0.0, eta_pixel=0.0)
        assert combined_generator_loss(1.7, 99.0, 42.0, w) == 1.7

    def test_weighted_sum(self):
        w = LossWeights(lambda_adv=0.1, eta_pixel=0.01)
        assert combined_generator_loss(1.0, 2.0, 3.0, w) == pytest.approx(1.23)

    def test_homogeneity(self):
        w = LossWeights(lambda_adv=0.3, eta_pixel=0.7)
        one = combined_generator_loss(1.0, 2.0, 3.0, w)
        two = combined_generator_loss(2.0, 4.0, 6.0, w)
        assert two == pytest.approx(2 * one)

    def test_nonfinite_rejected(self):
        w = LossWeights(lambda_adv=1.0, eta_pixel=1.0)
        with pytest.raises(NonFiniteInput):
            combined_generator_loss(float("inf"), 0.0, 0.0, w)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            LossWeights(lambda_adv=-1.0, eta_pixel=0.0)
