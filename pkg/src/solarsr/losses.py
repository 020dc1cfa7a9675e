"""Adversarial, perceptual, and combined generator loss kernels.

The relativistic-average losses compare each critic score against the mean
score of the opposite population:

    D(x_r, x_f) = sigmoid(C(x_r) - mean C(x_f))
    D(x_f, x_r) = sigmoid(C(x_f) - mean C(x_r))

Both losses are evaluated through softplus identities,
log(sigmoid(z)) = -softplus(-z) and log(1 - sigmoid(z)) = -softplus(z),
so they stay finite for |scores| well beyond 1e4. Analytic gradients are
exposed so the kernels can be checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteInput, ShapeMismatch


@dataclass
class CriticScores:
    """Raw critic outputs for real and generated samples."""

    real: np.ndarray
    fake: np.ndarray

    def __post_init__(self):
        self.real = np.atleast_1d(np.asarray(self.real, dtype=np.float64))
        self.fake = np.atleast_1d(np.asarray(self.fake, dtype=np.float64))
        if self.real.size == 0 or self.fake.size == 0:
            raise NonFiniteInput("score vectors must be non-empty")
        if not (np.all(np.isfinite(self.real)) and np.all(np.isfinite(self.fake))):
            raise NonFiniteInput("critic scores contain NaN or Inf")


@dataclass
class LossWeights:
    """Adversarial and pixel-loss weights of the combined generator loss.

    No defaults: the values are experiment configuration. Conventional
    ESRGAN-lineage choices are 5e-3 (adversarial) and 1e-2 (pixel).
    """

    lambda_adv: float
    eta_pixel: float

    def __post_init__(self):
        if self.lambda_adv < 0 or self.eta_pixel < 0:
            raise ValueError("loss weights must be non-negative")


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _relative_logits(scores: CriticScores):
    zr = scores.real - scores.fake.mean()
    zf = scores.fake - scores.real.mean()
    return zr, zf


def ra_discriminator_loss(scores: CriticScores) -> float:
    """-mean log D(x_r, x_f) - mean log(1 - D(x_f, x_r))."""
    zr, zf = _relative_logits(scores)
    return float(_softplus(-zr).mean() + _softplus(zf).mean())


def ra_generator_loss(scores: CriticScores) -> float:
    """-mean log(1 - D(x_r, x_f)) - mean log D(x_f, x_r)."""
    zr, zf = _relative_logits(scores)
    return float(_softplus(zr).mean() + _softplus(-zf).mean())


def ra_discriminator_loss_grad(scores: CriticScores):
    """Gradients of ra_discriminator_loss w.r.t. (real, fake) scores."""
    zr, zf = _relative_logits(scores)
    nr = scores.real.size
    nf = scores.fake.size
    sig_neg_zr = _sigmoid(-zr)
    sig_zf = _sigmoid(zf)
    g_real = -sig_neg_zr / nr - sig_zf.mean() / nr
    g_fake = sig_zf / nf + sig_neg_zr.mean() / nf
    return g_real, g_fake


def ra_generator_loss_grad(scores: CriticScores):
    """Gradients of ra_generator_loss w.r.t. (real, fake) scores."""
    zr, zf = _relative_logits(scores)
    nr = scores.real.size
    nf = scores.fake.size
    sig_zr = _sigmoid(zr)
    sig_neg_zf = _sigmoid(-zf)
    g_real = sig_zr / nr + sig_neg_zf.mean() / nr
    g_fake = -sig_neg_zf / nf - sig_zr.mean() / nf
    return g_real, g_fake


def perceptual_loss(extractor, sr: np.ndarray, hr: np.ndarray) -> float:
    """Mean absolute difference between extractor features of sr and hr.

    The extractor returns one tensor or a sequence of stage tensors
    (pre-activation feature maps); stages contribute equally regardless
    of size. The identity extractor reduces this to pixel-wise L1.
    """
    sr = np.asarray(sr, dtype=np.float64)
    hr = np.asarray(hr, dtype=np.float64)
    if sr.shape != hr.shape:
        raise ShapeMismatch(f"sr {sr.shape} vs hr {hr.shape}")
    feats_sr = extractor(sr)
    feats_hr = extractor(hr)
    if isinstance(feats_sr, np.ndarray):
        feats_sr = [feats_sr]
        feats_hr = [feats_hr]
    if len(feats_sr) != len(feats_hr):
        raise ShapeMismatch("extractor returned differing stage counts")
    stage_means = []
    for fs, fh in zip(feats_sr, feats_hr):
        fs = np.asarray(fs, dtype=np.float64)
        fh = np.asarray(fh, dtype=np.float64)
        if fs.shape != fh.shape:
            raise ShapeMismatch(f"stage shapes differ: {fs.shape} vs {fh.shape}")
        stage_means.append(np.abs(fs - fh).mean())
    return float(np.mean(stage_means))


def pixel_l1_loss(sr: np.ndarray, hr: np.ndarray) -> float:
    sr = np.asarray(sr, dtype=np.float64)
    hr = np.asarray(hr, dtype=np.float64)
    if sr.shape != hr.shape:
        raise ShapeMismatch(f"sr {sr.shape} vs hr {hr.shape}")
    return float(np.abs(sr - hr).mean())


def combined_generator_loss(percep: float, adv: float, l1: float,
                            weights: LossWeights) -> float:
    """percep + lambda * adv + eta * l1."""
    total = percep + weights.lambda_adv * adv + weights.eta_pixel * l1
    if not np.isfinite(total):
        raise NonFiniteInput(
            f"non-finite loss from ({percep}, {adv}, {l1})"
        )
    return float(total)
