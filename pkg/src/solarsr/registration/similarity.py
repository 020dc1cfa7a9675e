"""Similarity transforms and robust estimation from point correspondences."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientMatches, NoConsensus


@dataclass(frozen=True)
class Transform:
    """Similarity map p' = scale * R(rotation) @ p + (tx, ty).

    Rotation is in degrees; a positive angle turns +x toward +y (clockwise
    on screen with y pointing down). Points are (x, y) pairs.
    """

    scale: float
    rotation_deg: float
    tx: float
    ty: float

    def __post_init__(self):
        for name in ("scale", "rotation_deg", "tx", "ty"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @classmethod
    def identity(cls) -> "Transform":
        return cls(1.0, 0.0, 0.0, 0.0)

    def matrix(self) -> np.ndarray:
        """2x3 matrix acting on column vectors (x, y, 1)."""
        theta = math.radians(self.rotation_deg)
        c = self.scale * math.cos(theta)
        s = self.scale * math.sin(theta)
        return np.array([[c, -s, self.tx], [s, c, self.ty]], dtype=np.float64)

    def apply(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        m = self.matrix()
        out = pts @ m[:, :2].T + m[:, 2]
        return out

    def inverse(self) -> "Transform":
        theta = math.radians(self.rotation_deg)
        inv_scale = 1.0 / self.scale
        c = math.cos(-theta) * inv_scale
        s = math.sin(-theta) * inv_scale
        tx = -(c * self.tx - s * self.ty)
        ty = -(s * self.tx + c * self.ty)
        return Transform(inv_scale, -self.rotation_deg, tx, ty)

    def compose(self, other: "Transform") -> "Transform":
        """Transform equal to applying `other` first, then self."""
        theta = math.radians(self.rotation_deg)
        c = self.scale * math.cos(theta)
        s = self.scale * math.sin(theta)
        tx = c * other.tx - s * other.ty + self.tx
        ty = s * other.tx + c * other.ty + self.ty
        return Transform(
            self.scale * other.scale,
            self.rotation_deg + other.rotation_deg,
            tx,
            ty,
        )

    def translated(self, dx: float, dy: float) -> "Transform":
        return Transform(self.scale, self.rotation_deg, self.tx + dx, self.ty + dy)


def _fit_pair(z0: complex, z1: complex, w0: complex, w1: complex):
    """Exact similarity through two correspondences, as complex a*z + b."""
    dz = z1 - z0
    if dz == 0:
        return None
    a = (w1 - w0) / dz
    b = w0 - a * z0
    return a, b


def _fit_lsq(z: np.ndarray, w: np.ndarray):
    """Least-squares similarity w ~ a*z + b over complex points."""
    z_mean = z.mean()
    w_mean = w.mean()
    dz = z - z_mean
    denom = np.sum(dz.real ** 2 + dz.imag ** 2)
    if denom == 0:
        return None
    a = np.sum(np.conj(dz) * (w - w_mean)) / denom
    b = w_mean - a * z_mean
    return a, b


def _to_transform(a: complex, b: complex) -> Transform:
    scale = abs(a)
    if scale == 0:
        raise NoConsensus("estimated similarity collapsed to zero scale")
    rotation = math.degrees(math.atan2(a.imag, a.real))
    return Transform(scale, rotation, b.real, b.imag)


def estimate_similarity(
    matches,
    inlier_tol: float = 2.0,
    iterations: int = 1000,
    seed: int = 0,
) -> Transform:
    """RANSAC similarity estimate from matched (source, target) point pairs.

    Minimal 2-point hypotheses are scored by the number of matches whose
    transformed source lands within `inlier_tol` pixels of its target; the
    winning consensus set is refined by least squares (two rounds of
    refit + re-select). Deterministic for a fixed seed.
    """
    pairs = [(complex(p[0][0], p[0][1]), complex(p[1][0], p[1][1])) for p in matches]
    n = len(pairs)
    if n < 2:
        raise InsufficientMatches(f"need at least 2 matches, got {n}")
    z = np.array([p[0] for p in pairs])
    w = np.array([p[1] for p in pairs])

    if n == 2:
        fit = _fit_pair(z[0], z[1], w[0], w[1])
        if fit is None:
            raise NoConsensus("the two matches share a source point")
        return _to_transform(*fit)

    rng = np.random.default_rng(seed)
    best_inliers = None
    best_count = 0
    for _ in range(iterations):
        i, j = rng.choice(n, size=2, replace=False)
        fit = _fit_pair(z[i], z[j], w[i], w[j])
        if fit is None:
            continue
        a, b = fit
        err = np.abs(a * z + b - w)
        inliers = err <= inlier_tol
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers

    if best_inliers is None or (best_count < 0.5 * n and best_count < 8):
        raise NoConsensus(
            f"best consensus has {best_count}/{n} inliers; need >=50% or >=8"
        )

    inliers = best_inliers
    fit = None
    for _ in range(2):
        fit = _fit_lsq(z[inliers], w[inliers])
        if fit is None:
            raise NoConsensus("inlier set is degenerate (zero spatial extent)")
        a, b = fit
        err = np.abs(a * z + b - w)
        refined = err <= inlier_tol
        if refined.sum() < 2:
            break
        inliers = refined
    assert fit is not None
    return _to_transform(*fit)
