"""Gaussian parameter estimation from soft segmentation masks.

Given a pixel-normalized stack of segment masks plus dense appearance and
direction maps, each segment is summarized as one texton: mask-weighted
moments give the mean and covariance, the self-weighted mask average gives
the existence probability, and mask-weighted pooling (then normalization)
gives the appearance feature and direction.  Existence weights are drawn
either by rounding or by a relaxed binary Gumbel-softmax sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import COV_EPSILON, GaussianSet, ImageFrame, TextonGaussian

# Segments with less than this much total mask mass are emitted as inert
# placeholders instead of aborting the batch.
DEGENERATE_MASS = 1e-8


class FrameMismatchError(ValueError):
    """Inputs disagree about the pixel grid."""


@dataclass(frozen=True)
class SegmentationStack:
    """n soft masks over an H x W grid, normalized across masks per pixel."""

    frame: ImageFrame
    masks: np.ndarray  # (n, H, W) floats in [0, 1]

    def __post_init__(self):
        m = np.asarray(self.masks, dtype=np.float64)
        if m.ndim != 3 or m.shape[1] != self.frame.height or m.shape[2] != self.frame.width:
            raise ValueError("masks must be (n, H, W) matching the frame")
        object.__setattr__(self, "masks", m)

    @property
    def n_masks(self) -> int:
        return self.masks.shape[0]

    def check_normalized(self, tol: float = 1e-5) -> bool:
        if self.n_masks == 0:
            return False
        total = self.masks.sum(axis=0)
        return bool(
            np.all(self.masks >= -1e-12)
            and np.all(self.masks <= 1 + 1e-12)
            and np.all(np.abs(total - 1.0) <= tol)
        )


@dataclass(frozen=True)
class DenseMaps:
    """Per-pixel appearance features (H, W, d_a) and directions (H, W, 2)."""

    frame: ImageFrame
    appearance: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        fa = np.asarray(self.appearance, dtype=np.float64)
        v = np.asarray(self.direction, dtype=np.float64)
        if fa.ndim != 3 or fa.shape[:2] != (self.frame.height, self.frame.width):
            raise ValueError("appearance must be (H, W, d_a) matching the frame")
        if v.shape != (self.frame.height, self.frame.width, 2):
            raise ValueError("direction must be (H, W, 2) matching the frame")
        object.__setattr__(self, "appearance", fa)
        object.__setattr__(self, "direction", v)

    @property
    def feature_dim(self) -> int:
        return self.appearance.shape[2]


@dataclass(frozen=True)
class SamplingMode:
    """How existence weights are drawn from the Bernoulli probabilities."""

    mode: str = "rounded"  # "rounded" | "relaxed"
    temperature: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.mode not in ("rounded", "relaxed"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        if self.mode == "relaxed" and not self.temperature > 0:
            raise ValueError("temperature must be > 0 in relaxed mode")


def gumbel_binary_sample(prob: float, temperature: float, seed) -> float:
    """Relaxed Bernoulli draw in [0, 1] via the binary-concrete construction.

    Deterministic for a fixed seed; concentrates on {0, 1} as temperature
    goes to zero, and the rounded sample is exactly Bernoulli(prob).
    `seed` may be an int or an already-constructed numpy Generator.
    """
    if not temperature > 0:
        raise ValueError("temperature must be > 0")
    if not 0.0 <= prob <= 1.0:
        raise ValueError("prob must lie in [0, 1]")
    if prob == 0.0:
        return 0.0
    if prob == 1.0:
        return 1.0
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u1, u2 = rng.random(2)
    g1 = -np.log(-np.log(u1))
    g2 = -np.log(-np.log(u2))
    logit = np.log(prob) - np.log1p(-prob)
    z = float(logit + g1 - g2) / temperature
    # Stable sigmoid: never exponentiate a positive argument.
    if z >= 0:
        return float(1.0 / (1.0 + math.exp(-z)))
    e = math.exp(z)
    return float(e / (1.0 + e))


def _pool(weights: np.ndarray, grid: np.ndarray, mass: float) -> np.ndarray:
    # weights (H, W), grid (H, W, C) -> mask-weighted mean (C,)
    return np.tensordot(weights, grid, axes=([0, 1], [0, 1])) / mass


def estimate_gaussians(
    masks: SegmentationStack,
    maps: DenseMaps,
    sampling: SamplingMode = SamplingMode(),
    capacity: int | None = None,
) -> GaussianSet:
    """Summarize each mask as a texton via weighted moments and pooling."""
    if masks.frame != maps.frame:
        raise FrameMismatchError("masks and maps must share one frame")
    frame = masks.frame
    n = masks.n_masks
    cap = capacity if capacity is not None else max(n, 1)
    if n > cap:
        raise ValueError(f"{n} masks exceed capacity {cap}")

    coords = frame.pixel_grid()  # (H, W, 2), [x, y]
    rng = np.random.default_rng(sampling.rng_seed)
    out: list[TextonGaussian] = []
    for i in range(n):
        s = masks.masks[i]
        mass = float(s.sum())
        if mass < DEGENERATE_MASS:
            out.append(
                TextonGaussian(
                    weight=0.0,
                    prob=0.0,
                    mean=frame.center,
                    cov=COV_EPSILON * np.eye(2),
                    direction=np.zeros(2),
                    feature=np.zeros(maps.feature_dim),
                    mask_area=mass,
                )
            )
            continue
        mu = _pool(s, coords, mass)
        centered = coords - mu
        # (H, W, 2, 2) outer products folded against the mask.
        cov = np.einsum("hwi,hwj,hw->ij", centered, centered, s) / mass
        prob = float((s * s).sum() / mass)
        feat = _pool(s, maps.appearance, mass)
        fn = float(np.linalg.norm(feat))
        if fn > 0:
            feat = feat / fn
        direction = _pool(s, maps.direction, mass)
        dn = float(np.linalg.norm(direction))
        if dn > 0:
            direction = direction / dn
        if sampling.mode == "rounded":
            weight = 1.0 if prob >= 0.5 else 0.0
        else:
            weight = gumbel_binary_sample(prob, sampling.temperature, rng)
        out.append(
            TextonGaussian(
                weight=weight,
                prob=prob,
                mean=mu,
                cov=cov,
                direction=direction,
                feature=feat,
                mask_area=mass,
            )
        )
    return GaussianSet(
        frame=frame, gaussians=tuple(out), feature_dim=maps.feature_dim, capacity=cap
    )
