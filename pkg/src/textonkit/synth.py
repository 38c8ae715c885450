"""Synthetic ground-truth texture worlds.

Generates a set of non-overlapping Gaussians with known parameters together
with the hard segmentation masks and constant-per-segment dense maps that an
ideal encoder would produce for them.  Estimating Gaussians from these masks
recovers the ground truth, which makes the worlds usable as oracles for the
whole pipeline.

Mask layout: index 0 is the background segment (pixels claimed by no
Gaussian); mask i+1 belongs to ground-truth Gaussian i.  Pixels are assigned
to the Mahalanobis-nearest Gaussian inside its 2-sigma contour.  The contour
level matters: the second moment of a uniform distribution over the 2-sigma
ellipse equals the covariance itself, so moment estimation round-trips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimation import DenseMaps, SegmentationStack
from .model import GaussianSet, ImageFrame, TextonGaussian, regularized_cov

# Pixels farther than this squared Mahalanobis distance from every Gaussian
# are background.
MASK_SUPPORT_M2 = 4.0

# Positions and radii are snapped to this grid so that affine-transform
# arithmetic on them stays exact in float64.
SNAP = 1.0 / 16.0


@dataclass(frozen=True)
class WorldSpec:
    """Layout request for a synthetic world."""

    frame: ImageFrame
    k: int
    feature_dim: int = 3
    layout: str = "grid"  # "grid" | "random"
    margin: float = 10.0
    capacity: int | None = None

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.layout not in ("grid", "random"):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.capacity is not None and self.k > self.capacity:
            raise ValueError(f"k={self.k} exceeds capacity {self.capacity}")


def _snap(x: float) -> float:
    return round(x / SNAP) * SNAP


def _grid_placement(spec: WorldSpec, rng: np.random.Generator):
    # Centers jittered inside a sqrt(k) grid; std chosen so neighboring
    # supports cannot touch (separation > 4 * max std).
    frame, k = spec.frame, spec.k
    g = math.ceil(math.sqrt(k))
    cw = (frame.width - 2 * spec.margin) / g
    ch = (frame.height - 2 * spec.margin) / g
    cell = min(cw, ch)
    cells = [(r, c) for r in range(g) for c in range(g)]
    order = rng.permutation(len(cells))[:k]
    centers, radii = [], []
    for idx in order:
        r, c = cells[idx]
        cx = spec.margin + (c + 0.5) * cw + rng.uniform(-cell / 10, cell / 10)
        cy = spec.margin + (r + 0.5) * ch + rng.uniform(-cell / 10, cell / 10)
        centers.append((_snap(cx), _snap(cy)))
        radii.append(max(_snap(rng.uniform(cell / 9, cell / 6)), 2 * SNAP))
    return centers, radii


def _random_placement(spec: WorldSpec, rng: np.random.Generator):
    frame, k = spec.frame, spec.k
    span = min(frame.width, frame.height) - 2 * spec.margin
    smax = max(span / max(4 * math.sqrt(k), 8.0), 2.0)
    centers, radii = [], []
    for _ in range(k):
        for _attempt in range(5000):
            cx = _snap(rng.uniform(spec.margin, frame.width - 1 - spec.margin))
            cy = _snap(rng.uniform(spec.margin, frame.height - 1 - spec.margin))
            if all(math.hypot(cx - x, cy - y) > 4.2 * smax for x, y in centers):
                break
        else:
            raise ValueError(f"could not place {k} separated Gaussians")
        centers.append((cx, cy))
        radii.append(max(_snap(rng.uniform(0.55 * smax, smax)), 2 * SNAP))
    return centers, radii


def synth_world(
    spec: WorldSpec, seed: int
) -> tuple[GaussianSet, SegmentationStack, DenseMaps]:
    """Build (ground-truth set, hard mask stack, constant dense maps)."""
    frame, k, nf = spec.frame, spec.k, spec.feature_dim
    rng = np.random.default_rng(seed)
    cap = spec.capacity if spec.capacity is not None else max(k, 1)

    if k == 0:
        centers, radii = [], []
    elif spec.layout == "grid":
        centers, radii = _grid_placement(spec, rng)
    else:
        centers, radii = _random_placement(spec, rng)

    gaussians = []
    for (cx, cy), rad in zip(centers, radii):
        theta = rng.uniform(0.0, math.pi)
        aspect = rng.uniform(0.6, 1.0)
        c, s = math.cos(theta), math.sin(theta)
        rot = np.array([[c, -s], [s, c]])
        cov = rot @ np.diag([rad**2, (aspect * rad) ** 2]) @ rot.T
        cov = 0.5 * (cov + cov.T)
        feat = np.abs(rng.normal(size=nf))
        feat = feat / np.linalg.norm(feat)
        ang = rng.uniform(0.0, 2 * math.pi)
        gaussians.append(
            TextonGaussian(
                weight=1.0,
                prob=1.0,
                mean=np.array([cx, cy]),
                cov=cov,
                direction=np.array([math.cos(ang), math.sin(ang)]),
                feature=feat,
                mask_area=0.0,  # filled after rasterization
            )
        )

    coords = frame.pixel_grid()
    h, w = frame.height, frame.width
    if k > 0:
        m2 = np.empty((k, h, w))
        for i, g in enumerate(gaussians):
            inv = np.linalg.inv(regularized_cov(g.cov))
            d = coords - g.mean
            m2[i] = np.einsum("hwi,ij,hwj->hw", d, inv, d)
        nearest = np.argmin(m2, axis=0)
        covered = np.min(m2, axis=0) <= MASK_SUPPORT_M2
    else:
        nearest = np.zeros((h, w), dtype=int)
        covered = np.zeros((h, w), dtype=bool)

    masks = np.zeros((k + 1, h, w))
    masks[0] = ~covered
    for i in range(k):
        masks[i + 1] = covered & (nearest == i)

    # Background gets neutral unit-valued maps so its pooled texton is valid.
    appearance = np.empty((h, w, nf))
    appearance[...] = np.full(nf, 1.0 / math.sqrt(nf))
    direction = np.empty((h, w, 2))
    direction[...] = np.array([1.0, 0.0])
    for i, g in enumerate(gaussians):
        sel = masks[i + 1] > 0
        appearance[sel] = g.feature
        direction[sel] = g.direction
        gaussians[i] = g.with_(mask_area=float(masks[i + 1].sum()))

    truth = GaussianSet(
        frame=frame, gaussians=tuple(gaussians), feature_dim=nf, capacity=cap
    )
    stack = SegmentationStack(frame=frame, masks=masks)
    maps = DenseMaps(frame=frame, appearance=appearance, direction=direction)
    return truth, stack, maps
