"""Deterministic objective functions and set matching.

Covers the segmentation regularizers (entropy, compactness), image-space
distances (mixed L1 + perceptual reconstruction, sliced patch-distribution
texture distance), the per-pair texton matching cost with its boundary
damping, Hungarian assignment, and the set-level matching cost that doubles
as the cycle-consistency metric between two Gaussian sets.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .estimation import SegmentationStack
from .model import GaussianSet, ImageFrame, TextonGaussian


@dataclass(frozen=True)
class MatchWeights:
    """Term weights for the pair cost; defaults are the production values."""

    lam_mu: float = 1.2
    lam_u: float = 2.0
    lam_nu: float = 0.01
    lam_f: float = 10.0
    lam_p: float = 4.0
    lam_s: float = 200.0
    boundary_margin: float = 8.0
    beta_floor: float = 0.1

    def __post_init__(self):
        lams = (self.lam_mu, self.lam_u, self.lam_nu, self.lam_f, self.lam_p, self.lam_s)
        if any(l < 0 for l in lams):
            raise ValueError("weights must be nonnegative")
        if not 0 < self.beta_floor <= 1:
            raise ValueError("beta_floor must lie in (0, 1]")


@dataclass(frozen=True)
class Matching:
    """Injective assignment with its total and per-pair costs."""

    pairs: tuple
    total_cost: float
    per_pair_costs: tuple


def entropy_loss(masks: SegmentationStack) -> float:
    """Mean per-pixel entropy of the mask distribution (0 log 0 := 0)."""
    s = masks.masks
    plogp = np.where(s > 0, s * np.log(np.maximum(s, 1e-300)), 0.0)
    return float(-plogp.sum() / (masks.frame.height * masks.frame.width)) + 0.0


def compactness_loss(masks: SegmentationStack) -> float:
    """Mean squared distance between each pixel and its soft-assigned center."""
    s = masks.masks
    frame = masks.frame
    mass = s.sum(axis=(1, 2))
    coords = frame.pixel_grid()
    mus = np.tensordot(s, coords, axes=([1, 2], [0, 1]))
    mus /= np.maximum(mass, 1e-300)[:, None]  # empty masks contribute nothing
    recon = np.einsum("nhw,nc->hwc", s, mus)
    return float(((recon - coords) ** 2).sum() / (frame.height * frame.width))


def _avg_pool(img: np.ndarray, f: int) -> np.ndarray:
    h, w = img.shape[:2]
    if h < f or w < f:
        return img.mean(axis=(0, 1), keepdims=True)
    hh, ww = (h // f) * f, (w // f) * f
    v = img[:hh, :ww]
    return v.reshape(hh // f, f, ww // f, f, -1).mean(axis=(1, 3))


def _pyramid_l1(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None) -> float:
    # Stand-in perceptual distance: mean L1 over average-pooled levels.
    total = 0.0
    m = None if mask is None else mask.astype(np.float64)[..., None]
    for f in (2, 4, 8):
        if m is None:
            total += float(np.abs(_avg_pool(a, f) - _avg_pool(b, f)).mean())
        else:
            pm = _avg_pool(m, f)
            pa = _avg_pool(a * m, f)
            pb = _avg_pool(b * m, f)
            diff = np.abs(pa - pb) / np.maximum(pm, 1e-300)
            valid = np.broadcast_to(pm > 0, diff.shape)
            total += float(diff[valid].mean())
    return total / 3.0


def reconstruction_distance(
    a: np.ndarray,
    b: np.ndarray,
    mask: np.ndarray | None = None,
    w_l1: float = 2.0,
    w_perc: float = 0.2,
    perceptual=None,
) -> float:
    """w_l1 * mean|a-b| + w_perc * perceptual(a, b), restricted to mask.

    `perceptual` is a callable (a, b, mask) -> float; the default is a
    3-level average-pooled L1 pyramid.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != a.shape[:2]:
            raise ValueError("mask shape must match image height and width")
        if not mask.any():
            warnings.warn("degenerate mask", stacklevel=2)
            return 0.0
        l1 = float(np.abs(a - b)[mask].mean())
    else:
        l1 = float(np.abs(a - b).mean())
    perc = (perceptual or _pyramid_l1)(a, b, mask)
    return w_l1 * l1 + w_perc * perc


def texture_distance(
    a: np.ndarray, b: np.ndarray, patch: int = 2, projections: int = 32, seed: int = 0
) -> float:
    """Sliced 1-Wasserstein distance between patch distributions.

    Both images are cut into their disjoint patch tilings, every patch is
    projected onto shared random nonnegative unit-L1 directions, and sorted
    projections are compared.  Deterministic for a fixed seed.
    """
    if patch < 1:
        raise ValueError("patch must be >= 1")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    for img in (a, b):
        if img.shape[0] < patch or img.shape[1] < patch:
            raise ValueError("image smaller than patch")

    def tiles(img):
        h, w = img.shape[:2]
        hh, ww = (h // patch) * patch, (w // patch) * patch
        v = img[:hh, :ww].reshape(hh // patch, patch, ww // patch, patch, -1)
        return v.transpose(0, 2, 1, 3, 4).reshape(-1, patch * patch * img.shape[2])

    ta, tb = tiles(a), tiles(b)
    rng = np.random.default_rng(seed)
    dirs = np.abs(rng.normal(size=(projections, ta.shape[1])))
    sums = dirs.sum(axis=1, keepdims=True)
    dirs = np.where(sums > 0, dirs / np.maximum(sums, 1e-300), 1.0 / ta.shape[1])
    pa = np.sort(ta @ dirs.T, axis=0)
    pb = np.sort(tb @ dirs.T, axis=0)
    if pa.shape[0] != pb.shape[0]:
        qs = (np.arange(256) + 0.5) / 256
        pa = np.quantile(pa, qs, axis=0)
        pb = np.quantile(pb, qs, axis=0)
    return float(np.abs(pa - pb).mean())


def _edge_damp(g: TextonGaussian, frame: ImageFrame, w: MatchWeights) -> float:
    d = min(
        g.mean[0],
        frame.width - 1 - g.mean[0],
        g.mean[1],
        frame.height - 1 - g.mean[1],
    )
    d = max(float(d), 0.0)
    return max(w.beta_floor, min(1.0, d / w.boundary_margin))


def pair_cost(
    g: TextonGaussian,
    gp: TextonGaussian,
    weights: MatchWeights,
    frame: ImageFrame,
    masks: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    """Matching cost between two textons.

    The geometry/appearance group is gated by the existence product and by
    the boundary damping beta; the existence and mask terms sit outside the
    gate.
    """
    w = weights
    gate = g.prob * gp.prob
    beta = min(_edge_damp(g, frame, w), _edge_damp(gp, frame, w))
    core = (
        w.lam_mu * float(np.linalg.norm(g.mean - gp.mean))
        + w.lam_u * float(np.linalg.norm(g.cov - gp.cov))
        + w.lam_nu * float(np.linalg.norm(g.direction - gp.direction))
        + w.lam_f * float(np.linalg.norm(g.feature - gp.feature))
    )
    cost = gate * beta * core + w.lam_p * abs(g.prob - gp.prob)
    if masks is not None:
        cost += w.lam_s * float(np.linalg.norm(masks[0] - masks[1]))
    return cost


def hungarian_match(cost) -> Matching:
    """Minimum-cost assignment of min(n, m) pairs.

    Ties are broken deterministically: among minimum-cost assignments the
    result is lexicographically smallest in (row, column) order, established
    by fixing rows in ascending order to the lowest column that still admits
    an optimal completion.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    if c.shape[0] == 0 or c.shape[1] == 0:
        return Matching(pairs=(), total_cost=0.0, per_pair_costs=())
    if not np.all(np.isfinite(c)) or np.any(c < 0):
        raise ValueError("cost entries must be finite and nonnegative")

    rows0, cols0 = linear_sum_assignment(c)
    total = float(c[rows0, cols0].sum())
    tol = 1e-9 * max(1.0, abs(total))

    chosen_rows = sorted(int(r) for r in rows0)
    avail = list(range(c.shape[1]))
    pairs = []
    remaining = total
    for idx, i in enumerate(chosen_rows):
        rest = chosen_rows[idx + 1 :]
        pick = None
        for j in avail:
            if c[i, j] > remaining + tol:
                continue
            if rest:
                sub_cols = [x for x in avail if x != j]
                sub = c[np.ix_(rest, sub_cols)]
                rr, cc = linear_sum_assignment(sub)
                completion = float(sub[rr, cc].sum())
            else:
                completion = 0.0
            if c[i, j] + completion <= remaining + tol:
                pick = j
                break
        assert pick is not None, "optimal completion must exist"
        pairs.append((i, pick))
        avail.remove(pick)
        remaining -= float(c[i, pick])
    per = tuple(float(c[i, j]) for i, j in pairs)
    return Matching(pairs=tuple(pairs), total_cost=total, per_pair_costs=per)


def set_matching_cost(
    a: GaussianSet,
    b: GaussianSet,
    weights: MatchWeights | None = None,
    masks_a: np.ndarray | None = None,
    masks_b: np.ndarray | None = None,
) -> Matching:
    """Hungarian matching over the full pair-cost matrix.

    The total cost is the cycle-consistency value between the two sets.
    Callers are expected to filter out-of-bounds textons beforehand.
    """
    if a.feature_dim != b.feature_dim:
        raise ValueError("feature_dim mismatch between sets")
    w = weights if weights is not None else MatchWeights()
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return Matching(pairs=(), total_cost=0.0, per_pair_costs=())
    cost = np.empty((n, m))
    for i, g in enumerate(a):
        for j, gp in enumerate(b):
            pair_masks = None
            if masks_a is not None and masks_b is not None:
                pair_masks = (masks_a[i], masks_b[j])
            cost[i, j] = pair_cost(g, gp, w, a.frame, pair_masks)
    return hungarian_match(cost)


@dataclass(frozen=True)
class TrainingWeights:
    """Weights for the combined training objective.

    texture/gan/pgan are fixed for the whole schedule; the entropy,
    compactness and consistency weights are the initial values of an
    adjustable schedule.
    """

    texture: float = 0.01
    gan: float = 0.1
    pgan: float = 0.1
    consistency: float = 0.008
    entropy: float = 0.08
    compactness: float = 100.0


def combined_training_loss(
    recon: float,
    recon_transformed: float,
    entropy: float,
    compactness: float,
    consistency: float,
    texture: float,
    gan: float = 0.0,
    pgan: float = 0.0,
    weights: TrainingWeights = TrainingWeights(),
) -> float:
    """Bookkeeping sum of the eight weighted training terms."""
    w = weights
    return (
        recon
        + recon_transformed
        + w.entropy * entropy
        + w.compactness * compactness
        + w.consistency * consistency
        + w.texture * texture
        + w.gan * gan
        + w.pgan * pgan
    )
