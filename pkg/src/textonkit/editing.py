"""Latent-space texture editing operators.

All operators take and return immutable GaussianSets.  Feature-modifying
operations renormalize features to unit length afterwards, matching the
invariant the estimator enforces.  Randomized operators take explicit seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .model import (
    AffineTransform2D,
    GaussianSet,
    ImageFrame,
    TextonGaussian,
    regularized_cov,
)
from .objectives import hungarian_match

EDIT_THRESHOLD = 2.0 / 255.0


@dataclass(frozen=True)
class ReshufflePlan:
    """Permutation-based appearance shuffle.

    mode "hard" permutes features among effective textons; "soft" blends
    each feature with its permuted partner using the swap coefficient at
    temperature gamma.
    """

    permutation: tuple
    gamma: float = 0.5
    mode: str = "hard"
    seed: int = 0

    def __post_init__(self):
        perm = tuple(int(p) for p in self.permutation)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError("permutation must be a bijection on 0..n-1")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.mode not in ("hard", "soft"):
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "permutation", perm)

    @staticmethod
    def random(n: int, seed: int, gamma: float = 0.5, mode: str = "hard") -> "ReshufflePlan":
        rng = np.random.default_rng(seed)
        return ReshufflePlan(
            permutation=tuple(int(i) for i in rng.permutation(n)),
            gamma=gamma,
            mode=mode,
            seed=seed,
        )


@dataclass(frozen=True)
class VariationEdit:
    """Variation dials: 1.0 keeps the input, 0 collapses to the mean."""

    delta_f: float = 1.0
    delta_u: float = 1.0

    def __post_init__(self):
        if not (self.delta_f > 0 and self.delta_u > 0):
            raise ValueError("variation deltas must be > 0")


@dataclass(frozen=True)
class EditRegion:
    """Connected pixel region of an image edit plus its centroid (x, y)."""

    mask: np.ndarray
    centroid: np.ndarray

    @staticmethod
    def from_images(original, edited, threshold: float = EDIT_THRESHOLD) -> "EditRegion":
        d = np.abs(np.asarray(edited, dtype=np.float64) - np.asarray(original, dtype=np.float64))
        mask = d.max(axis=-1) > threshold
        ys, xs = np.nonzero(mask)
        if len(xs) == 0:
            raise ValueError("no edit detected")
        return EditRegion(mask=mask, centroid=np.array([xs.mean(), ys.mean()]))


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    return v / n if n > 0 else v


def swap_coefficient(g_i: TextonGaussian, g_j: TextonGaussian, gamma: float) -> float:
    """Blend strength for moving texton i's appearance onto texton j.

    tau = min(max(A_i/A_j, p_i/p_j), 1) ** gamma.  Zero denominators count
    as +inf before the clamp; a missing (NaN) area falls back to the
    probability ratio.  gamma = 0 always yields 1 (hard swap).
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")

    def ratio(num: float, den: float) -> float:
        if math.isnan(num) or math.isnan(den):
            return -math.inf
        if den == 0:
            return math.inf
        return num / den

    r = max(ratio(g_i.mask_area, g_j.mask_area), ratio(g_i.prob, g_j.prob))
    t = min(r, 1.0)
    if gamma == 0:
        return 1.0
    return float(max(t, 0.0) ** gamma)


def reshuffle(s: GaussianSet, plan: ReshufflePlan) -> GaussianSet:
    """Permute or blend appearance features; geometry is untouched."""
    n = len(s)
    if len(plan.permutation) != n:
        raise ValueError(f"permutation length {len(plan.permutation)} != set size {n}")
    feats = s.features()
    new_feats = feats.copy()
    if plan.mode == "hard":
        eff = s.effective_indices()
        targets = [plan.permutation[e] for e in eff]
        order = np.argsort(np.argsort(targets))
        # rank-induced bijection on the effective subset; equals the plain
        # restriction whenever the permutation maps the subset to itself
        for pos, j in enumerate(eff):
            new_feats[j] = feats[eff[order[pos]]]
    else:
        for j in range(n):
            i = plan.permutation[j]
            tau = swap_coefficient(s[i], s[j], plan.gamma)
            new_feats[j] = _unit(tau * feats[i] + (1.0 - tau) * feats[j])
    out = [g.with_(feature=new_feats[j]) for j, g in enumerate(s)]
    return s.replace_gaussians(tuple(out))


def _effective_feature_mean(s: GaussianSet) -> np.ndarray:
    idx = s.effective_indices()
    if not idx:
        raise ValueError("no effective textons")
    w = s.weights()[idx]
    return (w[:, None] * s.features()[idx]).sum(axis=0) / w.sum()


def transfer_mean_align(
    structure: GaussianSet, appearance: GaussianSet, renormalize: bool = True
) -> GaussianSet:
    """Shift structure features so their mean matches the appearance mean.

    Geometry comes from the structure set.  `renormalize=False` skips the
    final unit normalization, which makes the operation exactly invertible.
    """
    if structure.feature_dim != appearance.feature_dim:
        raise ValueError("feature_dim mismatch between sets")
    shift = _effective_feature_mean(appearance) - _effective_feature_mean(structure)
    out = []
    for g in structure:
        if g.effective:
            f = g.feature + shift
            out.append(g.with_(feature=_unit(f) if renormalize else f))
        else:
            out.append(g)
    return structure.replace_gaussians(tuple(out))


def transfer_replace(structure: GaussianSet, appearance: GaussianSet, seed: int = 0) -> GaussianSet:
    """Replace each effective structure feature by a random appearance one."""
    if structure.feature_dim != appearance.feature_dim:
        raise ValueError("feature_dim mismatch between sets")
    pool = [appearance[i].feature for i in appearance.effective_indices()]
    if not pool or not structure.effective_indices():
        raise ValueError("no effective textons")
    rng = np.random.default_rng(seed)
    out = []
    for g in structure:
        if g.effective:
            out.append(g.with_(feature=pool[int(rng.integers(len(pool)))]))
        else:
            out.append(g)
    return structure.replace_gaussians(tuple(out))


def _chol(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(regularized_cov(cov))
    except np.linalg.LinAlgError as e:
        raise ValueError("covariance not positive definite") from e


def _tri_power(w: np.ndarray, d: float) -> np.ndarray:
    # Fractional power of a lower-triangular 2x2 with positive diagonal.
    a, b, c = w[0, 0], w[1, 0], w[1, 1]
    ad, cd = a**d, c**d
    if abs(a - c) > 1e-12 * max(abs(a), abs(c)):
        beta = b * (ad - cd) / (a - c)
    else:
        beta = d * b * a ** (d - 1.0)
    return np.array([[ad, 0.0], [beta, cd]])


def variation_covariance(cov: np.ndarray, cov_mean: np.ndarray, delta_u: float) -> np.ndarray:
    """Move a covariance toward/away from the mean covariance.

    U_e = W^d @ U_mean @ (W^d)^T with W = L @ L_mean^{-1} built from the
    Cholesky factors; d = 1 reproduces the input, d = 0 gives the mean.
    """
    lo = _chol(cov)
    try:
        lm = np.linalg.cholesky(np.asarray(cov_mean, dtype=np.float64))
    except np.linalg.LinAlgError as e:
        raise ValueError("degenerate mean covariance") from e
    a, c = lm[0, 0], lm[1, 1]
    lm_inv = np.array([[1.0 / a, 0.0], [-lm[1, 0] / (a * c), 1.0 / c]])
    wd = _tri_power(lo @ lm_inv, delta_u)
    out = wd @ np.asarray(cov_mean, dtype=np.float64) @ wd.T
    return 0.5 * (out + out.T)


def modify_variations(s: GaussianSet, edit: VariationEdit) -> GaussianSet:
    """Scale feature and shape variation of effective textons about the mean."""
    eff = s.effective_indices()
    if not eff:
        return s
    fbar = _effective_feature_mean(s)
    w = s.weights()[eff]
    ubar = np.tensordot(w, s.covs()[eff], axes=(0, 0)) / w.sum()
    ubar = 0.5 * (ubar + ubar.T)
    out = []
    for i, g in enumerate(s):
        if i not in eff:
            out.append(g)
            continue
        f = _unit(fbar + edit.delta_f * (g.feature - fbar))
        u = variation_covariance(g.cov, ubar, edit.delta_u)
        out.append(g.with_(feature=f, cov=u))
    return s.replace_gaussians(tuple(out))


def _psd_project(cov: np.ndarray) -> np.ndarray:
    sym = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(sym)
    m = (vecs * np.maximum(vals, 1e-9)) @ vecs.T
    # eigh reconstruction is symmetric only to rounding; serialization
    # demands bit-equal off-diagonal entries.
    return 0.5 * (m + m.T)


def _bernoulli(p: float, rng: np.random.Generator) -> float:
    # p in {0, 1} stays deterministic: u < 0 never, u < 1 always.
    return 1.0 if rng.random() < p else 0.0


def _blend_pair(g: TextonGaussian, gp: TextonGaussian, eta: float, rng) -> TextonGaussian:
    if eta == 0.0:
        return g.with_(weight=_bernoulli(g.weight, rng))
    if eta == 1.0:
        return gp.with_(weight=_bernoulli(gp.weight, rng))
    a, b = 1.0 - eta, eta
    area = g.mask_area * a + gp.mask_area * b
    return TextonGaussian(
        weight=_bernoulli(a * g.weight + b * gp.weight, rng),
        prob=a * g.prob + b * gp.prob,
        mean=a * g.mean + b * gp.mean,
        cov=_psd_project(a * g.cov + b * gp.cov),
        direction=_unit(a * g.direction + b * gp.direction),
        feature=_unit(a * g.feature + b * gp.feature),
        mask_area=area,
    )


def _interp_core(a: GaussianSet, b: GaussianSet, eta_of, seed: int) -> GaussianSet:
    if a.feature_dim != b.feature_dim:
        raise ValueError("feature_dim mismatch between sets")
    if a.frame != b.frame:
        raise ValueError("frame mismatch between sets")
    n, m = len(a), len(b)
    rng = np.random.default_rng(seed)
    pairs = {}
    if n and m:
        cost = np.empty((n, m))
        for i, g in enumerate(a):
            for j, gp in enumerate(b):
                cost[i, j] = float(np.linalg.norm(g.mean - gp.mean)) + abs(
                    g.weight - gp.weight
                )
        pairs = dict(hungarian_match(cost).pairs)
    matched_b = set(pairs.values())
    out = []
    for i, g in enumerate(a):
        if i in pairs:
            gp = b[pairs[i]]
            out.append(_blend_pair(g, gp, eta_of(g.mean), rng))
        else:
            eta = eta_of(g.mean)
            out.append(g.with_(weight=_bernoulli((1.0 - eta) * g.weight, rng)))
    for j, gp in enumerate(b):
        if j not in matched_b:
            eta = eta_of(gp.mean)
            out.append(gp.with_(weight=_bernoulli(eta * gp.weight, rng)))
    cap = max(a.capacity, b.capacity, len(out))
    return GaussianSet(frame=a.frame, gaussians=tuple(out), feature_dim=a.feature_dim, capacity=cap)


def interpolate(a: GaussianSet, b: GaussianSet, eta: float, seed: int = 0) -> GaussianSet:
    """Convex blend of two matched sets; eta 0 and 1 return the inputs."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    if a.feature_dim != b.feature_dim:
        raise ValueError("feature_dim mismatch between sets")
    if eta == 0.0:
        return a
    if eta == 1.0:
        return b
    return _interp_core(a, b, lambda _mean: eta, seed)


def spatial_morph(a: GaussianSet, b: GaussianSet, ramp, seed: int = 0) -> GaussianSet:
    """Interpolation with a per-position blend weight.

    `ramp` is an (H, W) map sampled bilinearly at each pair's source-set
    center, the axis string "x" or "y" (linear 0 to 1 across the frame), or
    a constant float.
    """
    if isinstance(ramp, (int, float)):
        return interpolate(a, b, float(ramp), seed)
    frame = a.frame
    if isinstance(ramp, str):
        if ramp not in ("x", "y"):
            raise ValueError(f"unknown ramp axis {ramp!r}")
        axis, extent = (0, frame.width - 1) if ramp == "x" else (1, frame.height - 1)

        def eta_of(mean):
            return float(np.clip(mean[axis] / max(extent, 1), 0.0, 1.0))

    else:
        grid = np.asarray(ramp, dtype=np.float64)
        if grid.shape != (frame.height, frame.width):
            raise ValueError("ramp map must be (H, W)")

        def eta_of(mean):
            x = float(np.clip(mean[0], 0, frame.width - 1))
            y = float(np.clip(mean[1], 0, frame.height - 1))
            x0, y0 = int(x), int(y)
            x1, y1 = min(x0 + 1, frame.width - 1), min(y0 + 1, frame.height - 1)
            fx, fy = x - x0, y - y0
            v = (
                grid[y0, x0] * (1 - fx) * (1 - fy)
                + grid[y0, x1] * fx * (1 - fy)
                + grid[y1, x0] * (1 - fx) * fy
                + grid[y1, x1] * fx * fy
            )
            return float(np.clip(v, 0.0, 1.0))

    return _interp_core(a, b, eta_of, seed)


def transform_texton(
    s: GaussianSet,
    index: int,
    op: str,
    delta=None,
    factor=None,
    theta: float | None = None,
) -> GaussianSet:
    """Move, scale, or rotate a single texton in place."""
    if not 0 <= index < len(s):
        raise IndexError(f"index {index} out of range")
    g = s[index]
    if op == "move":
        if delta is None:
            raise ValueError("move needs delta")
        d = np.asarray(delta, dtype=np.float64)
        new = g.with_(mean=g.mean + d)
    elif op == "scale":
        if factor is None:
            raise ValueError("scale needs factor")
        if np.ndim(factor) == 0:
            m = float(factor) * np.eye(2)
            new_dir = g.direction
        else:
            m = np.asarray(factor, dtype=np.float64)
            if m.shape != (2, 2):
                raise ValueError("scale matrix must be 2x2")
            new_dir = _unit(m @ g.direction)
        cov = m @ g.cov @ m.T
        area = g.mask_area * abs(float(np.linalg.det(m)))
        new = g.with_(cov=0.5 * (cov + cov.T), direction=new_dir, mask_area=area)
    elif op == "rotate":
        if theta is None:
            raise ValueError("rotate needs theta")
        c, sn = math.cos(theta), math.sin(theta)
        r = np.array([[c, -sn], [sn, c]])
        cov = r @ g.cov @ r.T
        new = g.with_(cov=0.5 * (cov + cov.T), direction=r @ g.direction)
    else:
        raise ValueError(f"unknown op {op!r}")
    out = list(s)
    out[index] = new
    return s.replace_gaussians(tuple(out))


def _frame_of(g: TextonGaussian) -> np.ndarray:
    # Local frame: Cholesky shape times direction-derived rotation.
    nu = g.direction
    n = float(np.linalg.norm(nu))
    if n > 0:
        r = np.array([[nu[0], -nu[1]], [nu[1], nu[0]]]) / n
    else:
        r = np.eye(2)
    return _chol(g.cov) @ r


def propagate_edit(
    original: np.ndarray,
    edited: np.ndarray,
    s: GaussianSet,
    targets,
    threshold: float = EDIT_THRESHOLD,
) -> np.ndarray:
    """Copy an image-space edit from its nearest texton onto target textons.

    The difference image is warped by the affine map aligning the source
    texton's local frame with each target's and added back into the
    original.
    """
    original = np.asarray(original, dtype=np.float64)
    edited = np.asarray(edited, dtype=np.float64)
    if original.shape != edited.shape:
        raise ValueError("dimension mismatch")
    if original.shape[:2] != (s.frame.height, s.frame.width):
        raise ValueError("images must match the set frame")
    region = EditRegion.from_images(original, edited, threshold)
    eff = s.effective_indices()
    if not eff:
        raise ValueError("no effective textons")
    dists = []
    for i in eff:
        g = s[i]
        inv = np.linalg.inv(regularized_cov(g.cov))
        d = region.centroid - g.mean
        dists.append(float(d @ inv @ d))
    src = s[eff[int(np.argmin(dists))]]
    src_frame = _frame_of(src)

    diff = edited - original
    result = original.copy()
    for t in targets:
        if not 0 <= t < len(s):
            raise IndexError(f"index {t} out of range")
        tgt = s[t]
        linear = _frame_of(tgt) @ np.linalg.inv(src_frame)
        warp = AffineTransform2D(
            linear=linear, translation=tgt.mean - linear @ src.mean
        ).inverse()
        # scipy's affine maps output to input coordinates in (row, col) order
        swap = np.array([[0.0, 1.0], [1.0, 0.0]])
        mat = swap @ warp.linear @ swap
        off = warp.translation[::-1]
        for ch in range(diff.shape[2]):
            result[..., ch] += ndimage.affine_transform(
                diff[..., ch], mat, offset=off, order=1, mode="constant", cval=0.0
            )
    return np.clip(result, 0.0, 1.0)


def _offset_set(s: GaussianSet, offset: np.ndarray) -> list[TextonGaussian]:
    return [g.with_(mean=g.mean + offset) for g in s]


def merge_patch_sets(patches, overlap: float) -> GaussianSet:
    """Stitch patch sets placed at offsets into one set over the union frame.

    In each pairwise overlap band, Gaussians are matched by center distance
    and matched pairs are blended by their relative position across the
    band; unmatched Gaussians near the seam get their weight damped by the
    distance-to-seam ramp.  Pairs farther apart than the band width stay
    unmatched.
    """
    if not patches:
        raise ValueError("no patches")
    nf = patches[0][0].feature_dim
    if any(p[0].feature_dim != nf for p in patches):
        raise ValueError("feature_dim mismatch between patches")

    w_t = max(int(math.ceil(off[0])) + p.frame.width for p, off in patches)
    h_t = max(int(math.ceil(off[1])) + p.frame.height for p, off in patches)
    frame = ImageFrame(width=w_t, height=h_t)

    placed = []  # per patch: list of (gaussian | None)
    rects = []
    for p, off in patches:
        off = np.asarray(off, dtype=np.float64)
        placed.append(_offset_set(p, off))
        rects.append((off[0], off[1], off[0] + p.frame.width, off[1] + p.frame.height))

    def in_rect(mean, rect):
        return rect[0] <= mean[0] <= rect[2] and rect[1] <= mean[1] <= rect[3]

    for pi in range(len(patches)):
        for pj in range(pi + 1, len(patches)):
            if overlap <= 0:
                continue
            r1, r2 = rects[pi], rects[pj]
            band = (max(r1[0], r2[0]), max(r1[1], r2[1]), min(r1[2], r2[2]), min(r1[3], r2[3]))
            if band[2] <= band[0] or band[3] <= band[1]:
                continue
            axis = 0 if (band[2] - band[0]) <= (band[3] - band[1]) else 1
            lo, hi = band[axis], band[axis + 2]
            ci = [k for k, g in enumerate(placed[pi]) if g is not None and in_rect(g.mean, band)]
            cj = [k for k, g in enumerate(placed[pj]) if g is not None and in_rect(g.mean, band)]
            if ci and cj:
                cost = np.empty((len(ci), len(cj)))
                for a_, ki in enumerate(ci):
                    for b_, kj in enumerate(cj):
                        cost[a_, b_] = float(
                            np.linalg.norm(placed[pi][ki].mean - placed[pj][kj].mean)
                        )
                matched_i, matched_j = set(), set()
                for a_, b_ in hungarian_match(cost).pairs:
                    if cost[a_, b_] > (hi - lo):
                        continue
                    gi, gj = placed[pi][ci[a_]], placed[pj][cj[b_]]
                    mid = 0.5 * (gi.mean[axis] + gj.mean[axis])
                    eta = float(np.clip((mid - lo) / max(hi - lo, 1e-12), 0.0, 1.0))
                    # first patch dominates on its side of the band
                    if rects[pj][axis] < rects[pi][axis]:
                        eta = 1.0 - eta
                    merged = _blend_pair(gi, gj, eta, np.random.default_rng(0))
                    merged = merged.with_(
                        weight=gi.weight if eta < 0.5 else gj.weight
                    )
                    placed[pi][ci[a_]] = merged
                    placed[pj][cj[b_]] = None
                    matched_i.add(ci[a_])
                    matched_j.add(cj[b_])
                seam = 0.5 * (lo + hi)
                half = max(0.5 * (hi - lo), 1e-12)
                for side, idxs, matched in ((pi, ci, matched_i), (pj, cj, matched_j)):
                    for k in idxs:
                        g = placed[side][k]
                        if g is None or k in matched:
                            continue
                        damp = min(1.0, abs(g.mean[axis] - seam) / half)
                        placed[side][k] = g.with_(weight=g.weight * damp)

    gaussians = [g for group in placed for g in group if g is not None]
    cap = max(sum(p[0].capacity for p in patches), len(gaussians), 1)
    return GaussianSet(frame=frame, gaussians=tuple(gaussians), feature_dim=nf, capacity=cap)


def rescale_gaussians(s: GaussianSet, scale: float, anchor) -> GaussianSet:
    """Uniformly rescale all textons about an anchor point."""
    if not scale > 0:
        raise ValueError("scale must be > 0")
    if scale == 1.0:
        return s
    anchor = np.asarray(anchor, dtype=np.float64)
    out = []
    for g in s:
        out.append(
            g.with_(
                mean=anchor + scale * (g.mean - anchor),
                cov=(scale * scale) * g.cov,
                mask_area=g.mask_area * scale * scale,
            )
        )
    return s.replace_gaussians(tuple(out))
