"""Rasterization of Gaussian sets into dense feature grids.

Each Gaussian contributes an opacity field o(p) = delta * exp(-M2(p)) where
M2 is the squared Mahalanobis distance (note the exponent is -M2, twice as
sharp as the standard Gaussian density).  Fields are alpha-composited with
the last Gaussian in the set front-most, and the composited feature at each
pixel is the alpha-weighted sum of concat(feature, direction) vectors.

The hot path is a numba kernel over per-Gaussian bounding boxes with a hard
support cutoff at M2 <= 12.5 (exp(-12.5) ~ 3.7e-6).  `splat` accepts a
preallocated output buffer: on machines where page faults dominate, reusing
the buffer is what keeps large grids inside the latency budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import GaussianSet, ImageFrame, TextonGaussian, regularized_cov

M2_CUTOFF = 12.5


@dataclass(frozen=True)
class FeatureGrid:
    """Dense per-pixel feature image of shape (H, W, C)."""

    frame: ImageFrame
    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 3 or d.shape[:2] != (self.frame.height, self.frame.width):
            raise ValueError("data must be (H, W, C) matching the frame")
        object.__setattr__(self, "data", d)

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class AlphaStack:
    """Per-Gaussian composited alphas, shape (n, H, W)."""

    frame: ImageFrame
    alphas: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=np.float64)
        if a.ndim != 3 or a.shape[1:] != (self.frame.height, self.frame.width):
            raise ValueError("alphas must be (n, H, W) matching the frame")
        object.__setattr__(self, "alphas", a)

    @property
    def f_input(self) -> np.ndarray:
        """Max alpha per pixel; the constant-map replacement signal."""
        if self.alphas.shape[0] == 0:
            return np.zeros((self.frame.height, self.frame.width))
        return self.alphas.max(axis=0)


def _inv_entries(cov: np.ndarray) -> tuple[float, float, float]:
    # Closed-form inverse of the regularized 2x2 SPD matrix.  Kept in this
    # exact a*c - b*b / elementwise form so that axis-permuted covariances
    # produce exactly permuted inverses.
    u = regularized_cov(cov)
    a, b, c = u[0, 0], u[0, 1], u[1, 1]
    det = a * c - b * b
    return (c / det, -b / det, a / det)


def opacity_at(g: TextonGaussian, p) -> float:
    """delta * exp(-M2) at a single point, without support truncation."""
    p = np.asarray(p, dtype=np.float64)
    i00, i01, i11 = _inv_entries(g.cov)
    dx = p[0] - g.mean[0]
    dy = p[1] - g.mean[1]
    m2 = dx * (i00 * dx + i01 * dy) + dy * (i01 * dx + i11 * dy)
    return float(g.weight * np.exp(-m2))


def _field_arrays(s: GaussianSet):
    n = len(s)
    mx = np.empty(n)
    my = np.empty(n)
    i00 = np.empty(n)
    i01 = np.empty(n)
    i11 = np.empty(n)
    hx = np.empty(n)
    hy = np.empty(n)
    for i, g in enumerate(s):
        mx[i], my[i] = g.mean
        i00[i], i01[i], i11[i] = _inv_entries(g.cov)
        u = regularized_cov(g.cov)
        hx[i] = np.sqrt(M2_CUTOFF * u[0, 0])
        hy[i] = np.sqrt(M2_CUTOFF * u[1, 1])
    return mx, my, i00, i01, i11, hx, hy


def _bboxes(mx, my, hx, hy, frame: ImageFrame) -> np.ndarray:
    x0 = np.maximum(0, np.floor(mx - hx)).astype(np.int64)
    x1 = np.minimum(frame.width, np.ceil(mx + hx) + 1).astype(np.int64)
    y0 = np.maximum(0, np.floor(my - hy)).astype(np.int64)
    y1 = np.minimum(frame.height, np.ceil(my + hy) + 1).astype(np.int64)
    return np.stack([x0, x1, y0, y1], axis=1)


@njit(cache=True)
def _splat_kernel(mx, my, i00, i01, i11, deltas, feats, bb, h, w, out):
    n = mx.shape[0]
    c_dim = feats.shape[1]
    hw = h * w
    counts = np.zeros(hw, np.int32)
    for i in range(n):
        if deltas[i] == 0.0:
            continue
        x0, x1, y0, y1 = bb[i, 0], bb[i, 1], bb[i, 2], bb[i, 3]
        for y in range(y0, y1):
            base = y * w
            for x in range(x0, x1):
                dx = x - mx[i]
                dy = y - my[i]
                m2 = dx * (i00[i] * dx + i01[i] * dy) + dy * (i01[i] * dx + i11[i] * dy)
                if m2 <= M2_CUTOFF:
                    counts[base + x] += 1
    offs = np.empty(hw + 1, np.int64)
    offs[0] = 0
    for p in range(hw):
        offs[p + 1] = offs[p] + counts[p]
    idxs = np.empty(offs[hw], np.int32)
    ovals = np.empty(offs[hw], np.float64)
    cur = offs[:hw].copy()
    for i in range(n):
        if deltas[i] == 0.0:
            continue
        x0, x1, y0, y1 = bb[i, 0], bb[i, 1], bb[i, 2], bb[i, 3]
        for y in range(y0, y1):
            base = y * w
            for x in range(x0, x1):
                dx = x - mx[i]
                dy = y - my[i]
                m2 = dx * (i00[i] * dx + i01[i] * dy) + dy * (i01[i] * dx + i11[i] * dy)
                if m2 <= M2_CUTOFF:
                    p = base + x
                    k = cur[p]
                    idxs[k] = i
                    ovals[k] = deltas[i] * np.exp(-m2)
                    cur[p] = k + 1
    # Per pixel: convert opacities to composited alphas back-to-front, then
    # accumulate features.  Every output entry is written exactly once.
    for p in range(hw):
        s = offs[p]
        e = offs[p + 1]
        y = p // w
        x = p - y * w
        if s == e:
            for c in range(c_dim):
                out[y, x, c] = 0.0
            continue
        t = 1.0
        for k in range(e - 1, s - 1, -1):
            o = ovals[k]
            ovals[k] = o * t
            t *= 1.0 - o
        i0 = idxs[s]
        a0 = ovals[s]
        for c in range(c_dim):
            out[y, x, c] = a0 * feats[i0, c]
        for k in range(s + 1, e):
            ik = idxs[k]
            ak = ovals[k]
            for c in range(c_dim):
                out[y, x, c] += ak * feats[ik, c]


def alpha_maps(s: GaussianSet) -> AlphaStack:
    """Truncated opacities composited into per-Gaussian alpha maps."""
    frame = s.frame
    n = len(s)
    if n == 0:
        return AlphaStack(frame=frame, alphas=np.zeros((0, frame.height, frame.width)))
    coords = frame.pixel_grid()
    mx, my, i00, i01, i11, _, _ = _field_arrays(s)
    dx = coords[..., 0][None] - mx[:, None, None]
    dy = coords[..., 1][None] - my[:, None, None]
    i00 = i00[:, None, None]
    i01 = i01[:, None, None]
    i11 = i11[:, None, None]
    m2 = dx * (i00 * dx + i01 * dy) + dy * (i01 * dx + i11 * dy)
    o = np.where(m2 <= M2_CUTOFF, s.weights()[:, None, None] * np.exp(-m2), 0.0)
    # Exclusive suffix product of (1 - o) gives each Gaussian's transmittance
    # through everything in front of it (later index = nearer).
    q = np.cumprod((1.0 - o)[::-1], axis=0)[::-1]
    trans = np.concatenate([q[1:], np.ones((1,) + o.shape[1:])], axis=0)
    return AlphaStack(frame=frame, alphas=o * trans)


def splat(s: GaussianSet, out: np.ndarray | None = None) -> FeatureGrid:
    """Composite concat(feature, direction) into an (H, W, n_f + 2) grid.

    `out` may supply a preallocated C-contiguous float64 buffer of the right
    shape; it is overwritten entirely and wrapped in the returned grid.
    """
    frame = s.frame
    c_dim = s.feature_dim + 2
    shape = (frame.height, frame.width, c_dim)
    if out is None:
        out = np.empty(shape)
    else:
        if out.shape != shape or out.dtype != np.float64 or not out.flags.c_contiguous:
            raise ValueError(f"out must be C-contiguous float64 of shape {shape}")
    n = len(s)
    if n == 0:
        out[...] = 0.0
        return FeatureGrid(frame=frame, data=out)
    mx, my, i00, i01, i11, hx, hy = _field_arrays(s)
    bb = _bboxes(mx, my, hx, hy, frame)
    feats = np.concatenate([s.features(), s.directions()], axis=1)
    feats = np.ascontiguousarray(feats)
    _splat_kernel(
        mx, my, i00, i01, i11, s.weights(), feats, bb, frame.height, frame.width, out
    )
    return FeatureGrid(frame=frame, data=out)


def render_preview(grid: FeatureGrid, projection="first3") -> np.ndarray:
    """Project a feature grid to RGB in [0, 1].

    `projection` is either the string "first3" (take the first three
    channels) or a (C, 3) matrix.
    """
    c = grid.channels
    if isinstance(projection, str):
        if projection != "first3":
            raise ValueError(f"unknown projection {projection!r}")
        if c < 3:
            raise ValueError("first3 projection needs at least 3 channels")
        rgb = grid.data[..., :3]
    else:
        m = np.asarray(projection, dtype=np.float64)
        if m.shape != (c, 3):
            raise ValueError(f"projection shape mismatch: want ({c}, 3), got {m.shape}")
        rgb = grid.data @ m
    return np.clip(rgb, 0.0, 1.0)
