"""Shared fixtures and independent oracles.

The oracles here intentionally avoid the production code paths: moments are
summed with explicit loops, compositing uses dense numpy with
np.linalg.inv, and assignments are found by enumerating permutations.
"""

import itertools
import math

import numpy as np
import pytest

from textonkit.model import GaussianSet, ImageFrame, TextonGaussian
from textonkit.estimation import DenseMaps, SegmentationStack

M2_CUTOFF = 12.5
COV_EPSILON = 1e-6


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def make_gaussian(
    rng,
    frame,
    nf,
    weight=None,
    mean=None,
    cov=None,
    prob=None,
):
    """One random valid texton with eigenvalues kept well above the
    regularization floor so all numeric routes agree on conditioning."""
    if mean is None:
        mean = rng.uniform([0, 0], [frame.width - 1, frame.height - 1])
    if cov is None:
        theta = rng.uniform(0, 2 * np.pi)
        c, s = np.cos(theta), np.sin(theta)
        r = np.array([[c, -s], [s, c]])
        lams = rng.uniform(0.5, 9.0, size=2)
        cov = r @ np.diag(lams) @ r.T
        cov = 0.5 * (cov + cov.T)
    if weight is None:
        weight = float(rng.integers(0, 2))
    if prob is None:
        prob = rng.uniform(0.05, 1.0)
    return TextonGaussian(
        weight=float(weight),
        prob=float(prob),
        mean=mean,
        cov=cov,
        direction=unit(rng.normal(size=2)),
        feature=unit(rng.normal(size=nf)),
        mask_area=float(rng.uniform(1.0, 40.0)),
    )


def random_set(rng, frame=None, n=5, nf=3, all_effective=False):
    if frame is None:
        frame = ImageFrame(width=32, height=32)
    gaussians = [
        make_gaussian(rng, frame, nf, weight=1.0 if all_effective else None)
        for _ in range(n)
    ]
    return GaussianSet(
        frame=frame, gaussians=tuple(gaussians), feature_dim=nf, capacity=max(n, 1)
    )


def snap_means(s, grid=16.0):
    """Snap means to the 1/grid lattice so integer shifts stay exact."""
    snapped = [
        g.with_(mean=np.round(g.mean * grid) / grid) for g in s.gaussians
    ]
    return s.replace_gaussians(snapped)


def mask_moments_oracle(mask):
    """Hand-summed mass, mean, covariance, and self-overlap of one mask."""
    h, w = mask.shape
    mass = 0.0
    mx = my = 0.0
    for y in range(h):
        for x in range(w):
            mass += mask[y, x]
            mx += x * mask[y, x]
            my += y * mask[y, x]
    mx /= mass
    my /= mass
    cxx = cxy = cyy = 0.0
    ss = 0.0
    for y in range(h):
        for x in range(w):
            dx, dy = x - mx, y - my
            cxx += dx * dx * mask[y, x]
            cxy += dx * dy * mask[y, x]
            cyy += dy * dy * mask[y, x]
            ss += mask[y, x] * mask[y, x]
    cov = np.array([[cxx, cxy], [cxy, cyy]]) / mass
    return mass, np.array([mx, my]), cov, ss / mass


def composite_oracle(s):
    """Dense per-pixel alpha compositing, no bounding boxes, generic inverse."""
    h, w = s.frame.height, s.frame.width
    ys, xs = np.mgrid[0:h, 0:w]
    pts = np.stack([xs, ys], axis=-1).astype(np.float64)
    opac = np.zeros((len(s), h, w))
    for i, g in enumerate(s):
        cov = np.asarray(g.cov, dtype=np.float64)
        if np.linalg.eigvalsh(cov).min() < COV_EPSILON:
            cov = cov + COV_EPSILON * np.eye(2)
        inv = np.linalg.inv(cov)
        d = pts - g.mean
        m2 = np.einsum("hwi,ij,hwj->hw", d, inv, d)
        o = g.weight * np.exp(-m2)
        o[m2 > M2_CUTOFF] = 0.0
        opac[i] = o
    trans = np.ones((h, w))
    alphas = np.zeros_like(opac)
    for i in range(len(s) - 1, -1, -1):
        alphas[i] = opac[i] * trans
        trans = trans * (1.0 - opac[i])
    return alphas


def splat_oracle(s):
    alphas = composite_oracle(s)
    feats = np.concatenate([s.features(), s.directions()], axis=1)
    return np.einsum("nhw,nc->hwc", alphas, feats)


_PERM_CACHE = {}


def _perms(n):
    if n not in _PERM_CACHE:
        _PERM_CACHE[n] = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    return _PERM_CACHE[n]


def brute_force_assignment(cost):
    """Exhaustive minimum-cost assignment; ties broken lexicographically.

    Returns (total, pairs) with pairs sorted by row index.
    """
    c = np.asarray(cost, dtype=np.float64)
    n, m = c.shape
    if n == 0 or m == 0:
        return 0.0, ()
    if n <= m:
        cols = _perms(m)[:, :n] if n < m else _perms(n)
        totals = c[np.arange(n)[None, :], cols].sum(axis=1)
        best = totals.min()
        tied = cols[totals <= best + 1e-12]
        pick = min(tuple(row) for row in tied)
        return float(best), tuple(zip(range(n), pick))
    total, pairs = brute_force_assignment(c.T)
    return total, tuple(sorted((i, j) for j, i in pairs))


def swap_tau_oracle(area_i, area_j, p_i, p_j, gamma):
    """Scalar evaluation of the swap coefficient, infinities made explicit."""
    if gamma == 0:
        return 1.0
    if math.isnan(area_i) or math.isnan(area_j):
        ra = -math.inf
    elif area_j == 0:
        ra = math.inf
    else:
        ra = area_i / area_j
    rp = math.inf if p_j == 0 else p_i / p_j
    t = min(max(ra, rp), 1.0)
    return max(t, 0.0) ** gamma


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_frame():
    return ImageFrame(width=32, height=32)


def frame_of(masks):
    return ImageFrame(width=masks.shape[2], height=masks.shape[1])


def normalized_stack(masks):
    masks = np.asarray(masks, dtype=np.float64)
    return SegmentationStack(frame=frame_of(masks), masks=masks)


def uniform_maps(frame, nf=3):
    app = np.tile(unit(np.arange(1, nf + 1, dtype=np.float64)), (frame.height, frame.width, 1))
    direct = np.tile(unit([1.0, 1.0]), (frame.height, frame.width, 1))
    return DenseMaps(frame=frame, appearance=app, direction=direct)


def fixed_mask_cases():
    """Deterministic single-mask stacks of varying shape and softness."""
    cases = []
    # 4-pixel square on a 4x4 frame.
    sq = np.zeros((4, 4))
    sq[1:3, 1:3] = 1.0
    cases.append(np.stack([sq, 1.0 - sq]))
    # full-frame mask on a 2x2 frame
    cases.append(np.ones((1, 2, 2)))
    # single row / single column supports
    row = np.zeros((3, 5))
    row[1] = 1.0
    cases.append(np.stack([row, 1.0 - row]))
    col = np.zeros((5, 3))
    col[:, 2] = 1.0
    cases.append(np.stack([col, 1.0 - col]))
    # diagonal line
    diag = np.eye(4)
    cases.append(np.stack([diag, 1.0 - diag]))
    # soft two-way splits at several mixing levels
    rng = np.random.default_rng(99)
    for k in range(8):
        a = rng.uniform(0.05, 0.95, size=(5, 6))
        cases.append(np.stack([a, 1.0 - a]))
    # soft three-way splits
    for k in range(7):
        raw = rng.uniform(0.01, 1.0, size=(3, 4, 7))
        cases.append(raw / raw.sum(axis=0, keepdims=True))
    return cases
