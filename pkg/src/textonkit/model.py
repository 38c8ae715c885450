"""Core data model: image frames, Gaussian textons, sets, and affine transforms.

A texture is modeled as an ordered collection of 2D Gaussians ("textons"),
each carrying a binary-ish existence weight, a center, a covariance that
approximates the texton's elliptical footprint, a unit anisotropy direction,
and a unit appearance feature vector.  Everything in this module is immutable
and purely functional; transforms return new objects.

Coordinate convention: x grows right, y grows down, origin at the center of
pixel (0, 0).  Compositing order of a set is list order with the last entry
front-most.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

# Floor added to numerically singular covariances before inversion (px^2).
COV_EPSILON = 1e-6


class DegenerateTransformError(ValueError):
    """Raised when an affine transform is numerically singular."""


def _as_vec2(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64).reshape(2)
    return a.copy()


def _as_mat2(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64).reshape(2, 2)
    return a.copy()


@dataclass(frozen=True)
class ImageFrame:
    """Pixel grid extent.  Coordinates live on [0, width-1] x [0, height-1]."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("frame dimensions must be >= 1")

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.width - 1) / 2.0, (self.height - 1) / 2.0])

    def pixel_grid(self) -> np.ndarray:
        """(H, W, 2) array of pixel-center coordinates, [x, y] per pixel."""
        xs = np.arange(self.width, dtype=np.float64)
        ys = np.arange(self.height, dtype=np.float64)
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx, gy], axis=-1)


@dataclass(frozen=True)
class TextonGaussian:
    """One latent texton.

    weight is the (possibly relaxed) existence sample in [0, 1]; prob is the
    Bernoulli existence probability it was drawn from.  mask_area records the
    soft pixel count of the source segment when the texton came from a mask
    (NaN when unknown), and scales with |det A| under affine maps.
    """

    weight: float
    prob: float
    mean: np.ndarray
    cov: np.ndarray
    direction: np.ndarray
    feature: np.ndarray
    mask_area: float = float("nan")

    def __post_init__(self):
        object.__setattr__(self, "mean", _as_vec2(self.mean))
        object.__setattr__(self, "cov", _as_mat2(self.cov))
        object.__setattr__(self, "direction", _as_vec2(self.direction))
        object.__setattr__(
            self, "feature", np.asarray(self.feature, dtype=np.float64).reshape(-1).copy()
        )
        self.mean.flags.writeable = False
        self.cov.flags.writeable = False
        self.direction.flags.writeable = False
        self.feature.flags.writeable = False

    @property
    def effective(self) -> bool:
        return self.weight >= 0.5

    def with_(self, **kw) -> "TextonGaussian":
        return replace(self, **kw)


@dataclass(frozen=True)
class GaussianSet:
    """Ordered texton collection; index len-1 composites front-most."""

    frame: ImageFrame
    gaussians: tuple[TextonGaussian, ...]
    feature_dim: int
    capacity: int = 100

    def __post_init__(self):
        object.__setattr__(self, "gaussians", tuple(self.gaussians))

    def __len__(self) -> int:
        return len(self.gaussians)

    def __iter__(self):
        return iter(self.gaussians)

    def __getitem__(self, i: int) -> TextonGaussian:
        return self.gaussians[i]

    def replace_gaussians(self, gaussians: Iterable[TextonGaussian]) -> "GaussianSet":
        return replace(self, gaussians=tuple(gaussians))

    def effective_indices(self) -> list[int]:
        return [i for i, g in enumerate(self.gaussians) if g.effective]

    # Stacked views, convenient for vectorized math.
    def means(self) -> np.ndarray:
        if not self.gaussians:
            return np.zeros((0, 2))
        return np.stack([g.mean for g in self.gaussians])

    def covs(self) -> np.ndarray:
        if not self.gaussians:
            return np.zeros((0, 2, 2))
        return np.stack([g.cov for g in self.gaussians])

    def weights(self) -> np.ndarray:
        return np.array([g.weight for g in self.gaussians])

    def probs(self) -> np.ndarray:
        return np.array([g.prob for g in self.gaussians])

    def directions(self) -> np.ndarray:
        if not self.gaussians:
            return np.zeros((0, 2))
        return np.stack([g.direction for g in self.gaussians])

    def features(self) -> np.ndarray:
        if not self.gaussians:
            return np.zeros((0, self.feature_dim))
        return np.stack([g.feature for g in self.gaussians])


@dataclass(frozen=True)
class AffineTransform2D:
    """p' = linear @ p + translation, applied to means, covariances, directions."""

    linear: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "linear", _as_mat2(self.linear))
        object.__setattr__(self, "translation", _as_vec2(self.translation))
        self.linear.flags.writeable = False
        self.translation.flags.writeable = False

    @staticmethod
    def identity() -> "AffineTransform2D":
        return AffineTransform2D(np.eye(2), np.zeros(2))

    @staticmethod
    def translation_by(t) -> "AffineTransform2D":
        return AffineTransform2D(np.eye(2), t)

    @staticmethod
    def rotation(theta: float, about=None) -> "AffineTransform2D":
        # Quarter-turn multiples snap to exact 0/±1 entries so that axis
        # permutations of the pixel grid stay bitwise exact.
        k = round(theta / (np.pi / 2.0))
        if abs(theta - k * (np.pi / 2.0)) <= 1e-12:
            c, s = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(k) % 4]
        else:
            c, s = np.cos(theta), np.sin(theta)
        a = np.array([[c, -s], [s, c]])
        if about is None:
            t = np.zeros(2)
        else:
            about = _as_vec2(about)
            t = about - a @ about
        return AffineTransform2D(a, t)

    @staticmethod
    def scaling(s: float, about=None) -> "AffineTransform2D":
        a = np.eye(2) * float(s)
        if about is None:
            t = np.zeros(2)
        else:
            about = _as_vec2(about)
            t = about - a @ about
        return AffineTransform2D(a, t)

    def inverse(self) -> "AffineTransform2D":
        det = float(np.linalg.det(self.linear))
        if abs(det) <= 1e-12:
            raise DegenerateTransformError("degenerate transform")
        inv = np.linalg.inv(self.linear)
        return AffineTransform2D(inv, -inv @ self.translation)

    def apply_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ self.linear.T + self.translation


def regularized_cov(cov: np.ndarray) -> np.ndarray:
    """Return cov, floored by COV_EPSILON * I when numerically singular.

    Well-conditioned covariances pass through untouched so that closed-form
    opacity values stay exact.
    """
    c = np.asarray(cov, dtype=np.float64)
    tr = c[0, 0] + c[1, 1]
    det = c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0]
    disc = max(tr * tr - 4.0 * det, 0.0)
    lam_min = (tr - np.sqrt(disc)) / 2.0
    if lam_min < COV_EPSILON:
        return c + COV_EPSILON * np.eye(2)
    return c


def validate_set(s: GaussianSet) -> list[str]:
    """Check every invariant; return human-readable violations (never raises)."""
    problems: list[str] = []
    if len(s.gaussians) > s.capacity:
        problems.append(
            f"set holds {len(s.gaussians)} gaussians, exceeding capacity {s.capacity}"
        )
    for i, g in enumerate(s.gaussians):
        if g.feature.shape[0] != s.feature_dim:
            problems.append(f"feature_dim mismatch at index {i}")
        if abs(g.cov[0, 1] - g.cov[1, 0]) > 1e-9:
            problems.append(f"covariance not symmetric at index {i}")
        else:
            tr = g.cov[0, 0] + g.cov[1, 1]
            det = g.cov[0, 0] * g.cov[1, 1] - g.cov[0, 1] * g.cov[1, 0]
            lam_min = (tr - np.sqrt(max(tr * tr - 4 * det, 0.0))) / 2.0
            if lam_min < -1e-9:
                problems.append(f"not PSD at index {i}")
        nrm = float(np.linalg.norm(g.direction))
        if abs(nrm - 1.0) > 1e-6:
            problems.append(f"direction not unit at index {i}")
        fn = float(np.linalg.norm(g.feature))
        if fn == 0.0:
            problems.append(f"zero feature at index {i}")
        elif abs(fn - 1.0) > 1e-6:
            problems.append(f"feature not unit at index {i}")
        if not (0.0 <= g.weight <= 1.0):
            problems.append(f"weight outside [0,1] at index {i}")
        if not (0.0 <= g.prob <= 1.0):
            problems.append(f"prob outside [0,1] at index {i}")
        if not np.isnan(g.mask_area) and g.mask_area < 0:
            problems.append(f"negative mask_area at index {i}")
        if not np.all(np.isfinite(g.mean)) or not np.all(np.isfinite(g.cov)):
            problems.append(f"non-finite geometry at index {i}")
    return problems


def apply_affine(s: GaussianSet, t: AffineTransform2D) -> GaussianSet:
    """Transform every texton: mean affinely, cov by A U A^T, direction renormalized."""
    a = t.linear
    det = float(np.linalg.det(a))
    if abs(det) <= 1e-12:
        raise DegenerateTransformError("degenerate transform")
    out = []
    for g in s.gaussians:
        mean = a @ g.mean + t.translation
        cov = a @ g.cov @ a.T
        d = a @ g.direction
        dn = float(np.linalg.norm(d))
        # Skip the no-op division so identity/rotation transforms keep
        # direction bits unchanged.
        direction = d / dn if dn > 0 and abs(dn - 1.0) > 1e-12 else d
        area = g.mask_area * abs(det)
        out.append(
            g.with_(mean=mean, cov=cov, direction=direction, mask_area=area)
        )
    return s.replace_gaussians(out)


def filter_in_bounds(s: GaussianSet, margin: float = 0.0) -> GaussianSet:
    """Keep textons whose means lie within the frame shrunk by margin."""
    if margin < 0:
        raise ValueError("margin must be >= 0")
    lo_x, hi_x = margin, s.frame.width - 1 - margin
    lo_y, hi_y = margin, s.frame.height - 1 - margin
    kept = [
        g
        for g in s.gaussians
        if lo_x <= g.mean[0] <= hi_x and lo_y <= g.mean[1] <= hi_y
    ]
    return s.replace_gaussians(kept)
