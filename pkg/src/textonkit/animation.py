"""Flow-field texture animation.

Gaussian centers live in normalized [-1, 1] coordinates for the flow math
and are evaluated closed-form at each timestep from their initial positions,
so there is no integration drift.  Two flows are provided: a perturbed shear
(three horizontal bands, outer bands drifting in opposite directions with a
piecewise-linear noise offset, middle band stationary, wraparound at the
edges) and a rigid vortex (constant angular velocity, radius conserved).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import GaussianSet
from .runtime import thread_count
from .splatting import render_preview, splat

SHEAR_KEYFRAMES = 10
SHEAR_NOISE_STD = 1.0 / 30.0


@dataclass(frozen=True)
class ShearFlow:
    """Banded horizontal drift with seeded piecewise-linear perturbation."""

    velocity: float
    duration: float = 1.0
    seed: int = 0
    key_times: np.ndarray = field(init=False, repr=False)
    key_values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be > 0")
        rng = np.random.default_rng(self.seed)
        object.__setattr__(self, "key_times", np.linspace(0.0, self.duration, SHEAR_KEYFRAMES))
        object.__setattr__(
            self, "key_values", rng.normal(0.0, SHEAR_NOISE_STD, SHEAR_KEYFRAMES)
        )

    def epsilon(self, t: float) -> float:
        return float(np.interp(t, self.key_times, self.key_values))


@dataclass(frozen=True)
class VortexFlow:
    """Rigid rotation about the normalized origin."""

    omega: float

    def __post_init__(self):
        if not math.isfinite(self.omega):
            raise ValueError("omega must be finite")


def shear_position(p_init, t: float, flow: ShearFlow):
    """Advance one normalized point; x wraps into [-1, 1], y never moves."""
    x, y = float(p_init[0]), float(p_init[1])
    if y < -1.0 / 3.0:
        x = x - flow.velocity * t + flow.epsilon(t)
    elif y > 1.0 / 3.0:
        x = x + flow.velocity * t + flow.epsilon(t)
    if x > 1.0 or x < -1.0:
        x = math.fmod(x + 1.0, 2.0)
        if x < 0.0:
            x += 2.0
        x -= 1.0
    return np.array([x, y])


def vortex_position(p_init, t: float, flow: VortexFlow):
    """Rotate one normalized point about the origin by omega * t."""
    x, y = float(p_init[0]), float(p_init[1])
    r = math.hypot(x, y)
    phi = math.atan2(y, x) + flow.omega * t
    return np.array([r * math.cos(phi), r * math.sin(phi)])


def _to_norm(mean, w, h):
    sx = (w - 1) / 2.0 if w > 1 else 1.0
    sy = (h - 1) / 2.0 if h > 1 else 1.0
    return np.array([mean[0] / sx - 1.0, mean[1] / sy - 1.0])


def _from_norm(p, w, h):
    sx = (w - 1) / 2.0 if w > 1 else 1.0
    sy = (h - 1) / 2.0 if h > 1 else 1.0
    return np.array([(p[0] + 1.0) * sx, (p[1] + 1.0) * sy])


def set_at_time(s: GaussianSet, flow, t: float) -> GaussianSet:
    """Map every Gaussian's center through the flow at absolute time t.

    Vortex flow additionally co-rotates covariances and directions (in
    pixel space) so textons turn rigidly with the field.
    """
    w, h = s.frame.width, s.frame.height
    if isinstance(flow, VortexFlow):
        ang = flow.omega * t
        c, sn = math.cos(ang), math.sin(ang)
        rot = np.array([[c, -sn], [sn, c]])
    else:
        rot = None
    out = []
    for g in s:
        pn = _to_norm(g.mean, w, h)
        if isinstance(flow, ShearFlow):
            moved = shear_position(pn, t, flow)
        elif isinstance(flow, VortexFlow):
            moved = vortex_position(pn, t, flow)
        else:
            raise TypeError(f"unknown flow {type(flow).__name__}")
        kw = {"mean": _from_norm(moved, w, h)}
        if rot is not None:
            cov = rot @ g.cov @ rot.T
            kw["cov"] = 0.5 * (cov + cov.T)
            kw["direction"] = rot @ g.direction
        out.append(g.with_(**kw))
    return s.replace_gaussians(tuple(out))


def animate(
    s: GaussianSet, flow, frames: int, dt: float, projection="first3"
) -> list[np.ndarray]:
    """Render the set at t = 0, dt, ..., (frames-1)*dt as RGB arrays."""
    if frames < 1:
        raise ValueError("frames must be >= 1")

    def render_frame(k: int) -> np.ndarray:
        moved = set_at_time(s, flow, k * dt)
        return render_preview(splat(moved), projection)

    workers = min(thread_count(), frames)
    if workers <= 1:
        return [render_frame(k) for k in range(frames)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(render_frame, range(frames)))
