"""Axis-aligned planar geometry shared by the world model, feasibility
trials and the motion planner.

Everything here is deliberately 2D: the robot is a disc, furniture is an
axis-aligned rectangle, and manipulation reach is a circle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Normalize an angle to the half-open interval (-pi, pi]."""
    wrapped = math.fmod(theta, TWO_PI)
    if wrapped > math.pi:
        wrapped -= TWO_PI
    elif wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle given by center and half extents (meters)."""

    cx: float
    cy: float
    hx: float
    hy: float

    def __post_init__(self) -> None:
        if self.hx <= 0.0 or self.hy <= 0.0:
            raise ValueError(f"rect half extents must be positive, got ({self.hx}, {self.hy})")

    @property
    def x_min(self) -> float:
        return self.cx - self.hx

    @property
    def x_max(self) -> float:
        return self.cx + self.hx

    @property
    def y_min(self) -> float:
        return self.cy - self.hy

    @property
    def y_max(self) -> float:
        return self.cy + self.hy

    def contains(self, x: float, y: float) -> bool:
        """Closed-interval point membership (boundary counts as inside)."""
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def distance_to(self, x: float, y: float) -> float:
        """Euclidean distance from a point to the rectangle (0 inside)."""
        dx = max(self.x_min - x, 0.0, x - self.x_max)
        dy = max(self.y_min - y, 0.0, y - self.y_max)
        return math.hypot(dx, dy)

    def overlaps(self, other: "Rect") -> bool:
        """True when the open interiors intersect; touching edges do not count."""
        return (
            self.x_min < other.x_max
            and other.x_min < self.x_max
            and self.y_min < other.y_max
            and other.y_min < self.y_max
        )

    def expanded(self, margin: float) -> "Rect":
        return Rect(self.cx, self.cy, self.hx + margin, self.hy + margin)


def disc_hits_rect(x: float, y: float, radius: float, rect: Rect) -> bool:
    """True when a disc of the given radius centered at (x, y) touches the rect."""
    return rect.distance_to(x, y) <= radius


def disc_hits_rect_batch(points: np.ndarray, radius: float, rect: Rect) -> np.ndarray:
    """Vectorized disc-vs-rect test for an (n, 2) array of disc centers."""
    dx = np.maximum(rect.x_min - points[:, 0], 0.0)
    dx = np.maximum(dx, points[:, 0] - rect.x_max)
    dy = np.maximum(rect.y_min - points[:, 1], 0.0)
    dy = np.maximum(dy, points[:, 1] - rect.y_max)
    return np.hypot(dx, dy) <= radius


def segment_hits_rect(p0: tuple[float, float], p1: tuple[float, float], rect: Rect) -> bool:
    """Slab-clipping test: does the closed segment p0-p1 intersect the rect?"""
    t0, t1 = 0.0, 1.0
    dx = p1[0] - p0[0]
    dy = p1[1] - p0[1]
    for pos, delta, lo, hi in (
        (p0[0], dx, rect.x_min, rect.x_max),
        (p0[1], dy, rect.y_min, rect.y_max),
    ):
        if abs(delta) < 1e-12:
            if pos < lo or pos > hi:
                return False
            continue
        ta = (lo - pos) / delta
        tb = (hi - pos) / delta
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return False
    return True


def segments_hit_rect(starts: np.ndarray, end: tuple[float, float], rect: Rect) -> np.ndarray:
    """Vectorized variant of segment_hits_rect for (n, 2) start points and a
    shared end point."""
    n = starts.shape[0]
    t0 = np.zeros(n)
    t1 = np.ones(n)
    alive = np.ones(n, dtype=bool)
    for axis, (lo, hi) in enumerate(((rect.x_min, rect.x_max), (rect.y_min, rect.y_max))):
        pos = starts[:, axis]
        delta = end[axis] - pos
        parallel = np.abs(delta) < 1e-12
        outside = parallel & ((pos < lo) | (pos > hi))
        alive &= ~outside
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo - pos) / delta
            tb = (hi - pos) / delta
        swap = ta > tb
        ta2 = np.where(swap, tb, ta)
        tb2 = np.where(swap, ta, tb)
        use = alive & ~parallel
        t0 = np.where(use, np.maximum(t0, ta2), t0)
        t1 = np.where(use, np.minimum(t1, tb2), t1)
        alive &= ~(t0 > t1)
    return alive
