"""Planar geometry helpers: angle wrapping, polylines, oriented rectangles."""

from __future__ import annotations

import bisect
import math
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    wrapped = math.fmod(theta + math.pi, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    wrapped -= math.pi
    # fmod/add rounding can land exactly on +pi
    if wrapped >= math.pi:
        wrapped -= TWO_PI
    return wrapped


def to_local(x: float, y: float, ox: float, oy: float, heading: float) -> tuple[float, float]:
    """Express world point (x, y) in the frame at (ox, oy) rotated by heading."""
    c, s = math.cos(heading), math.sin(heading)
    dx, dy = x - ox, y - oy
    return c * dx + s * dy, -s * dx + c * dy


class Polyline:
    """Piecewise-linear curve parameterised by arc length.

    Evaluation beyond either end extrapolates along the first/last segment,
    so path followers never run off the end of a finite lane.
    """

    def __init__(self, points: Sequence[Sequence[float]]):
        pts = [(float(p[0]), float(p[1])) for p in points]
        if len(pts) < 2:
            raise ValueError("polyline needs at least two points")
        self.points = pts
        s = [0.0]
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            seg = math.hypot(x1 - x0, y1 - y0)
            if seg <= 0.0:
                raise ValueError("polyline has repeated consecutive points")
            s.append(s[-1] + seg)
        self.s = s
        self._arr = np.asarray(pts)

    @property
    def length(self) -> float:
        return self.s[-1]

    def _segment_for(self, s: float) -> int:
        i = bisect.bisect_right(self.s, s) - 1
        return min(max(i, 0), len(self.points) - 2)

    def point_at(self, s: float) -> tuple[float, float]:
        i = self._segment_for(s)
        (x0, y0), (x1, y1) = self.points[i], self.points[i + 1]
        u = (s - self.s[i]) / (self.s[i + 1] - self.s[i])
        if u == 0.0:
            return x0, y0
        return x0 + u * (x1 - x0), y0 + u * (y1 - y0)

    def heading_at(self, s: float) -> float:
        i = self._segment_for(s)
        (x0, y0), (x1, y1) = self.points[i], self.points[i + 1]
        return math.atan2(y1 - y0, x1 - x0)

    def project(self, x: float, y: float, hint: int | None = None) -> tuple[float, float, int]:
        """Closest-point projection.

        Returns (arc length, signed lateral offset, segment index); the offset
        is positive to the left of the direction of travel.  With ``hint`` only
        a window of segments around it is searched.
        """
        n = len(self.points) - 1
        if hint is None:
            lo, hi = 0, n
        else:
            lo, hi = max(0, hint - 2), min(n, hint + 8)
        best = None
        for i in range(lo, hi):
            (x0, y0), (x1, y1) = self.points[i], self.points[i + 1]
            ex, ey = x1 - x0, y1 - y0
            seg2 = ex * ex + ey * ey
            u = ((x - x0) * ex + (y - y0) * ey) / seg2
            # first/last segments extrapolate
            if i > 0:
                u = max(u, 0.0)
            if i < n - 1:
                u = min(u, 1.0)
            px, py = x0 + u * ex, y0 + u * ey
            d2 = (x - px) ** 2 + (y - py) ** 2
            if best is None or d2 < best[0]:
                seg = math.sqrt(seg2)
                lat = (ex * (y - y0) - ey * (x - x0)) / seg
                best = (d2, self.s[i] + u * seg, lat, i)
        _, s, lat, i = best
        return s, lat, i

    def distance_to(self, x: float, y: float) -> float:
        """Euclidean distance to the finite polyline (no extrapolation)."""
        p0, p1 = self._arr[:-1], self._arr[1:]
        e = p1 - p0
        u = ((x - p0[:, 0]) * e[:, 0] + (y - p0[:, 1]) * e[:, 1]) / (e ** 2).sum(axis=1)
        u = np.clip(u, 0.0, 1.0)
        d = np.hypot(p0[:, 0] + u * e[:, 0] - x, p0[:, 1] + u * e[:, 1] - y)
        return float(d.min())


def rect_corners(x: float, y: float, heading: float, length: float, width: float) -> np.ndarray:
    """Corners (4x2) of a rectangle centred at (x, y), counter-clockwise."""
    c, s = math.cos(heading), math.sin(heading)
    hl, hw = 0.5 * length, 0.5 * width
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([x, y])


def rects_overlap(a: np.ndarray, b: np.ndarray, a_size: tuple[float, float],
                  b_size: tuple[float, float]) -> np.ndarray:
    """Vectorised separating-axis test for two sequences of oriented rectangles.

    ``a`` and ``b`` are (T, 3) arrays of (x, y, heading) poses; sizes are
    (length, width).  Touching rectangles count as overlapping.
    Returns a boolean array of length T.
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    ca, sa = np.cos(a[:, 2]), np.sin(a[:, 2])
    cb, sb = np.cos(b[:, 2]), np.sin(b[:, 2])
    d = b[:, :2] - a[:, :2]
    ahl, ahw = 0.5 * a_size[0], 0.5 * a_size[1]
    bhl, bhw = 0.5 * b_size[0], 0.5 * b_size[1]
    # unit axes: a-forward, a-left, b-forward, b-left
    axes = [(ca, sa), (-sa, ca), (cb, sb), (-sb, cb)]
    a_ax = axes[:2]
    b_ax = axes[2:]
    overlap = np.ones(len(a), dtype=bool)
    for ux, uy in axes:
        ra = ahl * np.abs(a_ax[0][0] * ux + a_ax[0][1] * uy) + ahw * np.abs(a_ax[1][0] * ux + a_ax[1][1] * uy)
        rb = bhl * np.abs(b_ax[0][0] * ux + b_ax[0][1] * uy) + bhw * np.abs(b_ax[1][0] * ux + b_ax[1][1] * uy)
        dist = np.abs(d[:, 0] * ux + d[:, 1] * uy)
        overlap &= dist <= ra + rb
    return overlap


def points_in_rect(px: np.ndarray, py: np.ndarray, x: float, y: float, heading: float,
                   length: float, width: float) -> np.ndarray:
    c, s = math.cos(heading), math.sin(heading)
    dx, dy = px - x, py - y
    u = c * dx + s * dy
    v = -s * dx + c * dy
    return (np.abs(u) <= 0.5 * length) & (np.abs(v) <= 0.5 * width)


def points_in_polygon(px: np.ndarray, py: np.ndarray, polygon: Sequence[Sequence[float]]) -> np.ndarray:
    """Even-odd ray casting, vectorised over query points."""
    inside = np.zeros(np.shape(px), dtype=bool)
    n = len(polygon)
    for i in range(n):
        x0, y0 = polygon[i]
        x1, y1 = polygon[(i + 1) % n]
        crosses = (y0 > py) != (y1 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (px < x_at)
    return inside
