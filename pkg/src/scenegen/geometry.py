"""Oriented bounding boxes and the 2D footprint math everything else builds on.

All boxes live in a top-view plane: ``center_x/center_y`` are the footprint
center, ``angle`` rotates the local axes about the vertical, ``elevation`` is
the height of the bottom face above the floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


@dataclass(frozen=True)
class OBB:
    center_x: float
    center_y: float
    elevation: float
    size_x: float
    size_y: float
    size_z: float
    angle: float

    def __post_init__(self):
        if self.size_x <= 0 or self.size_y <= 0 or self.size_z <= 0:
            raise ValueError(f"OBB sizes must be positive, got "
                             f"({self.size_x}, {self.size_y}, {self.size_z})")
        object.__setattr__(self, "angle", normalize_angle(self.angle))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.center_x, self.center_y])

    @property
    def top(self) -> float:
        return self.elevation + self.size_z

    @property
    def footprint_area(self) -> float:
        return self.size_x * self.size_y

    @property
    def diag(self) -> float:
        return math.sqrt(self.size_x ** 2 + self.size_y ** 2 + self.size_z ** 2)

    def corners(self) -> np.ndarray:
        """Footprint corner points (4x2, anticlockwise) in the world frame."""
        hx, hy = self.size_x / 2.0, self.size_y / 2.0
        local = np.array([[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]])
        return local @ rot2(self.angle).T + self.center

    def to_local(self, pt: np.ndarray) -> np.ndarray:
        """World point -> this box's local frame (center at origin)."""
        return rot2(-self.angle) @ (np.asarray(pt) - self.center)

    def to_world(self, pt: np.ndarray) -> np.ndarray:
        return rot2(self.angle) @ np.asarray(pt) + self.center

    def moved(self, center_x: float, center_y: float, angle: float,
              elevation: float | None = None) -> "OBB":
        return replace(self, center_x=center_x, center_y=center_y,
                       angle=normalize_angle(angle),
                       elevation=self.elevation if elevation is None else elevation)


def rot2(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def footprint_intersection_area(a: OBB, b: OBB) -> float:
    """Area of the intersection of two (possibly rotated) footprints.

    Sutherland-Hodgman clipping of b's footprint against a's.
    """
    poly = [tuple(p) for p in b.corners()]
    for p1, p2 in zip(a.corners(), np.roll(a.corners(), -1, axis=0)):
        if not poly:
            return 0.0
        edge = np.array(p2) - np.array(p1)
        out = []
        prev = poly[-1]
        prev_in = _cross(edge, np.array(prev) - p1) >= -1e-12
        for cur in poly:
            cur_in = _cross(edge, np.array(cur) - p1) >= -1e-12
            if cur_in:
                if not prev_in:
                    out.append(_seg_line(prev, cur, p1, p2))
                out.append(cur)
            elif prev_in:
                out.append(_seg_line(prev, cur, p1, p2))
            prev, prev_in = cur, cur_in
        poly = out
    if len(poly) < 3:
        return 0.0
    pts = np.array(poly)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _cross(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


def _seg_line(p, q, a, b):
    p, q, a, b = map(np.asarray, (p, q, a, b))
    d1, d2 = q - p, b - a
    denom = _cross(d1, d2)
    if abs(denom) < 1e-15:
        return tuple(q)
    t = _cross(a - p, d2) / denom
    return tuple(p + t * d1)


def aabb_hull(boxes: list[tuple[np.ndarray, OBB]]) -> tuple[float, float, float, float, float, float]:
    """Axis-aligned hull of footprints given as (corner array, box) pairs.

    Returns (min_x, max_x, min_y, max_y, min_elev, max_top).
    """
    xs, ys, lo, hi = [], [], [], []
    for corners, box in boxes:
        xs.extend(corners[:, 0])
        ys.extend(corners[:, 1])
        lo.append(box.elevation)
        hi.append(box.top)
    return min(xs), max(xs), min(ys), max(ys), min(lo), max(hi)
