"""Planar geometric primitives and the distance functions used by the oracles.

Boxes are oriented rectangles. All distance routines return exactly ``0.0``
when the shapes overlap or touch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_EPS = 1e-12


def normalize_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_angle(float(self.heading)))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class OrientedBox:
    center: Pose2D
    length: float
    width: float

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0):
            raise ValueError(f"box dimensions must be positive, got {self.length} x {self.width}")

    def corners(self) -> np.ndarray:
        c = self.center
        return box_corners(c.x, c.y, c.heading, self.length, self.width)


@dataclass(frozen=True, eq=False)
class Polyline:
    """Ordered 2D points; consecutive duplicates are rejected."""

    points: np.ndarray = field()

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ValueError("polyline needs at least two (x, y) points")
        seg = np.diff(pts, axis=0)
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(lengths == 0):
            raise ValueError("polyline has identical consecutive points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __eq__(self, other):
        return isinstance(other, Polyline) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    @property
    def segments(self) -> np.ndarray:
        """(S, 2, 2) array of consecutive point pairs."""
        return np.stack([self.points[:-1], self.points[1:]], axis=1)

    @property
    def length(self) -> float:
        seg = np.diff(self.points, axis=0)
        return float(np.hypot(seg[:, 0], seg[:, 1]).sum())


def box_corners(x: float, y: float, heading: float, length: float, width: float) -> np.ndarray:
    """Corners of an oriented box in counter-clockwise order, shape (4, 2)."""
    c, s = math.cos(heading), math.sin(heading)
    hl, hw = 0.5 * length, 0.5 * width
    local = ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw))
    return np.array([(x + c * u - s * v, y + s * u + c * v) for u, v in local])


def batch_box_corners(xy: np.ndarray, heading: np.ndarray, length, width) -> np.ndarray:
    """Vectorized :func:`box_corners`; returns (B, 4, 2)."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    heading = np.asarray(heading, dtype=float).reshape(-1)
    hl = 0.5 * np.broadcast_to(np.asarray(length, dtype=float), heading.shape)
    hw = 0.5 * np.broadcast_to(np.asarray(width, dtype=float), heading.shape)
    c, s = np.cos(heading), np.sin(heading)
    su = np.array([1.0, -1.0, -1.0, 1.0])
    sv = np.array([1.0, 1.0, -1.0, -1.0])
    u = hl[:, None] * su
    v = hw[:, None] * sv
    out = np.empty((len(heading), 4, 2))
    out[:, :, 0] = xy[:, 0:1] + c[:, None] * u - s[:, None] * v
    out[:, :, 1] = xy[:, 1:2] + s[:, None] * u + c[:, None] * v
    return out


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from points ``p`` to segments ``a``-``b``; all broadcast over leading dims."""
    ab = b - a
    ap = p - a
    denom = np.sum(ab * ab, axis=-1)
    t = np.where(denom > 0, np.sum(ap * ab, axis=-1) / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[..., None] * ab
    d = p - proj
    return np.hypot(d[..., 0], d[..., 1])


def segments_distance(p1, p2, q1, q2) -> np.ndarray:
    """Minimum distance between segments p1-p2 and q1-q2 (broadcasting)."""
    p1, p2, q1, q2 = (np.asarray(v, dtype=float) for v in (p1, p2, q1, q2))
    r = p2 - p1
    s = q2 - q1
    qp = q1 - p1
    d1 = _cross(r[..., 0], r[..., 1], qp[..., 0], qp[..., 1])
    d2 = _cross(r[..., 0], r[..., 1], (q2 - p1)[..., 0], (q2 - p1)[..., 1])
    d3 = _cross(s[..., 0], s[..., 1], (p1 - q1)[..., 0], (p1 - q1)[..., 1])
    d4 = _cross(s[..., 0], s[..., 1], (p2 - q1)[..., 0], (p2 - q1)[..., 1])
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)
    dist = np.minimum(
        np.minimum(point_segment_distance(p1, q1, q2), point_segment_distance(p2, q1, q2)),
        np.minimum(point_segment_distance(q1, p1, p2), point_segment_distance(q2, p1, p2)),
    )
    dist = np.where(proper, 0.0, dist)
    return np.where(dist < _EPS, 0.0, dist)


def _edges(corners: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return corners, np.roll(corners, -1, axis=-2)


def batch_boxes_overlap(ca: np.ndarray, cb: np.ndarray) -> np.ndarray:
    """Separating-axis overlap test for (B, 4, 2) corner arrays; touching counts."""
    ca = np.asarray(ca, dtype=float)
    cb = np.asarray(cb, dtype=float)
    overlap = np.ones(np.broadcast_shapes(ca.shape[:-2], cb.shape[:-2]), dtype=bool)
    for poly in (ca, cb):
        for i in range(2):
            edge = poly[..., i + 1, :] - poly[..., i, :]
            axis = np.stack([-edge[..., 1], edge[..., 0]], axis=-1)
            pa = np.einsum("...kj,...j->...k", ca, axis)
            pb = np.einsum("...kj,...j->...k", cb, axis)
            scale = np.maximum(np.abs(pa).max(axis=-1), np.abs(pb).max(axis=-1)) + 1.0
            tol = 1e-12 * scale
            sep = (pa.max(axis=-1) < pb.min(axis=-1) - tol) | (pb.max(axis=-1) < pa.min(axis=-1) - tol)
            overlap &= ~sep
    return overlap


def batch_box_distance(ca: np.ndarray, cb: np.ndarray) -> np.ndarray:
    """Box-to-box distance for corner arrays of shape (..., 4, 2)."""
    ca = np.asarray(ca, dtype=float)
    cb = np.asarray(cb, dtype=float)
    a1, a2 = _edges(ca)
    b1, b2 = _edges(cb)
    d = segments_distance(
        a1[..., :, None, :], a2[..., :, None, :], b1[..., None, :, :], b2[..., None, :, :]
    )
    d = d.reshape(d.shape[:-2] + (16,)).min(axis=-1)
    return np.where(batch_boxes_overlap(ca, cb), 0.0, d)


def _points_in_boxes(points: np.ndarray, corners: np.ndarray) -> np.ndarray:
    """For (B, 4, 2) boxes and (P, 2) points, whether any point lies in each box (touching counts)."""
    origin = corners[:, 0, :]
    e1 = corners[:, 3, :] - origin  # along -width direction from corner 0 to 3
    e2 = corners[:, 1, :] - origin  # along -length direction from corner 0 to 1
    rel = points[None, :, :] - origin[:, None, :]
    u = np.einsum("bpj,bj->bp", rel, e1) / np.sum(e1 * e1, axis=-1)[:, None]
    v = np.einsum("bpj,bj->bp", rel, e2) / np.sum(e2 * e2, axis=-1)[:, None]
    tol = 1e-12
    inside = (u >= -tol) & (u <= 1 + tol) & (v >= -tol) & (v <= 1 + tol)
    return inside.any(axis=-1)


def batch_box_polyline_distance(corners: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Distance from each of (B, 4, 2) boxes to a set of (S, 2, 2) segments."""
    corners = np.asarray(corners, dtype=float).reshape(-1, 4, 2)
    segments = np.asarray(segments, dtype=float).reshape(-1, 2, 2)
    e1, e2 = _edges(corners)
    d = segments_distance(
        e1[:, :, None, :], e2[:, :, None, :],
        segments[None, None, :, 0, :], segments[None, None, :, 1, :],
    )
    d = d.reshape(len(corners), -1).min(axis=-1)
    verts = np.concatenate([segments[:, 0, :], segments[-1:, 1, :]], axis=0)
    return np.where(_points_in_boxes(verts, corners), 0.0, d)


def box_to_box_distance(a: OrientedBox, b: OrientedBox) -> float:
    """Shortest distance between two oriented boxes, 0 when they overlap or touch."""
    return float(batch_box_distance(a.corners()[None], b.corners()[None])[0])


def box_to_polyline_distance(box: OrientedBox, line: Polyline) -> float:
    """Shortest distance between a box and a polyline, 0 on intersection or containment."""
    return float(batch_box_polyline_distance(box.corners()[None], line.segments)[0])


def point_to_point_distance(a, b) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def boxes_overlap_fast(ca: np.ndarray, cb: np.ndarray) -> bool:
    """Scalar SAT test on two (4, 2) corner arrays; used in the simulator's inner loop."""
    for poly in (ca, cb):
        for i in range(2):
            ex = poly[i + 1][0] - poly[i][0]
            ey = poly[i + 1][1] - poly[i][1]
            ax, ay = -ey, ex
            pa = [p[0] * ax + p[1] * ay for p in ca]
            pb = [p[0] * ax + p[1] * ay for p in cb]
            tol = 1e-12 * (max(max(map(abs, pa)), max(map(abs, pb))) + 1.0)
            if max(pa) < min(pb) - tol or max(pb) < min(pa) - tol:
                return False
    return True
