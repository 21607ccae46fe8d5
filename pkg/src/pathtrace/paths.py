"""Normalized 2D end-effector paths and their transforms.

A path is an ordered list of points (x, y, gripper_open) with x, y in
normalized image coordinates [0, 1] and a binary gripper state per point.
Gripper *events* (open->closed = close, closed->open = open) are always
derived from consecutive per-point states, never stored.

Transforms provided here:

* ``rdp_simplify`` -- Ramer-Douglas-Peucker simplification with event
  protection: the algorithm runs independently on each sub-polyline between
  event-adjacent points, so the points on either side of a gripper change
  always survive.
* ``resample_fixed`` -- equal arc-length resampling to a fixed point count,
  with event points re-inserted at their exact coordinates.
* ``add_noise`` -- seeded Gaussian jitter on coordinates only (states are
  never perturbed), clamped back into [0, 1].
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_RDP_EPSILON = 0.05
DEFAULT_RESAMPLE_POINTS = 20
DEFAULT_NOISE_SIGMA = 0.01


class GripperAction(enum.Enum):
    OPEN = "open"
    CLOSE = "close"


@dataclass(frozen=True)
class PathPoint:
    """One path sample: normalized coordinates plus gripper state.

    Coordinates are expected in [0, 1]; operations that can produce
    out-of-frame points (trajectory projection) document that explicitly
    and account for it via visibility.
    """

    x: float
    y: float
    gripper_open: bool = True

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite path point ({self.x}, {self.y})")

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Path2D:
    """Ordered, non-empty sequence of PathPoints."""

    points: tuple[PathPoint, ...]

    def __init__(self, points: Iterable[PathPoint | tuple]) -> None:
        pts = tuple(
            p if isinstance(p, PathPoint) else PathPoint(*p) for p in points
        )
        if not pts:
            raise ValueError("Path2D requires at least one point")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def xy_array(self) -> np.ndarray:
        """Coordinates as a float64 array of shape (n, 2)."""
        return np.array([(p.x, p.y) for p in self.points], dtype=np.float64)

    def states(self) -> list[bool]:
        return [p.gripper_open for p in self.points]

    def in_frame(self) -> bool:
        return all(0.0 <= p.x <= 1.0 and 0.0 <= p.y <= 1.0 for p in self.points)


@dataclass(frozen=True)
class GripperEvent:
    """A state transition taking effect at ``index`` (>= 1).

    ``kind`` is CLOSE when points[index-1] is open and points[index] is
    closed, OPEN for the reverse transition.
    """

    index: int
    kind: GripperAction

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError("event index must be >= 1")


def events(path: Path2D) -> list[GripperEvent]:
    """All gripper state changes between consecutive points, in order."""
    out: list[GripperEvent] = []
    pts = path.points
    for i in range(1, len(pts)):
        prev, cur = pts[i - 1], pts[i]
        if prev.gripper_open and not cur.gripper_open:
            out.append(GripperEvent(i, GripperAction.CLOSE))
        elif not prev.gripper_open and cur.gripper_open:
            out.append(GripperEvent(i, GripperAction.OPEN))
    return out


def path_length(path: Path2D) -> float:
    """Total polyline length in normalized coordinates."""
    total = 0.0
    pts = path.points
    for i in range(1, len(pts)):
        total += math.hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y)
    return total


def _segment_distance(p: tuple[float, float], a: tuple[float, float],
                      b: tuple[float, float]) -> float:
    """Perpendicular distance from p to segment a-b (clamped to the ends)."""
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    seg_sq = dx * dx + dy * dy
    if seg_sq == 0.0:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / seg_sq
    t = min(1.0, max(0.0, t))
    cx, cy = ax + t * dx, ay + t * dy
    return math.hypot(p[0] - cx, p[1] - cy)


def _rdp_keep_mask(coords: Sequence[tuple[float, float]], epsilon: float) -> list[bool]:
    """Classic RDP on one polyline; returns a keep mask over indices.

    Iterative (explicit stack) over index ranges. Ties in the maximum
    distance resolve to the first index, scanning left to right with a
    strict comparison.
    """
    n = len(coords)
    keep = [False] * n
    keep[0] = keep[n - 1] = True
    stack = [(0, n - 1)]
    while stack:
        first, last = stack.pop()
        if last - first < 2:
            continue
        a, b = coords[first], coords[last]
        best = -1.0
        best_i = -1
        for i in range(first + 1, last):
            d = _segment_distance(coords[i], a, b)
            if d > best:
                best = d
                best_i = i
        if best > epsilon:
            keep[best_i] = True
            stack.append((first, best_i))
            stack.append((best_i, last))
    return keep


def _protected_indices(path: Path2D) -> list[int]:
    """First, last, and both points adjacent to every gripper event."""
    protected = {0, len(path) - 1}
    for ev in events(path):
        protected.add(ev.index - 1)
        protected.add(ev.index)
    return sorted(protected)


def rdp_simplify(path: Path2D, epsilon: float = DEFAULT_RDP_EPSILON) -> Path2D:
    """Ramer-Douglas-Peucker simplification with gripper-event protection.

    RDP runs independently on each sub-polyline between protected points
    (endpoints plus both points around every event), so protected points
    always survive. The output is a subsequence of the input.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    pts = path.points
    if len(pts) <= 2:
        return Path2D(pts)
    coords = [(p.x, p.y) for p in pts]
    anchors = _protected_indices(path)
    kept: list[int] = []
    for lo, hi in zip(anchors, anchors[1:]):
        if hi - lo < 2:
            kept.extend(range(lo, hi))
            continue
        mask = _rdp_keep_mask(coords[lo:hi + 1], epsilon)
        kept.extend(lo + i for i, k in enumerate(mask[:-1]) if k)
    kept.append(anchors[-1])
    return Path2D(pts[i] for i in kept)


def resample_fixed(path: Path2D, n: int = DEFAULT_RESAMPLE_POINTS) -> Path2D:
    """Resample to ``n`` points at equal arc-length spacing.

    Event points are re-inserted at their exact original coordinates (the
    output may exceed ``n`` by the event count). A sampled point takes the
    gripper state of the original segment it lies on; a sample landing
    exactly on a vertex takes that vertex's state. A zero-length path
    degenerates to the first point repeated ``n`` times.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    pts = path.points
    cum = [0.0]
    for i in range(1, len(pts)):
        cum.append(cum[-1] + math.hypot(pts[i].x - pts[i - 1].x,
                                        pts[i].y - pts[i - 1].y))
    total = cum[-1]
    if total == 0.0:
        return Path2D([pts[0]] * n)

    def point_at(target: float) -> PathPoint:
        # rightmost segment start j with cum[j] <= target
        j = int(np.searchsorted(np.asarray(cum), target, side="right")) - 1
        j = min(max(j, 0), len(pts) - 1)
        if j == len(pts) - 1 or target <= cum[j]:
            return pts[j]
        seg = cum[j + 1] - cum[j]
        if seg == 0.0:
            return pts[j]
        t = (target - cum[j]) / seg
        if t >= 1.0:
            return pts[j + 1]
        return PathPoint(pts[j].x + t * (pts[j + 1].x - pts[j].x),
                         pts[j].y + t * (pts[j + 1].y - pts[j].y),
                         pts[j].gripper_open)

    # (arc position, tiebreak, point); events sort after samples at equal arc
    entries: list[tuple[float, int, int, PathPoint]] = []
    for k in range(n):
        target = total * k / (n - 1)
        entries.append((target, 0, k, point_at(target)))
    for ev in events(path):
        entries.append((cum[ev.index], 1, ev.index, pts[ev.index]))
    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    return Path2D(e[3] for e in entries)


def add_noise(path: Path2D, sigma: float = DEFAULT_NOISE_SIGMA,
              seed: int = 0) -> Path2D:
    """Add independent N(0, sigma) jitter to each coordinate, clamped to [0, 1].

    Gripper states are copied unchanged. Deterministic for a given seed:
    noise is drawn as one (n, 2) block in point order.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return Path2D(path.points)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=(len(path), 2))
    out = []
    for p, (dx, dy) in zip(path.points, noise):
        out.append(PathPoint(min(1.0, max(0.0, p.x + dx)),
                             min(1.0, max(0.0, p.y + dy)),
                             p.gripper_open))
    return Path2D(out)
