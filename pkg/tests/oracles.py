"""Independent reference implementations used only to check the package.

These stay deliberately naive (pure-Python recursion, spreadsheet-style
accumulation) and share no code with the implementations they verify.
"""

from __future__ import annotations

import math


def _point_segment_distance(p, a, b):
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    seg_sq = dx * dx + dy * dy
    if seg_sq == 0.0:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / seg_sq
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


def _rdp_indices(coords, lo, hi, epsilon):
    """Kept indices on coords[lo..hi], inclusive, textbook recursion."""
    if hi - lo < 2:
        return [lo, hi] if hi != lo else [lo]
    best = -1.0
    best_i = -1
    for i in range(lo + 1, hi):
        d = _point_segment_distance(coords[i], coords[lo], coords[hi])
        if d > best:
            best = d
            best_i = i
    if best <= epsilon:
        return [lo, hi]
    left = _rdp_indices(coords, lo, best_i, epsilon)
    right = _rdp_indices(coords, best_i, hi, epsilon)
    return left[:-1] + right


def reference_rdp(points, epsilon):
    """Event-protected RDP over (x, y, gripper_open) triples.

    Splits at both points around every state change, simplifies each piece
    recursively, and concatenates. Returns the kept triples.
    """
    protected = {0, len(points) - 1}
    for i in range(1, len(points)):
        if points[i][2] != points[i - 1][2]:
            protected.add(i - 1)
            protected.add(i)
    anchors = sorted(protected)
    coords = [(p[0], p[1]) for p in points]
    kept_idx = []
    for lo, hi in zip(anchors, anchors[1:]):
        kept_idx.extend(_rdp_indices(coords, lo, hi, epsilon)[:-1])
    kept_idx.append(anchors[-1])
    return [points[i] for i in kept_idx]


def mean_ranks(records):
    """Spreadsheet-style mean rank per method over [(item, rater, {m: r})]."""
    totals: dict[str, list[float]] = {}
    for _item, _rater, ranks in records:
        for method, rank in ranks.items():
            totals.setdefault(method, []).append(rank)
    return {m: sum(v) / len(v) for m, v in totals.items()}
