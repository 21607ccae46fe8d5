from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pathtrace import geometry
from pathtrace.paths import Path2D, PathPoint


@pytest.fixture
def unit_camera() -> geometry.CameraIntrinsics:
    return geometry.CameraIntrinsics(fx=100, fy=100, cx=50, cy=50,
                                     width=100, height=100)


@pytest.fixture
def vga_camera() -> geometry.CameraIntrinsics:
    return geometry.CameraIntrinsics(fx=320, fy=330, cx=320, cy=240,
                                     width=640, height=480)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    theta = rng.uniform(0.1, 2.5)
    k = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(theta) * k + (1 - math.cos(theta)) * (k @ k)


def synthetic_scene(intr: geometry.CameraIntrinsics, rng: np.random.Generator,
                    n_points: int = 8):
    """A random pose plus world points that project inside the frame.

    Points are sampled in the camera frustum with margins and mapped back
    to world coordinates, so the returned correspondences are exact.
    """
    rot = random_rotation(rng)
    t = rng.normal(size=3) * 0.3
    # normalized image coordinates with border margin, scaled by depth
    x_span = 0.8 * intr.cx / intr.fx
    y_span = 0.8 * intr.cy / intr.fy
    xn = rng.uniform(-x_span, x_span, n_points)
    yn = rng.uniform(-y_span, y_span, n_points)
    z = rng.uniform(0.8, 2.5, n_points)
    cam_pts = np.column_stack([xn * z, yn * z, z])
    world = (cam_pts - t) @ rot  # inverse of q = R p + t
    extr = geometry.CameraExtrinsics(rot, t)
    corrs = [
        geometry.Correspondence(tuple(w), geometry.project_point(w, intr, extr))
        for w in world
    ]
    return extr, world, corrs


def smooth_pick_place_path(rng: np.random.Generator,
                           n_min: int = 60, n_max: int = 150) -> Path2D:
    """Two smooth quadratic arcs: approach (open) then carry (closed),
    with a release at the final point. 60-150 raw points."""

    def bezier(p0, p1, p2, n):
        ts = np.linspace(0.0, 1.0, n)
        return [((1 - t) ** 2 * p0[0] + 2 * (1 - t) * t * p1[0] + t ** 2 * p2[0],
                 (1 - t) ** 2 * p0[1] + 2 * (1 - t) * t * p1[1] + t ** 2 * p2[1])
                for t in ts]

    def control(a, b):
        # bow the control point out so the arc's sagitta (half the bow)
        # straddles the 0.05 simplification tolerance
        mid = ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2)
        normal = (-(b[1] - a[1]), b[0] - a[0])
        norm = math.hypot(*normal) or 1.0
        bow = rng.uniform(0.12, 0.3) * rng.choice([-1, 1])
        return (min(0.98, max(0.02, mid[0] + normal[0] / norm * bow)),
                min(0.98, max(0.02, mid[1] + normal[1] / norm * bow)))

    start = rng.uniform(0.1, 0.9, 2)
    grasp = rng.uniform(0.1, 0.9, 2)
    place = rng.uniform(0.1, 0.9, 2)
    total = int(rng.integers(n_min, n_max + 1))
    n1 = total // 2
    n2 = total - n1
    leg1 = bezier(start, control(start, grasp), grasp, n1)
    leg2 = bezier(grasp, control(grasp, place), place, n2)
    pts = [PathPoint(x, y, True) for x, y in leg1]
    pts += [PathPoint(x, y, False) for x, y in leg2[:-1]]
    pts.append(PathPoint(leg2[-1][0], leg2[-1][1], True))  # release
    return Path2D(pts)


def topdown_extrinsics() -> geometry.CameraExtrinsics:
    """Camera 1 m above the origin looking straight down (world z up)."""
    return geometry.CameraExtrinsics(
        np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]),
        np.array([0.0, 0.0, 1.0]))


def manifest_record_json(rng: np.random.Generator, intr_json: dict,
                         n_frames: int = 40, source: str = "sim",
                         image_ref: str = "ep.png",
                         instructions: tuple[str, ...] = ("do the task",),
                         behind_camera: bool = False) -> dict:
    """One synthetic top-down tabletop record as manifest JSON."""
    start, mid, end = (rng.uniform(-0.3, 0.3, 2) for _ in range(3))
    # the camera sits at world z = 1 looking down: z above it is behind
    z = 3.0 if behind_camera else 0.05
    frames = []
    for i in range(n_frames):
        s = i / (n_frames - 1)
        if s < 0.5:
            u = 2 * s
            x = start[0] + (mid[0] - start[0]) * u
            y = start[1] + (mid[1] - start[1]) * u
            open_g = True
        else:
            u = 2 * (s - 0.5)
            x = mid[0] + (end[0] - mid[0]) * u
            y = mid[1] + (end[1] - mid[1]) * u
            open_g = i < n_frames - 1
        frames.append({"step": i, "position": [float(x), float(y), z],
                       "gripper_open": bool(open_g)})
    return {
        "trajectory": {"frames": frames},
        "camera_id": "front",
        "intrinsics": intr_json,
        "extrinsics": {"rotation": [[1, 0, 0], [0, -1, 0], [0, 0, -1]],
                       "translation": [0.0, 0.0, 1.0]},
        "instructions": list(instructions),
        "image_ref": image_ref,
        "source": source,
    }


TOPDOWN_INTR_JSON = {"fx": 300.0, "fy": 300.0, "cx": 160.0, "cy": 120.0,
                     "width": 320, "height": 240}


def write_manifest(path: Path, records: list[dict]) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    return path
