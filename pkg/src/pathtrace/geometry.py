"""Pinhole camera model, trajectory projection, and PnP pose recovery.

Conventions (standard computer vision):

* World frame: right-handed, meters.
* Camera frame: x right, y down, z forward along the optical axis.
* Extrinsics map world to camera: q = R @ p + t.
* Pixels: u right, v down, origin at the top-left; a point projects to
  (fx * qx / qz + cx, fy * qy / qz + cy).

The camera is an ideal pinhole -- no lens distortion. Pose recovery is a
linear DLT on intrinsics-normalized correspondences followed by
Gauss-Newton refinement of the reprojection residuals, with the rotation
re-orthonormalized after the linear stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .paths import Path2D, PathPoint

MIN_DEPTH = 1e-9
DEGENERACY_TOL = 1e-8
GN_STEP_TOL = 1e-10
GN_MAX_ITERS = 100
DEFAULT_MIN_VISIBILITY = 0.9


class GeometryError(Exception):
    """Base class for projection/pose errors."""


class BehindCamera(GeometryError):
    """Point has non-positive depth in the camera frame."""


class AllBehindCamera(GeometryError):
    """No frame of a trajectory projects with positive depth."""


class TooFewPoints(GeometryError):
    """PnP needs at least 6 correspondences."""


class DegenerateConfiguration(GeometryError):
    """World points are collinear or coplanar within tolerance."""


class NoConvergence(GeometryError):
    """Pose refinement failed numerically."""


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class CameraExtrinsics:
    """World-to-camera rigid transform. Rotation must be a proper rotation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err >= 1e-9:
            raise ValueError(f"rotation not orthonormal (|R^T R - I|_inf = {err:.3e})")
        if np.linalg.det(r) < 0:
            raise ValueError("rotation has determinant -1 (reflection)")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "CameraExtrinsics":
        return cls(np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class EEFrame:
    """One end-effector sample: step index, world position, gripper state."""

    step: int
    position: tuple[float, float, float]
    gripper_open: bool = True

    def __post_init__(self) -> None:
        if self.step < 0:
            raise ValueError("step must be non-negative")
        pos = tuple(float(v) for v in self.position)
        if not all(math.isfinite(v) for v in pos):
            raise ValueError("position must be finite")
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class Trajectory:
    frames: tuple[EEFrame, ...]
    instruction: str = ""
    camera_id: str = ""

    def __init__(self, frames, instruction: str = "", camera_id: str = "") -> None:
        frames = tuple(frames)
        if not frames:
            raise ValueError("trajectory must contain at least one frame")
        steps = [f.step for f in frames]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError("frame steps must be strictly increasing")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "instruction", instruction)
        object.__setattr__(self, "camera_id", camera_id)

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class Correspondence:
    """A world point and the pixel it should project to.

    Pixels are expected inside [0, width) x [0, height) of the intrinsics
    they will be used with; this is an input-data contract on the caller,
    not re-checked here.
    """

    world: tuple[float, float, float]
    pixel: tuple[float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "world", tuple(float(v) for v in self.world))
        object.__setattr__(self, "pixel", tuple(float(v) for v in self.pixel))


def project_point(p: Sequence[float], intr: CameraIntrinsics,
                  extr: CameraExtrinsics) -> tuple[float, float]:
    """Project one world point to pixel coordinates.

    Raises BehindCamera when the camera-frame depth is <= 1e-9.
    """
    q = extr.rotation @ np.asarray(p, dtype=np.float64) + extr.translation
    if q[2] <= MIN_DEPTH:
        raise BehindCamera(f"depth {q[2]:.3e} <= {MIN_DEPTH}")
    return (float(intr.fx * q[0] / q[2] + intr.cx),
            float(intr.fy * q[1] / q[2] + intr.cy))


def project_trajectory(traj: Trajectory, intr: CameraIntrinsics,
                       extr: CameraExtrinsics) -> tuple[Path2D, float]:
    """Project every frame and normalize by image size.

    Returns (path, visibility). Points landing outside [0, 1]^2 are kept in
    the path but count against visibility; frames behind the camera are
    dropped from the path and also count against visibility. Visibility is
    in-frame points over total frames.
    """
    pts: list[PathPoint] = []
    in_frame = 0
    for frame in traj.frames:
        try:
            u, v = project_point(frame.position, intr, extr)
        except BehindCamera:
            continue
        x, y = u / intr.width, v / intr.height
        if 0.0 <= x <= 1.0 and 0.0 <= y <= 1.0:
            in_frame += 1
        pts.append(PathPoint(x, y, frame.gripper_open))
    if not pts:
        raise AllBehindCamera("no frame projects with positive depth")
    return Path2D(pts), in_frame / len(traj.frames)


def _check_degeneracy(world: np.ndarray) -> None:
    centered = world - world.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[0] <= 0:
        raise DegenerateConfiguration("all world points coincide")
    if s[1] / s[0] < DEGENERACY_TOL:
        raise DegenerateConfiguration("world points are collinear")
    if s[2] / s[0] < DEGENERACY_TOL:
        raise DegenerateConfiguration("world points are coplanar")


def _rodrigues(w: np.ndarray) -> np.ndarray:
    """Rotation matrix for an axis-angle vector."""
    theta = np.linalg.norm(w)
    if theta < 1e-12:
        k = _skew(w)
        return np.eye(3) + k  # first-order expansion near identity
    k = _skew(w / theta)
    return np.eye(3) + math.sin(theta) * k + (1 - math.cos(theta)) * (k @ k)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


def _dlt_pose(world: np.ndarray, pix_norm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear pose estimate from intrinsics-normalized pixels.

    Builds the standard 2n x 12 system for P = [R|t] acting on homogeneous
    world points, solves by SVD, fixes the sign so depths are positive, and
    projects the rotation block to the nearest proper rotation.
    """
    n = world.shape[0]
    a = np.zeros((2 * n, 12))
    for i in range(n):
        xw = np.append(world[i], 1.0)
        u, v = pix_norm[i]
        a[2 * i, 0:4] = xw
        a[2 * i, 8:12] = -u * xw
        a[2 * i + 1, 4:8] = xw
        a[2 * i + 1, 8:12] = -v * xw
    _, _, vt = np.linalg.svd(a)
    p = vt[-1].reshape(3, 4)
    if np.linalg.det(p[:, :3]) < 0:
        p = -p
    r_raw = p[:, :3]
    u_r, s_r, vt_r = np.linalg.svd(r_raw)
    rot = u_r @ vt_r
    if np.linalg.det(rot) < 0:
        rot = u_r @ np.diag([1.0, 1.0, -1.0]) @ vt_r
    scale = s_r.mean()
    if scale <= 0 or not np.isfinite(scale):
        raise NoConvergence("degenerate linear solution")
    t = p[:, 3] / scale
    return rot, t


def _refine_pose(world: np.ndarray, pix: np.ndarray, intr: CameraIntrinsics,
                 rot: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Newton on pixel reprojection residuals.

    Left-multiplicative axis-angle update for the rotation, additive for
    the translation; stops when the step norm drops below 1e-10 or after
    100 iterations.
    """
    for _ in range(GN_MAX_ITERS):
        cam = world @ rot.T + t
        z = cam[:, 2]
        if np.any(z <= MIN_DEPTH):
            raise NoConvergence("refinement drove points behind the camera")
        proj = np.column_stack([intr.fx * cam[:, 0] / z + intr.cx,
                                intr.fy * cam[:, 1] / z + intr.cy])
        res = (proj - pix).ravel()
        jac = np.zeros((2 * world.shape[0], 6))
        for i, q in enumerate(cam):
            x, y, zz = q
            # d(pixel)/d(camera point)
            dproj = np.array([[intr.fx / zz, 0.0, -intr.fx * x / zz**2],
                              [0.0, intr.fy / zz, -intr.fy * y / zz**2]])
            # rotation update acts on R @ p only, i.e. on q - t
            jac[2 * i:2 * i + 2, 0:3] = dproj @ (-_skew(q - t))
            jac[2 * i:2 * i + 2, 3:6] = dproj
        h = jac.T @ jac
        g = jac.T @ res
        try:
            step = np.linalg.solve(h, -g)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("singular normal equations") from exc
        if not np.all(np.isfinite(step)):
            raise NoConvergence("non-finite refinement step")
        rot = _rodrigues(step[:3]) @ rot
        # re-orthonormalize to keep drift out of long refinements
        u_r, _, vt_r = np.linalg.svd(rot)
        rot = u_r @ vt_r
        t = t + step[3:]
        if np.linalg.norm(step) < GN_STEP_TOL:
            break
    return rot, t


def solve_pnp(corrs: Sequence[Correspondence],
              intr: CameraIntrinsics) -> CameraExtrinsics:
    """Recover world-to-camera extrinsics from 3D-2D correspondences.

    Requires >= 6 correspondences whose world points are neither collinear
    nor coplanar (within 1e-8 relative tolerance).
    """
    if len(corrs) < 6:
        raise TooFewPoints(f"need >= 6 correspondences, got {len(corrs)}")
    world = np.array([c.world for c in corrs], dtype=np.float64)
    pix = np.array([c.pixel for c in corrs], dtype=np.float64)
    _check_degeneracy(world)
    pix_norm = np.column_stack([(pix[:, 0] - intr.cx) / intr.fx,
                                (pix[:, 1] - intr.cy) / intr.fy])
    rot, t = _dlt_pose(world, pix_norm)
    rot, t = _refine_pose(world, pix, intr, rot, t)
    return CameraExtrinsics(rot, t)


def reprojection_rmse(corrs: Sequence[Correspondence], intr: CameraIntrinsics,
                      extr: CameraExtrinsics) -> float:
    """Root-mean-square pixel distance between projections and labels."""
    if not corrs:
        raise ValueError("no correspondences")
    total = 0.0
    for c in corrs:
        u, v = project_point(c.world, intr, extr)
        total += (u - c.pixel[0]) ** 2 + (v - c.pixel[1]) ** 2
    return math.sqrt(total / len(corrs))


@dataclass(frozen=True)
class Rejection:
    index: int
    reason: str


@dataclass(frozen=True)
class AlignmentFilterResult:
    kept: tuple[int, ...]
    rejected: tuple[Rejection, ...] = field(default_factory=tuple)


def filter_by_alignment(trajs: Sequence[tuple[Trajectory, Sequence[Correspondence]]],
                        intr: CameraIntrinsics,
                        extr_per_traj: Sequence[CameraExtrinsics],
                        threshold: float,
                        min_visibility: float = DEFAULT_MIN_VISIBILITY,
                        ) -> AlignmentFilterResult:
    """Partition trajectories by reprojection quality.

    A trajectory is kept iff its correspondence RMSE is <= threshold and
    its projected visibility is >= min_visibility. Inner failures reject
    the trajectory with the error name as reason; input order is preserved
    on both sides (kept/rejected hold manifest indices).
    """
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    kept: list[int] = []
    rejected: list[Rejection] = []
    for i, (traj, corrs) in enumerate(trajs):
        try:
            rmse = reprojection_rmse(corrs, intr, extr_per_traj[i])
        except GeometryError as exc:
            rejected.append(Rejection(i, type(exc).__name__))
            continue
        except ValueError:
            rejected.append(Rejection(i, "no_correspondences"))
            continue
        if rmse > threshold:
            rejected.append(Rejection(i, "rmse"))
            continue
        try:
            _, visibility = project_trajectory(traj, intr, extr_per_traj[i])
        except GeometryError as exc:
            rejected.append(Rejection(i, type(exc).__name__))
            continue
        if visibility < min_visibility:
            rejected.append(Rejection(i, "visibility"))
            continue
        kept.append(i)
    return AlignmentFilterResult(tuple(kept), tuple(rejected))
