"""Deterministic path rasterization onto images.

Everything here is integer arithmetic on uint8 buffers: no anti-aliasing,
rounding fixed to half-up, so identical inputs produce byte-identical
images on every platform. Two modes:

* overlay -- draw the path onto a copy of the RGB image: consecutive
  points joined by thick segments (supercover line traversal dilated to
  the line width), colored along a start->end gradient, then filled
  circles at gripper-change points (close/open colors), drawn after all
  segments.
* concat -- keep the RGB image untouched in channels 0-2 and put the
  overlay, drawn on black, in channels 3-5.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path as FsPath

import numpy as np
from PIL import Image as PILImage

from .paths import GripperAction, Path2D, events

RGB = tuple[int, int, int]


class RenderMode(enum.Enum):
    OVERLAY = "overlay"
    CONCAT_CHANNELS = "concat"


class ChannelMismatch(ValueError):
    """Image does not have the channel count the operation requires."""


@dataclass(frozen=True)
class Image:
    """Row-major 8-bit image; pixels live in an (h, w, c) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.dtype != np.uint8:
            raise ValueError("pixels must be an (h, w, c) uint8 array")
        if px.shape[2] not in (3, 6):
            raise ValueError("channels must be 3 or 6")
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def data(self) -> bytes:
        return self.pixels.tobytes()

    @classmethod
    def blank(cls, width: int, height: int, channels: int = 3,
              fill: int = 0) -> "Image":
        return cls(np.full((height, width, channels), fill, dtype=np.uint8))


@dataclass(frozen=True)
class OverlayStyle:
    line_width: int = 3
    gradient_start: RGB = (0, 0, 255)
    gradient_end: RGB = (255, 0, 0)
    close_color: RGB = (0, 255, 0)
    open_color: RGB = (0, 0, 255)
    circle_radius: int = 6
    mode: RenderMode = RenderMode.OVERLAY

    def __post_init__(self) -> None:
        if self.line_width < 1:
            raise ValueError("line_width must be >= 1")
        if self.circle_radius < 1:
            raise ValueError("circle_radius must be >= 1")


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def denormalize(path: Path2D, width: int, height: int) -> list[tuple[int, int]]:
    """Path points to integer pixel centers, clamped into the image."""
    out = []
    for p in path.points:
        u = min(width - 1, max(0, _round_half_up(p.x * width)))
        v = min(height - 1, max(0, _round_half_up(p.y * height)))
        out.append((u, v))
    return out


def _supercover(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Every grid cell the ideal segment passes through (corner crossings
    include both side cells). Integer-only error accumulation."""
    cells = [(x0, y0)]
    dx, dy = x1 - x0, y1 - y0
    xstep = 1 if dx > 0 else -1
    ystep = 1 if dy > 0 else -1
    dx, dy = abs(dx), abs(dy)
    ddx, ddy = 2 * dx, 2 * dy
    x, y = x0, y0
    if ddx >= ddy:
        errorprev = error = dx
        for _ in range(dx):
            x += xstep
            error += ddy
            if error > ddx:
                y += ystep
                error -= ddx
                if error + errorprev < ddx:
                    cells.append((x, y - ystep))
                elif error + errorprev > ddx:
                    cells.append((x - xstep, y))
                else:
                    cells.append((x, y - ystep))
                    cells.append((x - xstep, y))
            cells.append((x, y))
            errorprev = error
    else:
        errorprev = error = dy
        for _ in range(dy):
            y += ystep
            error += ddx
            if error > ddy:
                x += xstep
                error -= ddy
                if error + errorprev < ddy:
                    cells.append((x - xstep, y))
                elif error + errorprev > ddy:
                    cells.append((x, y - ystep))
                else:
                    cells.append((x - xstep, y))
                    cells.append((x, y - ystep))
            cells.append((x, y))
            errorprev = error
    return cells


def _gradient_color(style: OverlayStyle, k: int, segment_count: int) -> RGB:
    """Segment k of segment_count, interpolated at k / segment_count."""
    if segment_count <= 1 and k == 0:
        return style.gradient_start
    frac = k / segment_count
    return tuple(
        _round_half_up(s + (e - s) * frac)
        for s, e in zip(style.gradient_start, style.gradient_end)
    )  # type: ignore[return-value]


@dataclass(frozen=True)
class SegmentOp:
    start: tuple[int, int]
    end: tuple[int, int]
    color: RGB


@dataclass(frozen=True)
class CircleOp:
    center: tuple[int, int]
    radius: int
    color: RGB


def overlay_ops(path: Path2D, style: OverlayStyle, width: int,
                height: int) -> tuple[list[SegmentOp], list[CircleOp]]:
    """The exact draw list an overlay render executes, in order."""
    px = denormalize(path, width, height)
    segments = []
    n_seg = len(px) - 1
    for k in range(n_seg):
        segments.append(SegmentOp(px[k], px[k + 1],
                                  _gradient_color(style, k, max(n_seg, 1))))
    circles = []
    for ev in events(path):
        color = style.close_color if ev.kind is GripperAction.CLOSE else style.open_color
        circles.append(CircleOp(px[ev.index], style.circle_radius, color))
    if len(px) == 1:
        # lone point still leaves a mark
        segments.append(SegmentOp(px[0], px[0], style.gradient_start))
    return segments, circles


def _stamp(buf: np.ndarray, x: int, y: int, half_lo: int, half_hi: int,
           color: RGB) -> None:
    h, w, _ = buf.shape
    buf[max(0, y - half_lo):min(h, y + half_hi + 1),
        max(0, x - half_lo):min(w, x + half_hi + 1)] = color


def draw_overlay(img: Image, path: Path2D, style: OverlayStyle = OverlayStyle()) -> Image:
    """Render the path over a copy of a 3-channel image."""
    if img.channels != 3:
        raise ChannelMismatch(f"overlay needs a 3-channel image, got {img.channels}")
    if style.mode is not RenderMode.OVERLAY:
        raise ValueError("style.mode must be OVERLAY")
    buf = img.pixels.copy()
    segments, circles = overlay_ops(path, style, img.width, img.height)
    half_lo = (style.line_width - 1) // 2
    half_hi = style.line_width // 2
    for seg in segments:
        for cx, cy in _supercover(*seg.start, *seg.end):
            _stamp(buf, cx, cy, half_lo, half_hi, seg.color)
    h, w, _ = buf.shape
    for circ in circles:
        r = circ.radius
        x0, y0 = circ.center
        for dy in range(-r, r + 1):
            yy = y0 + dy
            if yy < 0 or yy >= h:
                continue
            for dx in range(-r, r + 1):
                xx = x0 + dx
                if xx < 0 or xx >= w:
                    continue
                if dx * dx + dy * dy <= r * r:
                    buf[yy, xx] = circ.color
    return Image(buf)


def draw_concat(img: Image, path: Path2D, style: OverlayStyle) -> Image:
    """Original RGB in channels 0-2, path drawn on black in channels 3-5."""
    if img.channels != 3:
        raise ChannelMismatch(f"concat needs a 3-channel base, got {img.channels}")
    if style.mode is not RenderMode.CONCAT_CHANNELS:
        raise ValueError("style.mode must be CONCAT_CHANNELS")
    plane = draw_overlay(Image.blank(img.width, img.height), path,
                         replace(style, mode=RenderMode.OVERLAY))
    return Image(np.concatenate([img.pixels, plane.pixels], axis=2))


def load_png(path: str | FsPath) -> Image:
    with PILImage.open(path) as im:
        return Image(np.asarray(im.convert("RGB"), dtype=np.uint8))


def save_png(img: Image, path: str | FsPath) -> None:
    if img.channels != 3:
        raise ChannelMismatch("PNG output is 3-channel; use save_planar or save_png_pair")
    PILImage.fromarray(img.pixels, mode="RGB").save(path, format="PNG")


def save_png_pair(img: Image, base_path: str | FsPath,
                  overlay_path: str | FsPath) -> None:
    """Six-channel image as two PNGs: base RGB and the path plane."""
    if img.channels != 6:
        raise ChannelMismatch("PNG pair output needs a 6-channel image")
    save_png(Image(img.pixels[:, :, :3].copy()), base_path)
    save_png(Image(img.pixels[:, :, 3:].copy()), overlay_path)


def save_planar(img: Image, path: str | FsPath) -> None:
    """Raw planar dump: channels-first uint8 bytes plus a JSON dims sidecar."""
    p = FsPath(path)
    p.write_bytes(np.ascontiguousarray(img.pixels.transpose(2, 0, 1)).tobytes())
    sidecar = {"width": img.width, "height": img.height, "channels": img.channels,
               "layout": "channels_first", "dtype": "uint8"}
    p.with_suffix(p.suffix + ".json").write_text(json.dumps(sidecar))


def load_planar(path: str | FsPath) -> Image:
    p = FsPath(path)
    meta = json.loads(p.with_suffix(p.suffix + ".json").read_text())
    raw = np.frombuffer(p.read_bytes(), dtype=np.uint8)
    arr = raw.reshape(meta["channels"], meta["height"], meta["width"])
    return Image(np.ascontiguousarray(arr.transpose(1, 2, 0)))
