"""Manifest-to-shard conversion, equal-weight mixing, and statistics.

A manifest is JSON Lines, one trajectory record per line:

    {"trajectory": {"frames": [{"step": 0, "position": [x, y, z],
                                "gripper_open": true}, ...]},
     "camera_id": "front",
     "intrinsics": {"fx":, "fy":, "cx":, "cy":, "width":, "height":},
     "extrinsics": {"rotation": [[...]x3], "translation": [...]},   # or
     "correspondences": [{"world": [...], "pixel": [...]}, ...],    # >= 6
     "instructions": ["...", ...],
     "image_ref": "episodes/000.png",
     "source": "sim"}                                               # optional

Conversion resolves extrinsics (given, or PnP from correspondences),
projects the trajectory, drops records below the visibility floor,
simplifies the path, and emits one prompt/answer sample per instruction.
Per-record failures go to a rejection report; the batch never aborts.
Output order equals manifest order, so reruns are byte-identical.

Mixing draws uniformly over the union of all samples (per-sample weight,
not per-source), with replacement, deterministically for a given seed.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Iterator, Sequence

import numpy as np

from . import geometry, paths, wire

DEFAULT_SHARD_SIZE = 10_000
DEFAULT_MIN_VISIBILITY = 0.9


class Representation(enum.Enum):
    RDP = "rdp"
    FIXED20 = "fixed20"


@dataclass(frozen=True)
class ManifestRecord:
    trajectory: geometry.Trajectory
    camera_id: str
    intrinsics: geometry.CameraIntrinsics
    instructions: tuple[str, ...]
    image_ref: str
    extrinsics: geometry.CameraExtrinsics | None = None
    correspondences: tuple[geometry.Correspondence, ...] = ()
    source: wire.SourceTag = wire.SourceTag.SIM

    def __post_init__(self) -> None:
        if not self.instructions:
            raise ValueError("record needs at least one instruction")
        if self.extrinsics is None and len(self.correspondences) < 6:
            raise ValueError("record needs extrinsics or >= 6 correspondences")


@dataclass(frozen=True)
class Manifest:
    records: tuple[ManifestRecord, ...]


@dataclass(frozen=True)
class Shard:
    samples: tuple[wire.VQASample, ...]
    source: wire.SourceTag
    seq: int

    def __post_init__(self) -> None:
        if len(self.samples) > DEFAULT_SHARD_SIZE:
            raise ValueError("shard exceeds the configured shard size")


@dataclass(frozen=True)
class ConvertConfig:
    epsilon: float = paths.DEFAULT_RDP_EPSILON
    representation: Representation = Representation.RDP
    min_visibility: float = DEFAULT_MIN_VISIBILITY
    shard_size: int = DEFAULT_SHARD_SIZE


@dataclass(frozen=True)
class RecordRejection:
    index: int
    reason: str


@dataclass(frozen=True)
class ConvertResult:
    shards: tuple[Shard, ...]
    rejections: tuple[RecordRejection, ...]

    def sample_count(self) -> int:
        return sum(len(s.samples) for s in self.shards)


class EmptyMix(ValueError):
    """A mix was requested over zero samples."""


class LowVisibility(ValueError):
    """Record dropped: projected visibility below the configured floor."""


@dataclass(frozen=True)
class MixSpec:
    samples_by_source: dict[str, tuple[wire.VQASample, ...]]
    seed: int = 0

    def __post_init__(self) -> None:
        if not any(self.samples_by_source.values()):
            raise EmptyMix("at least one source must be non-empty")


def _record_from_json(obj: dict) -> ManifestRecord:
    frames = [
        geometry.EEFrame(step=f.get("step", i),
                         position=tuple(f["position"]),
                         gripper_open=bool(f.get("gripper_open", True)))
        for i, f in enumerate(obj["trajectory"]["frames"])
    ]
    camera_id = obj.get("camera_id", obj["trajectory"].get("camera_id", ""))
    instructions = tuple(obj["instructions"])
    traj = geometry.Trajectory(
        frames,
        instruction=obj["trajectory"].get(
            "instruction", instructions[0] if instructions else ""),
        camera_id=camera_id)
    k = obj["intrinsics"]
    intr = geometry.CameraIntrinsics(fx=k["fx"], fy=k["fy"], cx=k["cx"], cy=k["cy"],
                                     width=int(k["width"]), height=int(k["height"]))
    extr = None
    if obj.get("extrinsics") is not None:
        e = obj["extrinsics"]
        extr = geometry.CameraExtrinsics(np.array(e["rotation"], dtype=np.float64),
                                         np.array(e["translation"], dtype=np.float64))
    corrs = tuple(
        geometry.Correspondence(tuple(c["world"]), tuple(c["pixel"]))
        for c in obj.get("correspondences", []))
    return ManifestRecord(
        trajectory=traj, camera_id=camera_id, intrinsics=intr,
        instructions=instructions, image_ref=obj["image_ref"], extrinsics=extr,
        correspondences=corrs,
        source=wire.SourceTag(obj.get("source", "sim")))


def load_manifest(path: str | FsPath) -> Manifest:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(_record_from_json(json.loads(line)))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"manifest line {line_no + 1}: {exc}") from exc
    return Manifest(tuple(records))


def _clamped(path: paths.Path2D) -> paths.Path2D:
    return paths.Path2D(
        paths.PathPoint(min(1.0, max(0.0, p.x)), min(1.0, max(0.0, p.y)),
                        p.gripper_open)
        for p in path)


def convert_record(record: ManifestRecord,
                   config: ConvertConfig) -> list[wire.VQASample]:
    """One record to its samples. Raises on any per-record failure."""
    extr = record.extrinsics
    if extr is None:
        extr = geometry.solve_pnp(record.correspondences, record.intrinsics)
    path, visibility = geometry.project_trajectory(record.trajectory,
                                                   record.intrinsics, extr)
    if visibility < config.min_visibility:
        raise LowVisibility(f"visibility {visibility:.3f} < {config.min_visibility}")
    if config.representation is Representation.RDP:
        simplified = paths.rdp_simplify(path, config.epsilon)
    else:
        simplified = paths.resample_fixed(path)
    answer = wire.serialize_answer(_clamped(simplified))
    return [
        wire.VQASample(image_ref=record.image_ref,
                       prompt=wire.render_prompt(instr),
                       answer=answer,
                       source=record.source)
        for instr in record.instructions
    ]


def convert(manifest: Manifest, config: ConvertConfig = ConvertConfig()) -> ConvertResult:
    """Convert a whole manifest; failures become rejections, never aborts."""
    per_source: dict[wire.SourceTag, list[wire.VQASample]] = {}
    rejections: list[RecordRejection] = []
    for i, record in enumerate(manifest.records):
        try:
            samples = convert_record(record, config)
        except LowVisibility:
            rejections.append(RecordRejection(i, "visibility"))
            continue
        except geometry.GeometryError as exc:
            rejections.append(RecordRejection(i, type(exc).__name__))
            continue
        except ValueError as exc:
            rejections.append(RecordRejection(i, f"invalid: {exc}"))
            continue
        per_source.setdefault(record.source, []).extend(samples)
    shards: list[Shard] = []
    for source in sorted(per_source, key=lambda s: s.value):
        bucket = per_source[source]
        for seq, start in enumerate(range(0, len(bucket), config.shard_size)):
            shards.append(Shard(tuple(bucket[start:start + config.shard_size]),
                                source, seq))
    return ConvertResult(tuple(shards), tuple(rejections))


def sample_to_json(sample: wire.VQASample) -> dict:
    return {"image_ref": sample.image_ref, "prompt": sample.prompt,
            "answer": sample.answer, "source": sample.source.value}


def sample_from_json(obj: dict) -> wire.VQASample:
    return wire.VQASample(image_ref=obj["image_ref"], prompt=obj["prompt"],
                          answer=obj["answer"],
                          source=wire.SourceTag(obj["source"]))


def write_shards(result: ConvertResult, out_dir: str | FsPath) -> list[FsPath]:
    """Shards as JSONL files plus a rejections.jsonl, all under out_dir."""
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for shard in result.shards:
        p = out / f"{shard.source.value}-{shard.seq:05d}.jsonl"
        with open(p, "w", encoding="utf-8") as fh:
            for sample in shard.samples:
                fh.write(json.dumps(sample_to_json(sample), sort_keys=True) + "\n")
        written.append(p)
    rej = out / "rejections.jsonl"
    with open(rej, "w", encoding="utf-8") as fh:
        for r in result.rejections:
            fh.write(json.dumps({"index": r.index, "reason": r.reason}) + "\n")
    written.append(rej)
    return written


def read_shards(in_dir: str | FsPath) -> list[Shard]:
    shards = []
    for p in sorted(FsPath(in_dir).glob("*.jsonl")):
        if p.name == "rejections.jsonl":
            continue
        source_tag, _, seq = p.stem.rpartition("-")
        samples = []
        with open(p, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    samples.append(sample_from_json(json.loads(line)))
        shards.append(Shard(tuple(samples), wire.SourceTag(source_tag), int(seq)))
    return shards


def read_rejections(in_dir: str | FsPath) -> list[RecordRejection]:
    p = FsPath(in_dir) / "rejections.jsonl"
    if not p.exists():
        return []
    out = []
    with open(p, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out.append(RecordRejection(obj["index"], obj["reason"]))
    return out


def mix(spec: MixSpec, n: int) -> Iterator[wire.VQASample]:
    """``n`` draws, uniform over the union of all samples, with replacement."""
    pool: list[wire.VQASample] = []
    for source in sorted(spec.samples_by_source):
        pool.extend(spec.samples_by_source[source])
    if not pool:
        raise EmptyMix("no samples to mix")
    rng = np.random.default_rng(spec.seed)
    for idx in rng.integers(0, len(pool), size=n):
        yield pool[int(idx)]


@dataclass(frozen=True)
class FilterReport:
    kept: tuple[int, ...]
    rejected: tuple[RecordRejection, ...]

    def to_json(self) -> dict:
        return {"kept": list(self.kept),
                "rejected": [{"index": r.index, "reason": r.reason}
                             for r in self.rejected]}


def filter_manifest(manifest: Manifest, threshold: float,
                    min_visibility: float = DEFAULT_MIN_VISIBILITY) -> FilterReport:
    """Alignment-quality partition of a manifest.

    Extrinsics are resolved per record (given, or PnP from the record's
    correspondences); records whose pose cannot be resolved are rejected
    with the error name. The survivors go through the reprojection-RMSE /
    visibility gate in input order.
    """
    resolved: list[tuple[int, geometry.Trajectory,
                         tuple[geometry.Correspondence, ...],
                         geometry.CameraExtrinsics, geometry.CameraIntrinsics]] = []
    rejections: list[RecordRejection] = []
    for i, record in enumerate(manifest.records):
        extr = record.extrinsics
        if extr is None:
            try:
                extr = geometry.solve_pnp(record.correspondences, record.intrinsics)
            except geometry.GeometryError as exc:
                rejections.append(RecordRejection(i, type(exc).__name__))
                continue
        resolved.append((i, record.trajectory, record.correspondences, extr,
                         record.intrinsics))
    kept: list[int] = []
    # group by intrinsics so the geometry-level partition applies cleanly
    for intr in {r[4] for r in resolved}:
        group = [r for r in resolved if r[4] == intr]
        result = geometry.filter_by_alignment(
            [(tr, corrs) for _, tr, corrs, _, _ in group], intr,
            [extr for _, _, _, extr, _ in group], threshold, min_visibility)
        kept.extend(group[j][0] for j in result.kept)
        rejections.extend(RecordRejection(group[r.index][0], r.reason)
                          for r in result.rejected)
    kept.sort()
    rejections.sort(key=lambda r: r.index)
    return FilterReport(tuple(kept), tuple(rejections))


@dataclass
class StatsReport:
    samples_per_source: dict[str, int] = field(default_factory=dict)
    mean_points_per_path: float = 0.0
    event_count_histogram: dict[int, int] = field(default_factory=dict)
    rejection_reasons: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "samples_per_source": dict(sorted(self.samples_per_source.items())),
            "mean_points_per_path": self.mean_points_per_path,
            "event_count_histogram": {
                str(k): v for k, v in sorted(self.event_count_histogram.items())},
            "rejection_reasons": dict(sorted(self.rejection_reasons.items())),
        }


def stats(shards: Sequence[Shard],
          rejections: Sequence[RecordRejection] = ()) -> StatsReport:
    """Count-style report over shards.

    Path sizes come from a strict re-parse of each answer; answers that do
    not parse as trajectories (e.g. co-training passthrough) only count
    toward the per-source totals.
    """
    report = StatsReport()
    sizes: list[int] = []
    for shard in shards:
        for sample in shard.samples:
            key = sample.source.value
            report.samples_per_source[key] = report.samples_per_source.get(key, 0) + 1
            try:
                path = wire.parse_answer(sample.answer, wire.ParseMode.STRICT)
            except ValueError:
                continue
            sizes.append(len(path))
            n_events = len(paths.events(path))
            report.event_count_histogram[n_events] = (
                report.event_count_histogram.get(n_events, 0) + 1)
    if sizes:
        report.mean_points_per_path = sum(sizes) / len(sizes)
    for r in rejections:
        report.rejection_reasons[r.reason] = report.rejection_reasons.get(r.reason, 0) + 1
    return report
