import numpy as np
import pytest

from pathtrace import pipeline, wire
from pathtrace.pipeline import (
    ConvertConfig, EmptyMix, Manifest, MixSpec, Representation, Shard,
    convert, filter_manifest, load_manifest, mix, read_shards, stats,
    write_shards,
)

from conftest import TOPDOWN_INTR_JSON, manifest_record_json, write_manifest


def build_manifest(tmp_path, n_records=5, seed=0, with_behind=()):
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_records):
        records.append(manifest_record_json(
            rng, TOPDOWN_INTR_JSON, image_ref=f"ep{i}.png",
            instructions=(f"pick up object {i}", f"grab the thing {i}",
                          f"move item {i}", f"lift object {i}"),
            behind_camera=i in with_behind))
    return load_manifest(write_manifest(tmp_path / "manifest.jsonl", records))


class TestConvert:
    def test_four_instructions_share_one_answer(self, tmp_path):
        manifest = build_manifest(tmp_path, n_records=1)
        result = convert(manifest)
        samples = [s for shard in result.shards for s in shard.samples]
        assert len(samples) == 4
        assert len({s.answer for s in samples}) == 1
        assert len({s.prompt for s in samples}) == 4

    def test_behind_camera_record_rejected(self, tmp_path):
        manifest = build_manifest(tmp_path, n_records=2, with_behind={1})
        result = convert(manifest)
        assert result.sample_count() == 4
        assert len(result.rejections) == 1
        assert result.rejections[0].index == 1
        assert result.rejections[0].reason == "AllBehindCamera"

    def test_rerun_is_byte_identical(self, tmp_path):
        manifest = build_manifest(tmp_path, n_records=10, seed=3)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        write_shards(convert(manifest), out_a)
        write_shards(convert(manifest), out_b)
        files_a = sorted(p.name for p in out_a.glob("*.jsonl"))
        files_b = sorted(p.name for p in out_b.glob("*.jsonl"))
        assert files_a == files_b
        for name in files_a:
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_fixed20_representation(self, tmp_path):
        manifest = build_manifest(tmp_path, n_records=1)
        result = convert(manifest, ConvertConfig(representation=Representation.FIXED20))
        answer = result.shards[0].samples[0].answer
        path = wire.parse_answer(answer)
        # 20 uniform samples plus one reinserted close event
        assert len(path) == 21

    def test_answers_reparse_close_to_projection(self, tmp_path):
        manifest = build_manifest(tmp_path, n_records=5, seed=9)
        result = convert(manifest)
        from pathtrace import geometry, paths
        for record, shard_samples in zip(
                manifest.records,
                [s.samples[i * 4:(i + 1) * 4] for i, s in
                 [(i, result.shards[0]) for i in range(5)]]):
            projected, _ = geometry.project_trajectory(
                record.trajectory, record.intrinsics, record.extrinsics)
            simplified = paths.rdp_simplify(projected, 0.05)
            parsed = wire.parse_answer(shard_samples[0].answer)
            assert len(parsed) == len(simplified)
            for got, want in zip(parsed, simplified):
                assert abs(got.x - want.x) <= 0.005
                assert abs(got.y - want.y) <= 0.005
                assert got.gripper_open == want.gripper_open

    def test_shard_partitioning(self, tmp_path):
        manifest = build_manifest(tmp_path, n_records=6)
        result = convert(manifest, ConvertConfig(shard_size=10))
        assert [len(s.samples) for s in result.shards] == [10, 10, 4]
        assert [s.seq for s in result.shards] == [0, 1, 2]


class TestShardIO:
    def test_write_read_round_trip(self, tmp_path):
        manifest = build_manifest(tmp_path, n_records=3)
        result = convert(manifest)
        write_shards(result, tmp_path / "out")
        shards = read_shards(tmp_path / "out")
        assert [s.samples for s in shards] == [s.samples for s in result.shards]

    def test_oversized_shard_rejected(self):
        sample = wire.VQASample("i.png", "p", "a", wire.SourceTag.SIM)
        with pytest.raises(ValueError):
            Shard(tuple([sample] * (pipeline.DEFAULT_SHARD_SIZE + 1)),
                  wire.SourceTag.SIM, 0)


class TestMix:
    def _samples(self, tag, n):
        return tuple(wire.VQASample(f"{tag}{i}.png", "p", f"answer-{tag}-{i}",
                                    wire.SourceTag.SIM) for i in range(n))

    def test_single_source_all_draws_from_it(self):
        spec = MixSpec({"sim": self._samples("sim", 5)}, seed=1)
        drawn = list(mix(spec, 50))
        assert all(s.answer.startswith("answer-sim") for s in drawn)

    def test_same_seed_identical_streams(self):
        spec = MixSpec({"a": self._samples("a", 9), "b": self._samples("b", 1)},
                       seed=7)
        assert list(mix(spec, 100)) == list(mix(spec, 100))

    def test_per_sample_uniform_weighting(self):
        spec = MixSpec({"big": self._samples("big", 90),
                        "small": self._samples("small", 10)}, seed=3)
        drawn = list(mix(spec, 20_000))
        freq_big = sum(s.answer.startswith("answer-big") for s in drawn) / len(drawn)
        assert abs(freq_big - 0.9) < 0.02

    def test_empty_mix_raises(self):
        with pytest.raises(EmptyMix):
            MixSpec({"sim": ()}, seed=0)


class TestStats:
    def test_empty_input_all_zero(self):
        report = stats([])
        assert report.samples_per_source == {}
        assert report.mean_points_per_path == 0.0
        assert report.event_count_histogram == {}

    def test_known_path_sizes(self):
        answer = wire.serialize_answer(wire.Path2D(
            [wire.PathPoint(0.1 * i, 0.1, True) for i in range(1, 6)]))
        shard = Shard(tuple(wire.VQASample("x.png", "p", answer,
                                           wire.SourceTag.REAL)
                            for _ in range(4)), wire.SourceTag.REAL, 0)
        report = stats([shard])
        assert report.mean_points_per_path == 5.0
        assert report.samples_per_source == {"real": 4}
        assert report.event_count_histogram == {0: 4}

    def test_cotrain_answers_pass_through(self):
        shard = Shard((wire.VQASample("x.png", "what is this?", "a cat",
                                      wire.SourceTag.COTRAIN),),
                      wire.SourceTag.COTRAIN, 0)
        report = stats([shard])
        assert report.samples_per_source == {"cotrain": 1}
        assert report.mean_points_per_path == 0.0


class TestFilterManifest:
    def test_exact_records_kept(self, tmp_path):
        rng = np.random.default_rng(0)
        from conftest import synthetic_scene
        from pathtrace import geometry
        intr = geometry.CameraIntrinsics(fx=320, fy=330, cx=320, cy=240,
                                         width=640, height=480)
        records = []
        for i in range(4):
            extr, world, corrs = synthetic_scene(intr, rng, n_points=8)
            frames = [{"step": j, "position": list(map(float, w)),
                       "gripper_open": True} for j, w in enumerate(world)]
            records.append({
                "trajectory": {"frames": frames},
                "camera_id": "cam",
                "intrinsics": {"fx": 320, "fy": 330, "cx": 320, "cy": 240,
                               "width": 640, "height": 480},
                "extrinsics": None if i == 0 else {
                    "rotation": extr.rotation.tolist(),
                    "translation": extr.translation.tolist()},
                "correspondences": [{"world": list(map(float, c.world)),
                                     "pixel": list(c.pixel)} for c in corrs],
                "instructions": ["task"],
                "image_ref": f"{i}.png",
            })
        # corrupt the pixel labels of record 2 so its rmse blows up
        for c in records[2]["correspondences"]:
            c["pixel"][0] += 40.0
        manifest = load_manifest(write_manifest(tmp_path / "m.jsonl", records))
        report = filter_manifest(manifest, threshold=5.0)
        assert report.kept == (0, 1, 3)
        assert [r.index for r in report.rejected] == [2]
        assert report.rejected[0].reason == "rmse"


class TestManifestLoading:
    def test_missing_pose_information_rejected(self, tmp_path):
        record = {"trajectory": {"frames": [{"step": 0, "position": [0, 0, 1]}]},
                  "camera_id": "c", "intrinsics": TOPDOWN_INTR_JSON,
                  "instructions": ["x"], "image_ref": "x.png"}
        path = write_manifest(tmp_path / "m.jsonl", [record])
        with pytest.raises(ValueError, match="line 1"):
            load_manifest(path)

    def test_manifest_type_round_trip(self, tmp_path):
        manifest = build_manifest(tmp_path, n_records=2)
        assert isinstance(manifest, Manifest)
        assert len(manifest.records) == 2
        assert manifest.records[0].source is wire.SourceTag.SIM
