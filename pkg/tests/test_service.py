import numpy as np
import pytest
from fastapi.testclient import TestClient

from pathtrace.service.app import create_app

from conftest import TOPDOWN_INTR_JSON, manifest_record_json, write_manifest


@pytest.fixture
def client(tmp_path):
    app = create_app(tmp_path / "data")
    with TestClient(app) as c:
        yield c


def session_body(n_items=2, k=4, session_id="study"):
    methods = [f"m{j}" for j in range(k)]
    return {
        "session_id": session_id,
        "seed": 11,
        "items": [
            {"item_id": f"i{n}", "image_ref": f"scene{n}.png",
             "instruction": f"task {n}",
             "tags": ["split_a" if n % 2 == 0 else "split_b"],
             "candidates": [{"method_id": m, "image_ref": f"scene{n}_{m}.png"}
                            for m in methods]}
            for n in range(n_items)
        ],
    }


class TestRankingRoutes:
    def test_full_study_flow(self, client):
        assert client.post("/sessions", json=session_body()).status_code == 200

        nxt = client.get("/sessions/study/next", params={"rater": "r1"}).json()
        assert not nxt["done"]
        assert nxt["item_id"] == "i0"
        assert len(nxt["candidates"]) == 4
        shown = [c["image_ref"] for c in nxt["candidates"]]
        assert sorted(shown) == sorted(f"scene0_m{j}" + ".png" for j in range(4))

        # rank by display slot; server maps the permutation back to methods
        r = client.post("/sessions/study/ranks", json={
            "rater_id": "r1", "item_id": "i0",
            "slot_ranks": {"0": 1, "1": 2, "2": 3, "3": 4}})
        assert r.status_code == 200 and r.json()["status"] == "accepted"

        r = client.post("/sessions/study/ranks", json={
            "rater_id": "r1", "item_id": "i1",
            "ranks": {"m0": 1, "m1": 1, "m2": 3, "m3": 4}})  # tie accepted
        assert r.status_code == 200

        done = client.get("/sessions/study/next", params={"rater": "r1"}).json()
        assert done["done"]

        res = client.get("/sessions/study/results").json()
        assert res["records"] == 2
        assert set(res["means"]) == {"m0", "m1", "m2", "m3"}
        assert all(1.0 <= v <= 4.0 for v in res["means"].values())

        split = client.get("/sessions/study/results", params={"tag": "split_b"}).json()
        assert split["records"] == 1
        assert split["means"] == {"m0": 1.0, "m1": 1.0, "m2": 3.0, "m3": 4.0}

    def test_slot_ranks_map_through_permutation(self, client):
        client.post("/sessions", json=session_body(n_items=1))
        nxt = client.get("/sessions/study/next", params={"rater": "x"}).json()
        # give rank 1 to whatever is displayed first, 2..K to the rest
        client.post("/sessions/study/ranks", json={
            "rater_id": "x", "item_id": "i0",
            "slot_ranks": {str(s): s + 1 for s in range(4)}})
        means = client.get("/sessions/study/results").json()["means"]
        first_shown = nxt["candidates"][0]["image_ref"]
        best_method = first_shown.split("_")[-1].removesuffix(".png")
        assert means[best_method] == 1.0

    def test_error_mapping(self, client):
        assert client.get("/sessions/ghost/next",
                          params={"rater": "r"}).status_code == 404
        client.post("/sessions", json=session_body(n_items=1))
        body = {"rater_id": "r", "item_id": "i0",
                "ranks": {"m0": 1, "m1": 2, "m2": 3, "m3": 4}}
        assert client.post("/sessions/study/ranks", json=body).status_code == 200
        conflicting = dict(body, ranks={"m0": 4, "m1": 3, "m2": 2, "m3": 1})
        assert client.post("/sessions/study/ranks",
                           json=conflicting).status_code == 409
        incomplete = {"rater_id": "r", "item_id": "i0", "ranks": {"m0": 1}}
        assert client.post("/sessions/study/ranks",
                           json=incomplete).status_code == 400
        out_of_range = {"rater_id": "r2", "item_id": "i0",
                        "ranks": {"m0": 1, "m1": 2, "m2": 3, "m3": 9}}
        assert client.post("/sessions/study/ranks",
                           json=out_of_range).status_code == 400
        assert client.get("/sessions/study/results",
                          params={"tag": "nope"}).status_code == 404

    def test_duplicate_session_id_rejected(self, client):
        assert client.post("/sessions", json=session_body()).status_code == 200
        assert client.post("/sessions", json=session_body()).status_code == 400


class TestPipelineRoutes:
    def _write_manifest(self, tmp_path, n=3):
        rng = np.random.default_rng(1)
        records = [manifest_record_json(rng, TOPDOWN_INTR_JSON,
                                        image_ref=f"e{i}.png",
                                        instructions=("a", "b"))
                   for i in range(n)]
        return write_manifest(tmp_path / "manifest.jsonl", records)

    def test_convert_stats_mix_chain(self, client, tmp_path):
        manifest = self._write_manifest(tmp_path)
        out_dir = tmp_path / "shards"
        r = client.post("/pipeline/convert", json={
            "manifest": str(manifest), "out_dir": str(out_dir)})
        assert r.status_code == 200
        assert r.json()["samples"] == 6

        r = client.post("/pipeline/stats", json={"in_dir": str(out_dir)})
        assert r.status_code == 200
        assert r.json()["samples_per_source"] == {"sim": 6}

        r = client.post("/pipeline/mix", json={
            "sources": {"sim": [str(out_dir)]}, "n": 10, "seed": 2,
            "out": str(tmp_path / "mixed.jsonl")})
        assert r.status_code == 200
        assert r.json()["written"] == 10
        lines = (tmp_path / "mixed.jsonl").read_text().splitlines()
        assert len(lines) == 10

    def test_convert_missing_manifest_is_400(self, client, tmp_path):
        r = client.post("/pipeline/convert", json={
            "manifest": str(tmp_path / "missing.jsonl"),
            "out_dir": str(tmp_path / "out")})
        assert r.status_code == 400

    def test_mix_empty_is_400(self, client, tmp_path):
        r = client.post("/pipeline/mix", json={
            "sources": {}, "n": 5, "out": str(tmp_path / "m.jsonl")})
        assert r.status_code == 400


class TestRenderRoute:
    def test_overlay_written(self, client, tmp_path):
        out = tmp_path / "r.png"
        r = client.post("/render", json={
            "answer": "<ans>[(0.10, 0.10), (0.90, 0.90)]</ans>",
            "width": 64, "height": 64, "mode": "overlay", "out": str(out)})
        assert r.status_code == 200
        assert out.exists()

    def test_concat_written_as_pair_and_planar(self, client, tmp_path):
        out = tmp_path / "c.bin"
        r = client.post("/render", json={
            "answer": "<ans>[(0.10, 0.10), <action>Close Gripper</action>, "
                      "(0.90, 0.90)]</ans>",
            "width": 32, "height": 32, "mode": "concat", "out": str(out)})
        assert r.status_code == 200
        produced = r.json()["out"]
        assert len(produced) == 3
        for f in produced:
            assert (tmp_path / f).exists() or f.startswith(str(tmp_path))

    def test_bad_answer_is_400(self, client, tmp_path):
        r = client.post("/render", json={
            "answer": "nothing here", "out": str(tmp_path / "x.png")})
        assert r.status_code == 400


class TestSimulateRoute:
    def test_follower_eval(self, client):
        r = client.post("/simulate", json={"policy": "follower",
                                           "episodes": 10, "seed": 4})
        assert r.status_code == 200
        body = r.json()
        assert body["episodes"] == 10
        assert body["mean_score"] >= 0.95

    def test_bad_policy_is_400(self, client):
        r = client.post("/simulate", json={"policy": "telepathy", "episodes": 1})
        assert r.status_code == 400


class TestStatic:
    def test_rendered_candidate_png_served(self, tmp_path):
        from pathtrace import render, wire
        app = create_app(tmp_path / "data")
        static = tmp_path / "data" / "static"
        path = wire.parse_answer("<ans>[(0.20, 0.20), (0.80, 0.60)]</ans>")
        img = render.draw_overlay(render.Image.blank(64, 64), path,
                                  render.OverlayStyle())
        render.save_png(img, static / "cand.png")
        with TestClient(app) as client:
            r = client.get("/static/cand.png")
            assert r.status_code == 200
            assert r.content == (static / "cand.png").read_bytes()


class TestDurabilityOverRestart:
    def test_results_survive_app_restart(self, tmp_path):
        data = tmp_path / "data"
        with TestClient(create_app(data)) as client:
            client.post("/sessions", json=session_body(n_items=1))
            client.post("/sessions/study/ranks", json={
                "rater_id": "r", "item_id": "i0",
                "ranks": {"m0": 2, "m1": 1, "m2": 3, "m3": 4}})
            before = client.get("/sessions/study/results").json()
        with TestClient(create_app(data)) as client:
            after = client.get("/sessions/study/results").json()
        assert after == before
