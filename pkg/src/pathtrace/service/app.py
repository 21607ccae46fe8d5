"""FastAPI app wrapping the core package.

Ranking endpoints follow the study protocol (create session, fetch next
item per rater, submit ranks, aggregate results); pipeline, render, and
simulate endpoints run the corresponding batch operations server-side,
taking file paths in the request body (the CLI is a thin client over
these routes and shares the host filesystem).
"""

from __future__ import annotations

import os
from pathlib import Path as FsPath

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles

from .. import geometry, pipeline, ranking, render, sim, wire
from .schemas import (
    ConvertRequest, ConvertResponse, DisplayCandidate, FilterRequest,
    MixRequest, MixResponse, NextItemResponse, RanksAck, RanksIn,
    RenderRequest, RenderResponse, ResultsResponse, SessionCreate,
    SessionCreated, SimulateRequest, SimulateResponse, StatsRequest,
)

DEFAULT_DATA_DIR = os.environ.get("PATHTRACE_DATA", "pathtrace-data")


def create_app(data_dir: str | FsPath | None = None) -> FastAPI:
    data_root = FsPath(data_dir or DEFAULT_DATA_DIR)
    sessions_dir = data_root / "sessions"
    static_dir = data_root / "static"
    static_dir.mkdir(parents=True, exist_ok=True)

    app = FastAPI(title="pathtrace")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    store = ranking.SessionStore(sessions_dir)
    app.state.store = store
    app.state.data_root = data_root
    app.mount("/static", StaticFiles(directory=static_dir), name="static")

    def _http(exc: Exception) -> HTTPException:
        if isinstance(exc, (ranking.UnknownSession, ranking.UnknownRater,
                            ranking.NoData)):
            return HTTPException(404, str(exc))
        if isinstance(exc, ranking.Conflict):
            return HTTPException(409, str(exc))  # enriched in submit_ranks
        if isinstance(exc, (ranking.IncompleteRanks, ranking.OutOfRange)):
            return HTTPException(400, str(exc))
        if isinstance(exc, FileNotFoundError):
            return HTTPException(400, f"file not found: {exc}")
        if isinstance(exc, (ValueError, geometry.GeometryError)):
            return HTTPException(400, str(exc))
        return HTTPException(500, str(exc))

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    # ------------------------------------------------------------------
    # ranking study
    # ------------------------------------------------------------------

    @app.post("/sessions", response_model=SessionCreated)
    def create_session(body: SessionCreate) -> SessionCreated:
        items = [
            ranking.RankingItem(
                item_id=it.item_id, image_ref=it.image_ref,
                candidates=tuple(ranking.Candidate(c.method_id, c.image_ref)
                                 for c in it.candidates),
                tags=tuple(it.tags), instruction=it.instruction)
            for it in body.items
        ]
        try:
            session = store.create(items, seed=body.seed, raters=body.raters,
                                   session_id=body.session_id)
        except ValueError as exc:
            raise _http(exc)
        return SessionCreated(session_id=session.session_id, items=len(items))

    @app.get("/sessions/{session_id}/next", response_model=NextItemResponse)
    def get_next(session_id: str, rater: str = Query(...)) -> NextItemResponse:
        try:
            session = store.get(session_id)
            nxt = ranking.next_item(session, rater)
        except ranking.RankingError as exc:
            raise _http(exc)
        if nxt is None:
            return NextItemResponse(done=True)
        return NextItemResponse(
            done=False, item_id=nxt.item.item_id, image_ref=nxt.item.image_ref,
            instruction=nxt.item.instruction, position=nxt.position,
            total=nxt.total, k=len(nxt.item.candidates),
            candidates=[DisplayCandidate(slot=i, image_ref=c.image_ref)
                        for i, c in enumerate(nxt.displayed)])

    @app.post("/sessions/{session_id}/ranks", response_model=RanksAck)
    def submit_ranks(session_id: str, body: RanksIn) -> RanksAck:
        try:
            session = store.get(session_id)
            if body.ranks is not None:
                ranks = dict(body.ranks)
            elif body.slot_ranks is not None:
                item = None
                for it in session.items:
                    if it.item_id == body.item_id:
                        item = it
                        break
                if item is None:
                    raise ranking.IncompleteRanks(f"unknown item {body.item_id}")
                perm = ranking.candidate_permutation(
                    session.seed, body.rater_id, body.item_id,
                    len(item.candidates))
                if set(body.slot_ranks) != set(range(len(item.candidates))):
                    raise ranking.IncompleteRanks("every display slot needs a rank")
                ranks = {item.candidates[perm[slot]].method_id: rank
                         for slot, rank in body.slot_ranks.items()}
            else:
                raise ranking.IncompleteRanks("provide ranks or slot_ranks")
            ack = store.submit(session_id, ranking.RankRecord(
                item_id=body.item_id, rater_id=body.rater_id, ranks=ranks))
        except ranking.Conflict as exc:
            # hand the stored record back in display-slot terms so the
            # client can show it read-only without learning method ids
            detail: dict = {"message": str(exc)}
            if exc.stored is not None:
                item = session.item(exc.stored.item_id)
                perm = ranking.candidate_permutation(
                    session.seed, exc.stored.rater_id, exc.stored.item_id,
                    len(item.candidates))
                detail["stored_slot_ranks"] = {
                    str(slot): exc.stored.ranks[item.candidates[perm[slot]].method_id]
                    for slot in range(len(item.candidates))}
            raise HTTPException(409, detail)
        except ranking.RankingError as exc:
            raise _http(exc)
        return RanksAck(status=ack["status"], item_id=ack["item_id"])

    @app.get("/sessions/{session_id}/results", response_model=ResultsResponse)
    def results(session_id: str, tag: str | None = None) -> ResultsResponse:
        try:
            session = store.get(session_id)
            means = ranking.aggregate(session, tag)
        except ranking.RankingError as exc:
            raise _http(exc)
        matching = [
            r for (rater, item_id), r in session.records.items()
            if tag is None or tag in session.item(item_id).tags
        ]
        return ResultsResponse(means=means, records=len(matching), tag=tag)

    # ------------------------------------------------------------------
    # dataset pipeline
    # ------------------------------------------------------------------

    @app.post("/pipeline/convert", response_model=ConvertResponse)
    def convert(body: ConvertRequest) -> ConvertResponse:
        try:
            manifest = pipeline.load_manifest(body.manifest)
            config = pipeline.ConvertConfig(
                epsilon=body.epsilon,
                representation=pipeline.Representation(body.representation),
                min_visibility=body.min_visibility,
                shard_size=body.shard_size)
            result = pipeline.convert(manifest, config)
            files = pipeline.write_shards(result, body.out_dir)
        except (OSError, ValueError) as exc:
            raise _http(exc)
        return ConvertResponse(samples=result.sample_count(),
                               shards=len(result.shards),
                               rejections=len(result.rejections),
                               files=[str(f) for f in files])

    @app.post("/pipeline/mix", response_model=MixResponse)
    def mix(body: MixRequest) -> MixResponse:
        try:
            samples_by_source: dict[str, tuple[wire.VQASample, ...]] = {}
            for source, locations in body.sources.items():
                collected: list[wire.VQASample] = []
                for loc in locations:
                    p = FsPath(loc)
                    if p.is_dir():
                        for shard in pipeline.read_shards(p):
                            if shard.source.value == source:
                                collected.extend(shard.samples)
                    else:
                        import json as _json
                        with open(p, encoding="utf-8") as fh:
                            for line in fh:
                                if line.strip():
                                    collected.append(
                                        pipeline.sample_from_json(_json.loads(line)))
                samples_by_source[source] = tuple(collected)
            spec = pipeline.MixSpec(samples_by_source, seed=body.seed)
            out = FsPath(body.out)
            out.parent.mkdir(parents=True, exist_ok=True)
            written = 0
            import json as _json
            with open(out, "w", encoding="utf-8") as fh:
                for sample in pipeline.mix(spec, body.n):
                    fh.write(_json.dumps(pipeline.sample_to_json(sample),
                                         sort_keys=True) + "\n")
                    written += 1
        except (OSError, ValueError) as exc:
            raise _http(exc)
        return MixResponse(written=written, out=str(out))

    @app.post("/pipeline/stats")
    def stats(body: StatsRequest) -> dict:
        try:
            shards = pipeline.read_shards(body.in_dir)
            rejections = pipeline.read_rejections(body.in_dir)
            report = pipeline.stats(shards, rejections)
        except (OSError, ValueError) as exc:
            raise _http(exc)
        return report.to_json()

    @app.post("/pipeline/filter")
    def filter_records(body: FilterRequest) -> dict:
        try:
            manifest = pipeline.load_manifest(body.manifest)
            report = pipeline.filter_manifest(manifest, body.threshold,
                                              body.min_visibility)
        except (OSError, ValueError) as exc:
            raise _http(exc)
        return report.to_json()

    # ------------------------------------------------------------------
    # rendering and simulation
    # ------------------------------------------------------------------

    @app.post("/render", response_model=RenderResponse)
    def render_endpoint(body: RenderRequest) -> RenderResponse:
        try:
            if body.answer is not None:
                answer = body.answer
            elif body.answer_file is not None:
                answer = FsPath(body.answer_file).read_text(encoding="utf-8")
            else:
                raise ValueError("provide answer or answer_file")
            path = wire.parse_answer(answer, wire.ParseMode.LENIENT)
            if body.image is not None:
                base = render.load_png(body.image)
            else:
                base = render.Image.blank(body.width, body.height)
            mode = render.RenderMode(body.mode)
            style_kwargs = dict(body.style or {})
            for key in ("gradient_start", "gradient_end", "close_color", "open_color"):
                if key in style_kwargs:
                    style_kwargs[key] = tuple(style_kwargs[key])
            style = render.OverlayStyle(mode=mode, **style_kwargs)
            out = FsPath(body.out)
            out.parent.mkdir(parents=True, exist_ok=True)
            if mode is render.RenderMode.OVERLAY:
                img = render.draw_overlay(base, path, style)
                render.save_png(img, out)
                outputs = [str(out)]
            else:
                img = render.draw_concat(base, path, style)
                rgb = out.with_name(out.stem + "_rgb.png")
                plane = out.with_name(out.stem + "_path.png")
                render.save_png_pair(img, rgb, plane)
                render.save_planar(img, out)
                outputs = [str(out), str(rgb), str(plane)]
        except (OSError, ValueError) as exc:
            raise _http(exc)
        return RenderResponse(out=outputs)

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(body: SimulateRequest) -> SimulateResponse:
        try:
            policy = sim.PolicyKind(body.policy)
            report = sim.run_eval(body.episodes, policy, body.noise, body.seed)
        except ValueError as exc:
            raise _http(exc)
        return SimulateResponse(mean_score=report.mean_score,
                                completion_rate=report.completion_rate,
                                episodes=report.episodes, scores=report.scores)

    return app
