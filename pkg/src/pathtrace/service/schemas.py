"""Request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class CandidateIn(BaseModel):
    method_id: str
    image_ref: str


class RankingItemIn(BaseModel):
    item_id: str
    image_ref: str
    candidates: list[CandidateIn] = Field(min_length=2)
    tags: list[str] = []
    instruction: str = ""


class SessionCreate(BaseModel):
    items: list[RankingItemIn] = Field(min_length=1)
    seed: int = 0
    raters: list[str] = []
    session_id: str | None = None


class SessionCreated(BaseModel):
    session_id: str
    items: int


class DisplayCandidate(BaseModel):
    slot: int
    image_ref: str


class NextItemResponse(BaseModel):
    done: bool
    item_id: str | None = None
    image_ref: str | None = None
    instruction: str | None = None
    position: int | None = None
    total: int | None = None
    k: int | None = None
    candidates: list[DisplayCandidate] = []


class RanksIn(BaseModel):
    rater_id: str
    item_id: str
    # either display-slot keyed (what a rater UI knows) or method keyed
    slot_ranks: dict[int, int] | None = None
    ranks: dict[str, int] | None = None


class RanksAck(BaseModel):
    status: str
    item_id: str


class ResultsResponse(BaseModel):
    means: dict[str, float]
    records: int
    tag: str | None = None


class ConvertRequest(BaseModel):
    manifest: str
    out_dir: str
    epsilon: float = 0.05
    representation: str = "rdp"
    min_visibility: float = 0.9
    shard_size: int = 10_000


class ConvertResponse(BaseModel):
    samples: int
    shards: int
    rejections: int
    files: list[str]


class MixRequest(BaseModel):
    sources: dict[str, list[str]]  # source tag -> shard files or directories
    n: int
    seed: int = 0
    out: str


class MixResponse(BaseModel):
    written: int
    out: str


class StatsRequest(BaseModel):
    in_dir: str


class FilterRequest(BaseModel):
    manifest: str
    threshold: float
    min_visibility: float = 0.9


class RenderRequest(BaseModel):
    answer: str | None = None
    answer_file: str | None = None
    image: str | None = None
    width: int = 256
    height: int = 256
    mode: str = "overlay"
    style: dict | None = None
    out: str


class RenderResponse(BaseModel):
    out: list[str]


class SimulateRequest(BaseModel):
    policy: str = "follower"
    episodes: int = 100
    noise: float = 0.0
    seed: int = 0


class SimulateResponse(BaseModel):
    mean_score: float
    completion_rate: float
    episodes: int
    scores: list[float]
