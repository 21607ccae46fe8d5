"""Ranking sessions for the human path-quality study.

Raters see one item at a time: an image plus K candidate path renderings
in a rater-specific shuffled order (so method identity stays hidden), and
assign each candidate a rank from 1 (best) to K (worst). Ties are
allowed. Records append to a per-session JSON Lines event log; replaying
the log reconstructs the session exactly, including aggregates.

Aggregation is the arithmetic mean of ranks per method over all records,
optionally restricted to items carrying a given tag.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Iterable, Sequence


class RankingError(Exception):
    pass


class UnknownSession(RankingError):
    pass


class UnknownRater(RankingError):
    pass


class IncompleteRanks(RankingError):
    pass


class OutOfRange(RankingError):
    pass


class Conflict(RankingError):
    """A different record was already submitted for this (rater, item)."""

    def __init__(self, message: str, stored: "RankRecord | None" = None) -> None:
        super().__init__(message)
        self.stored = stored


class NoData(RankingError):
    pass


@dataclass(frozen=True)
class Candidate:
    method_id: str
    image_ref: str


@dataclass(frozen=True)
class RankingItem:
    item_id: str
    image_ref: str
    candidates: tuple[Candidate, ...]
    tags: tuple[str, ...] = ()
    instruction: str = ""

    def __post_init__(self) -> None:
        if len(self.candidates) < 2:
            raise ValueError("an item needs at least 2 candidates")
        methods = [c.method_id for c in self.candidates]
        if len(set(methods)) != len(methods):
            raise ValueError("duplicate method ids in one item")


@dataclass(frozen=True)
class RankRecord:
    item_id: str
    rater_id: str
    ranks: dict[str, int]


def candidate_permutation(seed: int, rater_id: str, item_id: str, k: int) -> list[int]:
    """Deterministic per-(rater, item) display order of the K candidates."""
    digest = hashlib.sha256(f"{seed}:{rater_id}:{item_id}".encode()).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    order = list(range(k))
    rng.shuffle(order)
    return order


@dataclass
class Session:
    session_id: str
    items: tuple[RankingItem, ...]
    seed: int = 0
    raters: tuple[str, ...] = ()  # empty = open enrollment
    records: dict[tuple[str, str], RankRecord] = field(default_factory=dict)

    def item(self, item_id: str) -> RankingItem:
        for it in self.items:
            if it.item_id == item_id:
                return it
        raise KeyError(item_id)

    def check_rater(self, rater_id: str) -> None:
        if not rater_id:
            raise UnknownRater("empty rater id")
        if self.raters and rater_id not in self.raters:
            raise UnknownRater(rater_id)


@dataclass(frozen=True)
class NextItem:
    """One pending item as shown to a rater: candidates already shuffled."""

    item: RankingItem
    permutation: tuple[int, ...]
    position: int
    total: int

    @property
    def displayed(self) -> tuple[Candidate, ...]:
        return tuple(self.item.candidates[i] for i in self.permutation)


def next_item(session: Session, rater_id: str) -> NextItem | None:
    """Lowest-index item the rater has not ranked; None when done."""
    session.check_rater(rater_id)
    done = 0
    for idx, item in enumerate(session.items):
        if (rater_id, item.item_id) in session.records:
            done += 1
            continue
        perm = candidate_permutation(session.seed, rater_id, item.item_id,
                                     len(item.candidates))
        return NextItem(item=item, permutation=tuple(perm), position=idx,
                        total=len(session.items))
    return None


def validate_record(session: Session, record: RankRecord) -> RankingItem:
    session.check_rater(record.rater_id)
    item = None
    try:
        item = session.item(record.item_id)
    except KeyError:
        raise IncompleteRanks(f"unknown item {record.item_id}")
    methods = {c.method_id for c in item.candidates}
    missing = methods - record.ranks.keys()
    extra = record.ranks.keys() - methods
    if missing or extra:
        raise IncompleteRanks(f"missing={sorted(missing)} extra={sorted(extra)}")
    k = len(item.candidates)
    for method, rank in record.ranks.items():
        if not isinstance(rank, int) or isinstance(rank, bool) or not (1 <= rank <= k):
            raise OutOfRange(f"rank {rank!r} for {method} not in [1, {k}]")
    return item


def aggregate(session: Session, tag_filter: str | None = None) -> dict[str, float]:
    """Mean rank per method over records whose item tags match the filter."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for (rater_id, item_id), record in session.records.items():
        item = session.item(item_id)
        if tag_filter is not None and tag_filter not in item.tags:
            continue
        for method, rank in record.ranks.items():
            sums[method] = sums.get(method, 0.0) + rank
            counts[method] = counts.get(method, 0) + 1
    if not sums:
        raise NoData("no records" + (f" with tag {tag_filter!r}" if tag_filter else ""))
    return {m: sums[m] / counts[m] for m in sorted(sums)}


def _item_to_json(item: RankingItem) -> dict:
    return {"item_id": item.item_id, "image_ref": item.image_ref,
            "instruction": item.instruction, "tags": list(item.tags),
            "candidates": [{"method_id": c.method_id, "image_ref": c.image_ref}
                           for c in item.candidates]}


def _item_from_json(obj: dict) -> RankingItem:
    return RankingItem(
        item_id=obj["item_id"], image_ref=obj["image_ref"],
        instruction=obj.get("instruction", ""), tags=tuple(obj.get("tags", [])),
        candidates=tuple(Candidate(c["method_id"], c["image_ref"])
                         for c in obj["candidates"]))


class SessionStore:
    """Sessions backed by append-only JSONL event logs, one file each.

    Writes are serialized per store; reads work off in-memory state that
    is only ever extended, so they always see a consistent prefix of the
    log.
    """

    def __init__(self, root: str | FsPath) -> None:
        self.root = FsPath(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        for log in sorted(self.root.glob("*.jsonl")):
            session = self._replay(log)
            if session is not None:
                self._sessions[session.session_id] = session

    def _log_path(self, session_id: str) -> FsPath:
        return self.root / f"{session_id}.jsonl"

    def _append(self, session_id: str, event: dict) -> None:
        with open(self._log_path(session_id), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()

    def _replay(self, log: FsPath) -> Session | None:
        session: Session | None = None
        with open(log, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                event = json.loads(line)
                if event["type"] == "session_created":
                    session = Session(
                        session_id=event["session_id"],
                        items=tuple(_item_from_json(o) for o in event["items"]),
                        seed=event.get("seed", 0),
                        raters=tuple(event.get("raters", [])))
                elif event["type"] == "ranks_submitted" and session is not None:
                    record = RankRecord(item_id=event["item_id"],
                                        rater_id=event["rater_id"],
                                        ranks={m: int(r) for m, r in event["ranks"].items()})
                    session.records[(record.rater_id, record.item_id)] = record
        return session

    def create(self, items: Iterable[RankingItem], seed: int = 0,
               raters: Sequence[str] = (), session_id: str | None = None) -> Session:
        items = tuple(items)
        if not items:
            raise ValueError("a session needs at least one item")
        sid = session_id or uuid.uuid4().hex[:12]
        with self._lock:
            if sid in self._sessions:
                raise ValueError(f"session {sid} already exists")
            session = Session(session_id=sid, items=items, seed=seed,
                              raters=tuple(raters))
            self._append(sid, {"type": "session_created", "session_id": sid,
                               "seed": seed, "raters": list(raters),
                               "items": [_item_to_json(it) for it in items]})
            self._sessions[sid] = session
        return session

    def get(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSession(session_id)

    def session_ids(self) -> list[str]:
        return sorted(self._sessions)

    def submit(self, session_id: str, record: RankRecord) -> dict:
        """Validate and persist one rank record.

        Identical resubmission is an idempotent no-op; a conflicting one
        raises Conflict and leaves the stored record untouched.
        """
        with self._lock:
            session = self.get(session_id)
            item = validate_record(session, record)
            key = (record.rater_id, record.item_id)
            existing = session.records.get(key)
            if existing is not None:
                if existing.ranks == record.ranks:
                    return {"status": "duplicate", "item_id": record.item_id}
                raise Conflict(f"item {record.item_id} already ranked differently "
                               f"by {record.rater_id}", stored=existing)
            perm = candidate_permutation(session.seed, record.rater_id,
                                         record.item_id, len(item.candidates))
            self._append(session_id, {
                "type": "ranks_submitted", "item_id": record.item_id,
                "rater_id": record.rater_id, "ranks": record.ranks,
                "permutation": perm})
            session.records[key] = record
        return {"status": "accepted", "item_id": record.item_id}
