"""Prompt and answer wire formats for path-prediction VQA samples.

The answer grammar (see docs/answer_grammar.ebnf):

    answer  = "<ans>[" [ token { ", " token } ] "]</ans>"
    token   = point | action | "..."
    point   = "(" coord ", " coord ")"
    coord   = digit "." digit digit
    action  = "<action>" ("Open" | "Close") " Gripper</action>"

Coordinates are normalized to [0, 1] and quantized to two decimals with
round-half-up. An action tag applies to every point after it; it is
emitted between the last point of the old state and the first point of
the new state, so a path that starts with the gripper closed serializes
with a leading Close tag. Parsing with the default open initial state
then reproduces the input path exactly (after quantization).

Strict parsing demands a single well-formed "<ans>[...]</ans>" body and
reports the byte offset of the first violation. Lenient parsing recovers
the longest prefix of complete tokens and tolerates a missing "</ans>",
a trailing "...", stray whitespace, and out-of-range coordinates (clamped
and flagged).
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from .paths import GripperAction, Path2D, PathPoint

PROMPT_TEMPLATE = (
    "In the image, please execute the command described in <quest>{quest}</quest>.\n"
    "\n"
    "Provide a sequence of points denoting the trajectory of a robot gripper "
    "to achieve the goal.\n"
    "\n"
    "Format your answer as a list of tuples enclosed by <ans> and </ans> tags. "
    "For example:\n"
    "\n"
    "<ans>[(0.25, 0.32), (0.32, 0.17), (0.13, 0.24), "
    "<action>Open Gripper</action>, (0.74, 0.21), "
    "<action>Close Gripper</action>, ...]</ans>\n"
    "\n"
    "The tuple denotes the x and y location of the end effector of the "
    "gripper in the image. The action tags indicate the gripper action.\n"
    "\n"
    "The coordinates should be floats ranging between 0 and 1, indicating "
    "the relative locations of the points in the image."
)

OPEN_TAG = "<action>Open Gripper</action>"
CLOSE_TAG = "<action>Close Gripper</action>"


class ParseMode(enum.Enum):
    STRICT = "strict"
    LENIENT = "lenient"


class SourceTag(enum.Enum):
    POINT_PRED = "point_pred"
    SIM = "sim"
    REAL = "real"
    COTRAIN = "cotrain"


class MalformedAnswer(ValueError):
    """Strict-mode parse failure, carrying the byte offset of the problem."""

    def __init__(self, offset: int, reason: str) -> None:
        super().__init__(f"at byte {offset}: {reason}")
        self.offset = offset
        self.reason = reason


class EmptyAnswer(ValueError):
    """Lenient parse recovered zero complete points."""


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt text with exactly one ``{quest}`` placeholder."""

    body: str = PROMPT_TEMPLATE

    def __post_init__(self) -> None:
        if self.body.count("{quest}") != 1:
            raise ValueError("template must contain exactly one {quest} placeholder")

    def render(self, instruction: str) -> str:
        if not instruction:
            raise ValueError("instruction must be non-empty")
        return self.body.replace("{quest}", instruction)


@dataclass(frozen=True)
class VQASample:
    image_ref: str
    prompt: str
    answer: str
    source: SourceTag

    def __post_init__(self) -> None:
        if not self.answer:
            raise ValueError("answer must be non-empty")


@dataclass(frozen=True)
class PointToken:
    x: float
    y: float


@dataclass(frozen=True)
class ActionToken:
    action: GripperAction


AnswerToken = Union[PointToken, ActionToken]


@dataclass
class ParsedAnswer:
    path: Path2D
    warnings: list[str] = field(default_factory=list)


def render_prompt(instruction: str) -> str:
    """The finetuning/inference prompt with the instruction spliced in."""
    return PromptTemplate().render(instruction)


def quantize(v: float) -> float:
    """Round to two decimals, half up."""
    return _hundredths(v) / 100.0


def _hundredths(v: float) -> int:
    return int(math.floor(v * 100.0 + 0.5))


def format_coord(v: float) -> str:
    n = _hundredths(v)
    if n < 0:
        return f"-{-n // 100}.{-n % 100:02d}"
    return f"{n // 100}.{n % 100:02d}"


def quantize_path(path: Path2D) -> Path2D:
    return Path2D(PathPoint(quantize(p.x), quantize(p.y), p.gripper_open)
                  for p in path)


def serialize_answer(path: Path2D) -> str:
    """Serialize a path to the ``<ans>[...]</ans>`` trajectory format.

    Points are two-decimal tuples; an action tag is inserted at every
    gripper transition, between the old-state and new-state points. Paths
    that start closed get a leading Close tag so parsing round-trips.
    """
    tokens: list[str] = []
    prev_open = True
    for p in path.points:
        if not (0.0 <= p.x <= 1.0 and 0.0 <= p.y <= 1.0):
            raise ValueError(f"coordinate out of [0,1]: ({p.x}, {p.y})")
        if p.gripper_open != prev_open:
            tokens.append(OPEN_TAG if p.gripper_open else CLOSE_TAG)
            prev_open = p.gripper_open
        tokens.append(f"({format_coord(p.x)}, {format_coord(p.y)})")
    return "<ans>[" + ", ".join(tokens) + "]</ans>"


_WS = re.compile(r"[ \t\r\n]*")
_NUMBER = re.compile(r"-?\d+(?:\.\d+)?")
_TUPLE = re.compile(r"\(\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*\)")
_ACTION = re.compile(r"<action>\s*(Open|Close)\s+Gripper\s*</action>")
_STRICT_COORD = re.compile(r"\d\.\d\d$")


def _tokens_to_path(tokens: Sequence[AnswerToken], clamp: bool,
                    warnings: list[str]) -> list[PathPoint]:
    points: list[PathPoint] = []
    state = True  # gripper starts open unless a leading tag says otherwise
    for tok in tokens:
        if isinstance(tok, ActionToken):
            state = tok.action is GripperAction.OPEN
            continue
        x, y = tok.x, tok.y
        if clamp:
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                warnings.append(f"coordinate ({x}, {y}) clamped to [0,1]")
            x = min(1.0, max(0.0, x))
            y = min(1.0, max(0.0, y))
        points.append(PathPoint(x, y, state))
    return points


def _parse_strict_tokens(text: str) -> list[AnswerToken]:
    pos = _WS.match(text).end()
    if not text.startswith("<ans>", pos):
        raise MalformedAnswer(pos, "expected <ans>")
    pos += 5
    pos = _WS.match(text, pos).end()
    if pos >= len(text) or text[pos] != "[":
        raise MalformedAnswer(pos, "expected [")
    pos += 1
    tokens: list[AnswerToken] = []
    first = True
    while True:
        pos = _WS.match(text, pos).end()
        if pos < len(text) and text[pos] == "]":
            pos += 1
            break
        if not first:
            if pos >= len(text) or text[pos] != ",":
                raise MalformedAnswer(pos, "expected , or ]")
            pos += 1
            pos = _WS.match(text, pos).end()
        first = False
        m = _ACTION.match(text, pos)
        if m:
            tokens.append(ActionToken(GripperAction.OPEN if m.group(1) == "Open"
                                      else GripperAction.CLOSE))
            pos = m.end()
            continue
        m = _TUPLE.match(text, pos)
        if m:
            xs, ys = m.group(1), m.group(2)
            x, y = float(xs), float(ys)
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                raise MalformedAnswer(pos, f"coordinate out of [0,1]: ({xs}, {ys})")
            tokens.append(PointToken(x, y))
            pos = m.end()
            continue
        # a tuple of the wrong arity deserves a pointed message
        if pos < len(text) and text[pos] == "(":
            raise MalformedAnswer(pos, "malformed tuple")
        raise MalformedAnswer(pos, "expected point tuple or action tag")
    pos = _WS.match(text, pos).end()
    if not text.startswith("</ans>", pos):
        raise MalformedAnswer(pos, "expected </ans>")
    pos += 6
    pos = _WS.match(text, pos).end()
    if pos != len(text):
        raise MalformedAnswer(pos, "trailing content after </ans>")
    return tokens


def _parse_lenient_tokens(text: str) -> list[AnswerToken]:
    start = text.find("<ans>")
    pos = start + 5 if start >= 0 else 0
    tokens: list[AnswerToken] = []
    n = len(text)
    seen_open_bracket = False
    while pos < n:
        ch = text[pos]
        if ch in " \t\r\n,":
            pos += 1
            continue
        if ch == "[" and not seen_open_bracket:
            seen_open_bracket = True
            pos += 1
            continue
        if ch == "]" or text.startswith("</ans>", pos):
            break
        if text.startswith("...", pos):
            pos += 3
            continue
        m = _ACTION.match(text, pos)
        if m:
            tokens.append(ActionToken(GripperAction.OPEN if m.group(1) == "Open"
                                      else GripperAction.CLOSE))
            pos = m.end()
            continue
        m = _TUPLE.match(text, pos)
        if m:
            tokens.append(PointToken(float(m.group(1)), float(m.group(2))))
            pos = m.end()
            continue
        break  # truncated or unrecognized: keep the prefix parsed so far
    return tokens


def parse_answer_detailed(text: str, mode: ParseMode = ParseMode.STRICT) -> ParsedAnswer:
    """Parse an answer string into a path, collecting lenient-mode warnings."""
    warnings: list[str] = []
    if mode is ParseMode.STRICT:
        tokens = _parse_strict_tokens(text)
        points = _tokens_to_path(tokens, clamp=False, warnings=warnings)
        if not points:
            raise MalformedAnswer(0, "answer contains no points")
    else:
        tokens = _parse_lenient_tokens(text)
        points = _tokens_to_path(tokens, clamp=True, warnings=warnings)
        if not points:
            raise EmptyAnswer("no complete point recovered")
    return ParsedAnswer(Path2D(points), warnings)


def parse_answer(text: str, mode: ParseMode = ParseMode.STRICT) -> Path2D:
    """Inverse of serialize_answer; see parse_answer_detailed for warnings."""
    return parse_answer_detailed(text, mode).path


def tokenize_answer(text: str, mode: ParseMode = ParseMode.STRICT) -> list[AnswerToken]:
    """Raw token stream of an answer (points and action tags, in order)."""
    if mode is ParseMode.STRICT:
        return _parse_strict_tokens(text)
    return _parse_lenient_tokens(text)


def serialize_points(points: Iterable[tuple[float, float]]) -> str:
    """Unordered point list as a plain bracketed tuple string."""
    parts = []
    for x, y in points:
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise ValueError(f"coordinate out of [0,1]: ({x}, {y})")
        parts.append(f"({format_coord(x)}, {format_coord(y)})")
    return "[" + ", ".join(parts) + "]"


def parse_points(text: str) -> list[tuple[float, float]]:
    pos = _WS.match(text).end()
    if pos >= len(text) or text[pos] != "[":
        raise MalformedAnswer(pos, "expected [")
    pos += 1
    out: list[tuple[float, float]] = []
    first = True
    while True:
        pos = _WS.match(text, pos).end()
        if pos < len(text) and text[pos] == "]":
            pos += 1
            break
        if not first:
            if pos >= len(text) or text[pos] != ",":
                raise MalformedAnswer(pos, "expected , or ]")
            pos += 1
            pos = _WS.match(text, pos).end()
        first = False
        m = _TUPLE.match(text, pos)
        if not m:
            raise MalformedAnswer(pos, "malformed tuple")
        x, y = float(m.group(1)), float(m.group(2))
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise MalformedAnswer(pos, "coordinate out of [0,1]")
        out.append((x, y))
        pos = m.end()
    pos = _WS.match(text, pos).end()
    if pos != len(text):
        raise MalformedAnswer(pos, "trailing content")
    return out


_BBOX = re.compile(
    r"\(\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*,"
    r"\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*\)")


def serialize_bbox(boxes: Iterable[tuple[float, float, float, float]]) -> str:
    """Bounding boxes as (cx, cy, w, h) tuples, two decimals each."""
    parts = []
    for cx, cy, w, h in boxes:
        if not (0.0 <= cx <= 1.0 and 0.0 <= cy <= 1.0):
            raise ValueError(f"box center out of [0,1]: ({cx}, {cy})")
        if w <= 0 or h <= 0:
            raise ValueError("box width/height must be positive")
        parts.append(f"({format_coord(cx)}, {format_coord(cy)}, "
                     f"{format_coord(w)}, {format_coord(h)})")
    return "[" + ", ".join(parts) + "]"


def parse_bbox(text: str) -> list[tuple[float, float, float, float]]:
    pos = _WS.match(text).end()
    if pos >= len(text) or text[pos] != "[":
        raise MalformedAnswer(pos, "expected [")
    pos += 1
    out: list[tuple[float, float, float, float]] = []
    first = True
    while True:
        pos = _WS.match(text, pos).end()
        if pos < len(text) and text[pos] == "]":
            pos += 1
            break
        if not first:
            if pos >= len(text) or text[pos] != ",":
                raise MalformedAnswer(pos, "expected , or ]")
            pos += 1
            pos = _WS.match(text, pos).end()
        first = False
        m = _BBOX.match(text, pos)
        if not m:
            raise MalformedAnswer(pos, "malformed box tuple (need 4 coordinates)")
        cx, cy, w, h = (float(m.group(i)) for i in range(1, 5))
        if not (0.0 <= cx <= 1.0 and 0.0 <= cy <= 1.0) or w <= 0 or h <= 0:
            raise MalformedAnswer(pos, "box values out of range")
        out.append((cx, cy, w, h))
        pos = m.end()
    pos = _WS.match(text, pos).end()
    if pos != len(text):
        raise MalformedAnswer(pos, "trailing content")
    return out
