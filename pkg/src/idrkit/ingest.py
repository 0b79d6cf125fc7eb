"""Parsing of talks, subtitle files, and connective lexicons into typed records.

Subtitle times are stored internally as integer milliseconds; the float
`start`/`end` second views are derived, so duration comparisons downstream
never accumulate float drift.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum

from .text import normalize_space


class SubtitleParseError(ValueError):
    """Malformed subtitle content; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SubtitleValidationError(ValueError):
    pass


class LexiconError(ValueError):
    pass


class RelationLabel(Enum):
    CAUSE_EFFECT = "cause-effect"
    CONTRAST = "contrast"
    TEMPORAL = "temporal"
    ELABORATION = "elaboration"

    @classmethod
    def from_string(cls, s: str) -> "RelationLabel":
        try:
            return cls(s.strip().lower())
        except ValueError:
            raise LexiconError(f"unknown sense {s!r}; expected one of "
                               f"{[m.value for m in cls]}") from None


@dataclass(frozen=True)
class SubtitleSegment:
    """One timed transcript unit of a talk."""

    talk_id: str
    index: int
    start_ms: int
    end_ms: int
    text: str

    def __post_init__(self):
        if self.index < 0:
            raise SubtitleValidationError(f"negative index {self.index}")
        if self.start_ms < 0:
            raise SubtitleValidationError(f"negative start {self.start_ms} ms")
        if self.end_ms <= self.start_ms:
            raise SubtitleValidationError(
                f"segment {self.index}: end {self.end_ms} ms <= start {self.start_ms} ms")
        if not self.text.strip():
            raise SubtitleValidationError(f"segment {self.index}: empty text")

    @property
    def start(self) -> float:
        return self.start_ms / 1000.0

    @property
    def end(self) -> float:
        return self.end_ms / 1000.0

    @property
    def duration(self) -> float:
        return (self.end_ms - self.start_ms) / 1000.0


@dataclass(frozen=True)
class ConnectiveEntry:
    surface: str
    language: str
    sense: RelationLabel
    ambiguous: bool


@dataclass
class Talk:
    talk_id: str
    source_language: str
    translations: set[str] = field(default_factory=set)
    audio_path: str | None = None

    def __post_init__(self):
        if self.source_language in self.translations:
            raise ValueError(
                f"talk {self.talk_id}: source language {self.source_language!r} "
                f"listed among its own translations")


def build_talk_registry(talks: list[Talk]) -> dict[str, Talk]:
    registry: dict[str, Talk] = {}
    for talk in talks:
        if talk.talk_id in registry:
            raise ValueError(f"duplicate talk_id {talk.talk_id!r}")
        registry[talk.talk_id] = talk
    return registry


_SRT_TIME = re.compile(
    r"^(\d{1,2}):(\d{2}):(\d{2})[,.](\d{3})\s*-->\s*(\d{1,2}):(\d{2}):(\d{2})[,.](\d{3})\s*$")


def _srt_time_ms(h: str, m: str, s: str, ms: str) -> int:
    return ((int(h) * 60 + int(m)) * 60 + int(s)) * 1000 + int(ms)


def parse_subtitles(content: bytes, fmt: str, talk_id: str = "") -> list[SubtitleSegment]:
    """Parse subtitle file content in ``srt`` or ``segments-json`` format.

    Segments are re-indexed 0..n-1 in file order; blocks whose text is empty
    after whitespace trimming are dropped.
    """
    if fmt == "srt":
        return _parse_srt(content, talk_id)
    if fmt == "segments-json":
        return _parse_segments_json(content, talk_id)
    raise ValueError(f"unknown subtitle format {fmt!r}")


def _parse_srt(content: bytes, talk_id: str) -> list[SubtitleSegment]:
    try:
        text = content.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise SubtitleParseError(f"not valid UTF-8: {exc}", line=0) from None
    lines = text.splitlines()
    segments: list[SubtitleSegment] = []
    i = 0
    n = len(lines)
    index = 0
    while i < n:
        if not lines[i].strip():
            i += 1
            continue
        counter_line = i
        if lines[i].strip().isdigit():
            i += 1
        if i >= n:
            raise SubtitleParseError("block truncated before timestamp", line=counter_line + 1)
        m = _SRT_TIME.match(lines[i].strip())
        if not m:
            raise SubtitleParseError(f"malformed timestamp {lines[i].strip()!r}", line=i + 1)
        start_ms = _srt_time_ms(*m.groups()[:4])
        end_ms = _srt_time_ms(*m.groups()[4:])
        time_line = i + 1
        i += 1
        body: list[str] = []
        while i < n and lines[i].strip():
            body.append(lines[i].strip())
            i += 1
        seg_text = normalize_space(" ".join(body))
        if not seg_text:
            continue
        if end_ms <= start_ms:
            raise SubtitleValidationError(
                f"line {time_line}: end {end_ms} ms <= start {start_ms} ms")
        segments.append(SubtitleSegment(talk_id, index, start_ms, end_ms, seg_text))
        index += 1
    return segments


def _parse_segments_json(content: bytes, talk_id: str) -> list[SubtitleSegment]:
    try:
        data = json.loads(content.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SubtitleParseError(str(exc), line=getattr(exc, "lineno", 0)) from None
    if not isinstance(data, list):
        raise SubtitleParseError("expected a top-level JSON array", line=1)
    segments = []
    prev_index = -1
    for row in data:
        seg = SubtitleSegment(talk_id, int(row["index"]), int(row["start_ms"]),
                              int(row["end_ms"]), normalize_space(str(row["text"])))
        if seg.index <= prev_index:
            raise SubtitleValidationError(
                f"indices not strictly increasing at index {seg.index}")
        prev_index = seg.index
        segments.append(seg)
    return segments


def serialize_srt(segments: list[SubtitleSegment]) -> bytes:
    def fmt_ms(ms: int) -> str:
        h, rem = divmod(ms, 3600_000)
        m, rem = divmod(rem, 60_000)
        s, milli = divmod(rem, 1000)
        return f"{h:02d}:{m:02d}:{s:02d},{milli:03d}"

    blocks = []
    for k, seg in enumerate(segments, start=1):
        blocks.append(f"{k}\n{fmt_ms(seg.start_ms)} --> {fmt_ms(seg.end_ms)}\n{seg.text}\n")
    return "\n".join(blocks).encode("utf-8")


def serialize_segments_json(segments: list[SubtitleSegment]) -> bytes:
    rows = [{"index": s.index, "start_ms": s.start_ms, "end_ms": s.end_ms, "text": s.text}
            for s in segments]
    return json.dumps(rows, ensure_ascii=False, indent=1).encode("utf-8")


def load_lexicon(content: bytes, language: str) -> list[ConnectiveEntry]:
    """Load a 3-column TSV lexicon (surface, sense, ambiguous flag).

    Entries flagged ambiguous are dropped; surfaces are lowercased and
    space-normalized. An unknown sense string is an error naming the row.
    """
    text = content.decode("utf-8-sig")
    entries: list[ConnectiveEntry] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        sep = r"\t+" if "\t" in line else r"\s{2,}"
        cols = [c.strip() for c in re.split(sep, line) if c.strip()]
        if len(cols) != 3:
            raise LexiconError(f"row {lineno}: expected 3 columns, got {len(cols)}: {raw!r}")
        surface_raw, sense_raw, flag_raw = cols
        surface = normalize_space(surface_raw.lower())
        if not surface:
            raise LexiconError(f"row {lineno}: empty surface")
        flag = flag_raw.strip().lower()
        if flag not in ("true", "false", "1", "0", "yes", "no"):
            raise LexiconError(f"row {lineno}: bad ambiguous flag {flag_raw!r}")
        ambiguous = flag in ("true", "1", "yes")
        try:
            sense = RelationLabel.from_string(sense_raw)
        except LexiconError as exc:
            raise LexiconError(f"row {lineno}: {exc}") from None
        if ambiguous:
            continue
        entries.append(ConnectiveEntry(surface, language, sense, ambiguous=False))
    return entries
