"""Three-sentence context building and Arg1/Arg2 span extraction.

Span extraction goes through a pluggable SegmenterPort (an LLM service, a
subprocess, or a recorded fixture); responses are validated and, on any
failure, a deterministic clause-based fallback produces the spans instead.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol

from .ingest import SubtitleSegment
from .text import clause_spans, normalize_space, split_sentences, strip_terminal_punct

MARKER_OPEN = "[[REL]]"
MARKER_CLOSE = "[[/REL]]"


class SegmenterPortError(RuntimeError):
    pass


class InstanceDropped(RuntimeError):
    """Both the external segmenter and the fallback failed; carries reason."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class SpanSource(Enum):
    EXTERNAL = "external"
    FALLBACK = "fallback"


@dataclass(frozen=True)
class ContextWindow:
    prev: str
    current: str
    next: str
    origin: tuple[str, tuple[int, int, int]]

    def __post_init__(self):
        if not self.current.strip():
            raise ValueError("current sentence must be non-empty")

    @property
    def text(self) -> str:
        return " ".join(p for p in (self.prev, self.current, self.next) if p)

    @property
    def current_span(self) -> tuple[int, int]:
        start = len(self.prev) + 1 if self.prev else 0
        return start, start + len(self.current)

    @property
    def marked_text(self) -> str:
        parts = []
        if self.prev:
            parts.append(self.prev)
        parts.append(f"{MARKER_OPEN} {self.current} {MARKER_CLOSE}")
        if self.next:
            parts.append(self.next)
        return " ".join(parts)


@dataclass(frozen=True)
class ArgSpans:
    arg1: tuple[int, int]
    arg2: tuple[int, int]
    source: SpanSource


def validate_spans(arg1: tuple[int, int], arg2: tuple[int, int],
                   context: str) -> tuple[bool, str]:
    """Enforce the span invariants: within bounds, non-empty, non-overlapping,
    arg1 before arg2."""
    for name, (s, e) in (("arg1", arg1), ("arg2", arg2)):
        if not (0 <= s < e <= len(context)):
            if s == e:
                return False, f"{name} empty"
            return False, f"{name} out of bounds"
        if not context[s:e].strip():
            return False, f"{name} empty"
    if max(arg1[0], arg2[0]) < min(arg1[1], arg2[1]):
        return False, "overlap"
    if arg1[1] > arg2[0]:
        return False, "order"
    return True, "ok"


def build_context(segments: list[SubtitleSegment], hit_index: int) -> ContextWindow:
    """Three consecutive sentences around the implicit relation.

    The relation is anchored at the start of the hit segment; the current
    sentence is the one containing that position in the concatenation of the
    neighboring segments' texts.
    """
    if not (0 <= hit_index < len(segments)):
        raise IndexError(f"hit_index {hit_index} out of range")
    lo = max(0, hit_index - 1)
    hi = min(len(segments), hit_index + 2)
    parts = []
    hit_offset = 0
    offset = 0
    for k in range(lo, hi):
        if k == hit_index:
            hit_offset = offset
        parts.append(segments[k].text)
        offset += len(segments[k].text) + 1
    joined = " ".join(parts)

    sents = split_sentences(joined)
    if not sents:
        raise ValueError("no sentences in context window")
    cur_i = len(sents) - 1
    for i, (_s, e) in enumerate(sents):
        if hit_offset < e:
            cur_i = i
            break
    prev = joined[sents[cur_i - 1][0]:sents[cur_i - 1][1]] if cur_i > 0 else ""
    cur = joined[sents[cur_i][0]:sents[cur_i][1]]
    nxt = joined[sents[cur_i + 1][0]:sents[cur_i + 1][1]] if cur_i + 1 < len(sents) else ""
    indices = (segments[hit_index - 1].index if hit_index > 0 else -1,
               segments[hit_index].index,
               segments[hit_index + 1].index if hit_index + 1 < len(segments) else -1)
    return ContextWindow(prev, cur, nxt, (segments[hit_index].talk_id, indices))


class SegmenterPort(Protocol):
    def segment(self, request: dict) -> dict:
        """Request: {context, marker_convention, few_shot}; response:
        {arg1_text, arg2_text}."""
        ...


def request_hash(request: dict) -> str:
    canon = json.dumps(request, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def make_request(ctx: ContextWindow, few_shot: bool = True) -> dict:
    return {
        "context": ctx.marked_text,
        "marker_convention": {"open": MARKER_OPEN, "close": MARKER_CLOSE},
        "few_shot": few_shot,
    }


class FixtureSegmenter:
    """Replays recorded responses keyed by request hash (JSONL fixture)."""

    def __init__(self, path: str | Path):
        self.responses: dict[str, dict] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            row = json.loads(line)
            self.responses[row["request_hash"]] = row["response"]

    def segment(self, request: dict) -> dict:
        h = request_hash(request)
        if h not in self.responses:
            raise SegmenterPortError(f"no recorded response for request {h[:12]}")
        return self.responses[h]


class RecordingSegmenter:
    """Wraps another port and records request-hash -> response fixtures."""

    def __init__(self, inner: SegmenterPort, path: str | Path):
        self.inner = inner
        self.path = Path(path)

    def segment(self, request: dict) -> dict:
        response = self.inner.segment(request)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps({"request_hash": request_hash(request),
                                 "response": response}, ensure_ascii=False) + "\n")
        return response


class SubprocessSegmenter:
    """Line-delimited JSON over a child process: one request line in, one
    response line out."""

    def __init__(self, argv: list[str]):
        self.argv = argv
        self._proc: Optional[subprocess.Popen] = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1)
        return self._proc

    def segment(self, request: dict) -> dict:
        proc = self._ensure()
        try:
            proc.stdin.write(json.dumps(request, ensure_ascii=False) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise SegmenterPortError(f"subprocess failed: {exc}") from exc
        if not line:
            raise SegmenterPortError("subprocess closed without response")
        return json.loads(line)

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)


class HttpSegmenter:
    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def segment(self, request: dict) -> dict:
        body = json.dumps(request, ensure_ascii=False).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except Exception as exc:
            raise SegmenterPortError(f"http segmenter failed: {exc}") from exc


def _whitespace_tolerant_find(haystack: str, needle: str) -> Optional[tuple[int, int]]:
    pos = haystack.find(needle)
    if pos >= 0:
        return pos, pos + len(needle)
    norm_chars = []
    index_map = []
    prev_space = True
    for i, c in enumerate(haystack):
        if c.isspace():
            if not prev_space:
                norm_chars.append(" ")
                index_map.append(i)
            prev_space = True
        else:
            norm_chars.append(c)
            index_map.append(i)
            prev_space = False
    norm = "".join(norm_chars).rstrip()
    target = normalize_space(needle)
    if not target:
        return None
    p = norm.find(target)
    if p < 0:
        return None
    return index_map[p], index_map[p + len(target) - 1] + 1


def fallback_spans(ctx: ContextWindow, language: str = "en") -> ArgSpans:
    """Deterministic fallback: Arg2 is the marked sentence from the relation
    position to its end; Arg1 is the immediately preceding clause or sentence."""
    text = ctx.text
    cur_s, cur_e = ctx.current_span
    arg2 = strip_terminal_punct(text, (cur_s, cur_e))
    if ctx.prev:
        prev_span = (0, len(ctx.prev))
        clauses = clause_spans(ctx.prev, language)
        arg1 = clauses[-1] if clauses else prev_span
        arg1 = strip_terminal_punct(text, arg1)
    else:
        raise InstanceDropped("SEG_INVALID: no preceding sentence for fallback Arg1")
    ok, reason = validate_spans(arg1, arg2, text)
    if not ok:
        raise InstanceDropped(f"SEG_INVALID: fallback produced invalid spans ({reason})")
    return ArgSpans(arg1, arg2, SpanSource.FALLBACK)


def segment_arguments(
    ctx: ContextWindow,
    port: Optional[SegmenterPort] = None,
    language: str = "en",
    few_shot: bool = True,
) -> ArgSpans:
    """Obtain Arg1/Arg2 spans from the port, validating the response; on port
    failure or invalid spans, fall back to the clause-based rule."""
    if port is not None:
        try:
            response = port.segment(make_request(ctx, few_shot))
            a1 = _whitespace_tolerant_find(ctx.text, str(response["arg1_text"]))
            a2 = _whitespace_tolerant_find(ctx.text, str(response["arg2_text"]))
            if a1 and a2:
                ok, _reason = validate_spans(a1, a2, ctx.text)
                if ok:
                    return ArgSpans(a1, a2, SpanSource.EXTERNAL)
        except (SegmenterPortError, KeyError, TypeError, json.JSONDecodeError):
            pass
    return fallback_spans(ctx, language)


def segment_many(
    items: list[tuple[str, ContextWindow]],
    port: Optional[SegmenterPort],
    language: str = "en",
    max_in_flight: int = 4,
) -> list[tuple[str, ArgSpans | InstanceDropped]]:
    """Segment (instance_id, ctx) pairs, possibly concurrently; results come
    back ordered by instance_id regardless of completion order."""

    def work(item):
        iid, ctx = item
        try:
            return iid, segment_arguments(ctx, port, language)
        except InstanceDropped as drop:
            return iid, drop

    if port is None or max_in_flight <= 1:
        results = [work(x) for x in items]
    else:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            results = list(pool.map(work, items))
    return sorted(results, key=lambda r: r[0])
