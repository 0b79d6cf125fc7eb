import json
import sys

import pytest

from idrkit.ingest import SubtitleSegment
from idrkit.segmentation import (ContextWindow, FixtureSegmenter,
                                 InstanceDropped, RecordingSegmenter,
                                 SpanSource, SubprocessSegmenter,
                                 build_context, fallback_spans, make_request,
                                 request_hash, segment_arguments, segment_many,
                                 validate_spans)


def seg(idx, text, talk="t"):
    return SubtitleSegment(talk, idx, idx * 4000, idx * 4000 + 3500, text)


SEGS = [seg(0, "The hall was empty."),
        seg(1, "I was tired. I went home."),
        seg(2, "Morning came fast.")]


class TestBuildContext:
    def test_middle_hit_all_populated(self):
        ctx = build_context(SEGS, 1)
        assert ctx.prev == "The hall was empty."
        assert ctx.current == "I was tired."
        assert ctx.next == "I went home."

    def test_first_segment_no_prev(self):
        ctx = build_context(SEGS, 0)
        assert ctx.prev == ""
        assert ctx.current == "The hall was empty."

    def test_last_segment_no_next(self):
        ctx = build_context(SEGS, 2)
        assert ctx.next == ""
        assert ctx.current == "Morning came fast."

    def test_marked_text_single_region(self):
        ctx = build_context(SEGS, 1)
        assert ctx.marked_text.count("[[REL]]") == 1
        assert ctx.marked_text.count("[[/REL]]") == 1

    def test_marker_removal_recovers_context(self):
        for i in range(3):
            ctx = build_context(SEGS, i)
            stripped = ctx.marked_text.replace("[[REL]] ", "").replace(
                " [[/REL]]", "")
            assert " ".join(stripped.split()) == " ".join(ctx.text.split())

    def test_current_never_empty(self):
        with pytest.raises(ValueError):
            ContextWindow("a", "   ", "b", ("t", (0, 1, 2)))


class TestValidateSpans:
    CTX = "I was tired. I went home."

    def test_valid(self):
        ok, reason = validate_spans((0, 11), (13, 25), self.CTX)
        assert ok and reason == "ok"

    def test_equal_spans_overlap(self):
        ok, reason = validate_spans((0, 11), (0, 11), self.CTX)
        assert not ok and reason == "overlap"

    def test_wrong_order(self):
        ok, reason = validate_spans((13, 25), (0, 11), self.CTX)
        assert not ok and reason == "order"

    def test_empty_span(self):
        ok, reason = validate_spans((3, 3), (13, 25), self.CTX)
        assert not ok and "empty" in reason

    def test_out_of_bounds(self):
        ok, reason = validate_spans((0, 11), (13, 99), self.CTX)
        assert not ok and "bounds" in reason


class TestFallback:
    def test_two_sentence_rule_trace(self):
        # hand trace: arg2 = marked sentence minus final period,
        # arg1 = preceding sentence minus final period
        ctx = ContextWindow("I was tired.", "I went home.", "",
                            ("t", (0, 1, -1)))
        spans = fallback_spans(ctx, "en")
        text = ctx.text
        assert text[spans.arg1[0]:spans.arg1[1]] == "I was tired"
        assert text[spans.arg2[0]:spans.arg2[1]] == "I went home"
        assert spans.source == SpanSource.FALLBACK

    def test_prev_clause_used(self):
        ctx = ContextWindow("It rained hard, the road was dark.",
                            "I went home.", "", ("t", (0, 1, -1)))
        spans = fallback_spans(ctx, "en")
        assert ctx.text[spans.arg1[0]:spans.arg1[1]] == "the road was dark"

    def test_no_prev_drops(self):
        ctx = ContextWindow("", "I went home.", "Later on.", ("t", (-1, 0, 1)))
        with pytest.raises(InstanceDropped):
            fallback_spans(ctx, "en")

    def test_deterministic(self):
        ctx = ContextWindow("I was tired.", "I went home.", "",
                            ("t", (0, 1, -1)))
        assert fallback_spans(ctx, "en") == fallback_spans(ctx, "en")


class RiggedPort:
    def __init__(self, response):
        self.response = response
        self.calls = 0

    def segment(self, request):
        self.calls += 1
        return self.response


class TestSegmentArguments:
    CTX = ContextWindow("I was tired.", "I went home.", "", ("t", (0, 1, -1)))

    def test_external_valid_response(self):
        port = RiggedPort({"arg1_text": "I was tired", "arg2_text": "I went home"})
        spans = segment_arguments(self.CTX, port)
        assert spans.source == SpanSource.EXTERNAL
        assert self.CTX.text[spans.arg1[0]:spans.arg1[1]] == "I was tired"

    def test_external_whitespace_tolerant(self):
        port = RiggedPort({"arg1_text": "I  was   tired",
                           "arg2_text": "I went home"})
        spans = segment_arguments(self.CTX, port)
        assert spans.source == SpanSource.EXTERNAL

    def test_external_not_substring_falls_back(self):
        port = RiggedPort({"arg1_text": "completely unrelated",
                           "arg2_text": "also unrelated"})
        spans = segment_arguments(self.CTX, port)
        assert spans.source == SpanSource.FALLBACK

    def test_external_overlapping_falls_back(self):
        port = RiggedPort({"arg1_text": "I went home",
                           "arg2_text": "went home"})
        spans = segment_arguments(self.CTX, port)
        assert spans.source == SpanSource.FALLBACK

    def test_no_port_uses_fallback(self):
        spans = segment_arguments(self.CTX, None)
        assert spans.source == SpanSource.FALLBACK


class TestPorts:
    def test_fixture_round_trip(self, tmp_path):
        ctx = ContextWindow("I was tired.", "I went home.", "",
                            ("t", (0, 1, -1)))
        request = make_request(ctx)
        fixture = tmp_path / "fixture.jsonl"
        inner = RiggedPort({"arg1_text": "I was tired",
                            "arg2_text": "I went home"})
        recorder = RecordingSegmenter(inner, fixture)
        first = recorder.segment(request)
        replay = FixtureSegmenter(fixture)
        assert replay.segment(request) == first
        assert inner.calls == 1

    def test_request_hash_stable(self):
        ctx = ContextWindow("a.", "b c.", "", ("t", (0, 1, -1)))
        r = make_request(ctx)
        assert request_hash(r) == request_hash(json.loads(json.dumps(r)))

    def test_subprocess_port(self):
        script = ("import sys, json\n"
                  "for line in sys.stdin:\n"
                  "    req = json.loads(line)\n"
                  "    ctx = req['context']\n"
                  "    print(json.dumps({'arg1_text': 'I was tired',"
                  " 'arg2_text': 'I went home'}))\n"
                  "    sys.stdout.flush()\n")
        port = SubprocessSegmenter([sys.executable, "-c", script])
        ctx = ContextWindow("I was tired.", "I went home.", "",
                            ("t", (0, 1, -1)))
        spans = segment_arguments(ctx, port)
        assert spans.source == SpanSource.EXTERNAL
        port.close()

    def test_segment_many_ordering(self):
        ctxs = [(f"id{i:02d}", ContextWindow("Prev one.", f"Current {i}.",
                                             "", ("t", (0, 1, -1))))
                for i in reversed(range(5))]
        results = segment_many(ctxs, None)
        assert [iid for iid, _ in results] == sorted(i for i, _ in ctxs)
