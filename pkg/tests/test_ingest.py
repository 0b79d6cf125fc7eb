import pytest
from hypothesis import given, strategies as st

from idrkit.ingest import (LexiconError, RelationLabel, SubtitleParseError,
                           SubtitleSegment, SubtitleValidationError, Talk,
                           build_talk_registry, load_lexicon, parse_subtitles,
                           serialize_segments_json, serialize_srt)

SRT_BASIC = b"1\n00:00:01,000 --> 00:00:03,500\nHello.\n"


def test_srt_basic_block():
    segs = parse_subtitles(SRT_BASIC, "srt", talk_id="t")
    assert len(segs) == 1
    assert segs[0].index == 0
    assert segs[0].start == 1.0
    assert segs[0].end == 3.5
    assert segs[0].text == "Hello."


def test_empty_file():
    assert parse_subtitles(b"", "srt") == []
    assert parse_subtitles(b"[]", "segments-json") == []


def test_end_before_start_rejected():
    bad = b"1\n00:00:05,000 --> 00:00:04,000\nOops.\n"
    with pytest.raises(SubtitleValidationError):
        parse_subtitles(bad, "srt")


def test_malformed_timestamp_names_line():
    bad = b"1\nnot a timestamp\ntext\n"
    with pytest.raises(SubtitleParseError) as err:
        parse_subtitles(bad, "srt")
    assert err.value.line == 2


def test_multiline_text_joined():
    srt = b"1\n00:00:01,000 --> 00:00:02,000\nline one\nline two\n"
    segs = parse_subtitles(srt, "srt")
    assert segs[0].text == "line one line two"


def test_blank_text_blocks_dropped():
    srt = (b"1\n00:00:01,000 --> 00:00:02,000\n   \n\n"
           b"2\n00:00:03,000 --> 00:00:04,000\nkept\n")
    segs = parse_subtitles(srt, "srt")
    assert [s.text for s in segs] == ["kept"]
    assert segs[0].index == 0


def test_segments_json_strictly_increasing():
    rows = (b'[{"index": 0, "start_ms": 0, "end_ms": 100, "text": "a"},'
            b'{"index": 0, "start_ms": 200, "end_ms": 300, "text": "b"}]')
    with pytest.raises(SubtitleValidationError):
        parse_subtitles(rows, "segments-json")


_text_alpha = st.text(
    alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Nd"),
                           whitelist_characters=" ,.'-"),
    min_size=1, max_size=40).filter(lambda s: s.strip())


@st.composite
def segment_lists(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    segs = []
    t = 0
    for i in range(n):
        start = t + draw(st.integers(0, 500))
        end = start + draw(st.integers(1, 5000))
        t = end
        text = draw(_text_alpha)
        segs.append(SubtitleSegment("t", i, start, end, " ".join(text.split())))
    return segs


@given(segment_lists())
def test_srt_round_trip(segs):
    once = parse_subtitles(serialize_srt(segs), "srt", talk_id="t")
    twice = parse_subtitles(serialize_srt(once), "srt", talk_id="t")
    assert once == twice == segs


@given(segment_lists())
def test_segments_json_round_trip(segs):
    once = parse_subtitles(serialize_segments_json(segs), "segments-json", "t")
    assert once == segs


LEXICON = (b"therefore\tcause-effect\tfalse\n"
           b"and\texpansion-not-a-sense\ttrue\n")


def test_lexicon_basic_rows():
    rows = (b"therefore\tcause-effect\tfalse\n"
            b"and\telaboration\ttrue\n"
            b"por lo tanto\tcause-effect\tfalse\n")
    entries = load_lexicon(rows, "es")
    surfaces = {e.surface for e in entries}
    assert "therefore" in surfaces
    assert "and" not in surfaces  # ambiguous dropped
    assert "por lo tanto" in surfaces  # multiword kept with single spaces
    assert all(e.sense == RelationLabel.CAUSE_EFFECT for e in entries)


def test_lexicon_space_normalization_and_case():
    entries = load_lexicon(b"Por  Lo  Tanto\tcause-effect\tfalse\n", "es")
    assert entries[0].surface == "por lo tanto"


def test_lexicon_unknown_sense_names_row():
    rows = b"therefore\tcause-effect\tfalse\nweird\tnot-a-sense\tfalse\n"
    with pytest.raises(LexiconError) as err:
        load_lexicon(rows, "en")
    assert "row 2" in str(err.value)


@given(st.lists(st.sampled_from(["cause-effect", "contrast", "temporal",
                                 "elaboration"]), min_size=1, max_size=10),
       st.lists(st.booleans(), min_size=1, max_size=10))
def test_lexicon_never_returns_ambiguous(senses, flags):
    rows = "".join(f"w{i}\t{s}\t{str(f).lower()}\n"
                   for i, (s, f) in enumerate(zip(senses, flags)))
    entries = load_lexicon(rows.encode(), "en")
    assert all(not e.ambiguous for e in entries)
    assert all(isinstance(e.sense, RelationLabel) for e in entries)
    assert len(entries) == sum(1 for f in flags[: len(senses)] if not f)


def test_relation_label_exactly_four():
    assert len(RelationLabel) == 4


def test_talk_invariants():
    with pytest.raises(ValueError):
        Talk("t1", "en", {"en", "fr"})
    with pytest.raises(ValueError):
        build_talk_registry([Talk("t1", "en", {"fr"}), Talk("t1", "en", {"de"})])
