import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from idrkit.ingest import ConnectiveEntry, RelationLabel, SubtitleSegment
from idrkit.mining import (CandidatePair, ConnectiveMatcher, FilterRecord,
                           ImplicitInstance, align_segment_pairs,
                           apply_discourse_use_filters,
                           clause_initial_token_indices, dedup,
                           detect_explicitation, map_relation)


def seg(idx, start, end, text, talk="t"):
    return SubtitleSegment(talk, idx, int(start * 1000), int(end * 1000), text)


def entry(surface, sense, lang="fr"):
    return ConnectiveEntry(surface, lang, RelationLabel(sense), False)


FR = ConnectiveMatcher([
    entry("donc", "cause-effect"),
    entry("par consequent", "cause-effect"),
    entry("cependant", "contrast"),
    entry("ensuite", "temporal"),
    entry("quindi", "cause-effect"),
    entry("au meme moment", "temporal"),
])
EN = ConnectiveMatcher([
    entry("so", "cause-effect", "en"),
    entry("so that", "cause-effect", "en"),
    entry("therefore", "cause-effect", "en"),
    entry("however", "contrast", "en"),
])
EMPTY = ConnectiveMatcher([])


class TestAlign:
    def test_identical_timing(self):
        pairs = align_segment_pairs([seg(0, 2, 4, "a")], [seg(0, 2, 4, "b")], "fr")
        assert len(pairs) == 1
        assert pairs[0].duration_ratio == pytest.approx(1.0)

    def test_ratio_outside_bounds_excluded(self):
        excluded = []
        pairs = align_segment_pairs([seg(0, 2, 4, "a")], [seg(0, 2, 10, "b")],
                                    "fr", excluded=excluded)
        assert pairs == []
        assert excluded[0][2] == "DUR_RATIO"

    def test_empty_inputs(self):
        assert align_segment_pairs([], [seg(0, 0, 1, "x")]) == []

    def test_jittered_matches_brute_force(self):
        rng = np.random.Generator(np.random.PCG64(7))
        for _ in range(25):
            src = [seg(i, 5 * i, 5 * i + 4, f"s{i}") for i in range(3)]
            tgt = []
            for i in range(3):
                j = float(rng.uniform(-0.3, 0.3))
                tgt.append(seg(i, max(0.0, 5 * i + j), 5 * i + 4 + j, f"t{i}"))
            overlap = np.zeros((3, 3))
            for i, s in enumerate(src):
                for j, t in enumerate(tgt):
                    overlap[i, j] = max(0.0, min(s.end, t.end) - max(s.start, t.start))
            expected = oracles.brute_force_assignment(overlap)
            pairs = align_segment_pairs(src, tgt, "fr")
            got = {(p.source_segment.index, p.target_segment.index) for p in pairs}
            assert got == expected


class TestDetect:
    def make_pair(self, src_text, tgt_text):
        return CandidatePair(seg(0, 0, 4, src_text), seg(0, 0, 4, tgt_text),
                             "fr", 1.0)

    def test_hit_on_added_connective(self):
        pair = self.make_pair("I was tired. I went home.",
                              "J'etais fatigue. Donc je suis rentre.")
        hit = detect_explicitation(pair, EN, FR)
        assert hit is not None
        assert hit.surface == "donc"

    def test_explicit_source_blocks(self):
        trail = []
        pair = self.make_pair("I was tired, so I went home.",
                              "J'etais fatigue. Donc je suis rentre.")
        assert detect_explicitation(pair, EN, FR, trail) is None
        assert FilterRecord("SRC_EXPLICIT", False,
                            "source already contains 'so'") in trail

    def test_no_surfaces_no_hit(self):
        pair = self.make_pair("I was tired.", "J'etais fatigue.")
        assert detect_explicitation(pair, EN, FR) is None

    def test_other_target_connective_blocks(self):
        pair = self.make_pair("I was tired.",
                              "Donc je suis rentre. Ensuite je dormais.")
        trail = []
        assert detect_explicitation(pair, EN, FR, trail) is None
        assert any(r.name == "TGT_OTHER_CONNECTIVE" and not r.passed
                   for r in trail)

    def test_non_initial_connective_ignored(self):
        pair = self.make_pair("I was tired.", "Je suis donc rentre.")
        assert detect_explicitation(pair, EN, FR) is None

    def test_lexicon_order_irrelevant(self):
        pair = self.make_pair("The hall stayed dark.",
                              "Par consequent la salle restait sombre.")
        entries = [entry("donc", "cause-effect"),
                   entry("par consequent", "cause-effect"),
                   entry("consequent", "elaboration")]
        for perm in ([0, 1, 2], [2, 1, 0], [1, 0, 2], [2, 0, 1]):
            matcher = ConnectiveMatcher([entries[i] for i in perm])
            hit = detect_explicitation(pair, EN, matcher)
            assert hit is not None and hit.surface == "par consequent"

    def test_multiword_longest_match(self):
        matcher = ConnectiveMatcher([entry("so", "cause-effect", "en"),
                                     entry("so that", "contrast", "en")])
        hits = matcher.find_all("so that it works")
        assert hits[0].surface == "so that"


class TestClauseInitial:
    def test_positions(self):
        text = "One thing. Then another, and so it goes"
        toks = [t for t in
                clause_initial_token_indices(text, "en")]
        # token 0, token after '.', token after ', and'
        assert 0 in toks
        assert 2 in toks  # "Then"
        assert 5 in toks  # "so" after comma+conjunction


class TestFilters:
    def hit_for(self, text, matcher=FR):
        hits = matcher.find_all(text)
        assert hits
        return hits[0]

    def test_intensifier_fails(self):
        matcher = ConnectiveMatcher([entry("so", "cause-effect", "en")])
        hit = self.hit_for("So beautiful it hurt.", matcher)
        ok, reason = apply_discourse_use_filters(hit, "So beautiful it hurt.", "en")
        assert not ok and reason == "intensifier"

    def test_clause_initial_before_pronoun_passes(self):
        matcher = ConnectiveMatcher([entry("so", "cause-effect", "en")])
        text = "So I went home."
        hit = self.hit_for(text, matcher)
        trail = []
        ok, _ = apply_discourse_use_filters(hit, text, "en", trail)
        assert ok
        assert all(r.passed for r in trail)

    def test_quoted_connective_fails(self):
        text = 'Elle a dit "donc rien" hier.'
        hit = self.hit_for(text)
        ok, reason = apply_discourse_use_filters(hit, text, "fr")
        assert not ok and reason == "quoted material"

    def test_segment_final_fails(self):
        text = "Il est rentre donc"
        hit = self.hit_for(text)
        ok, reason = apply_discourse_use_filters(hit, text, "fr")
        assert not ok and reason == "segment-final"

    def test_filler_fails(self):
        text = "Donc, je suis rentre."
        hit = self.hit_for(text)
        ok, reason = apply_discourse_use_filters(hit, text, "fr")
        assert not ok and reason == "filler"


class TestMapRelation:
    def test_basic_senses(self):
        assert map_relation("donc", FR) == RelationLabel.CAUSE_EFFECT
        assert map_relation("quindi", FR) == RelationLabel.CAUSE_EFFECT

    def test_non_sequential_temporal_maps_to_temporal(self):
        assert map_relation("au meme moment", FR) == RelationLabel.TEMPORAL

    def test_missing_connective(self):
        with pytest.raises(LookupError):
            map_relation("inconnu", FR)


def make_instance(talk, seg_idx, label, witness, connective="c"):
    from idrkit.mining import make_instance_id
    lab = RelationLabel(label)
    return ImplicitInstance(
        instance_id=make_instance_id(talk, seg_idx, lab, witness),
        talk_id=talk, source_language="en", explicit_connective=connective,
        witness_language=witness, label=lab,
        context_segment_indices=(seg_idx - 1, seg_idx, seg_idx + 1),
        filter_trail=[FilterRecord("DUR_RATIO", True, "ok")])


class TestDedup:
    def test_same_label_two_witnesses(self):
        insts = [make_instance("t", 3, "cause-effect", "fr"),
                 make_instance("t", 3, "cause-effect", "de")]
        kept = dedup(insts)
        assert len(kept) == 1
        assert kept[0].witness_language == "de"

    def test_label_disagreement_kept_and_flagged(self):
        insts = [make_instance("t", 3, "cause-effect", "fr"),
                 make_instance("t", 3, "contrast", "ar")]
        kept = dedup(insts)
        assert len(kept) == 2
        assert all(any(r.name == "LABEL_DISAGREEMENT" and r.passed
                       for r in i.filter_trail) for i in kept)

    def test_empty(self):
        assert dedup([]) == []

    @given(st.lists(st.tuples(
        st.sampled_from(["t1", "t2"]), st.integers(0, 3),
        st.sampled_from(["cause-effect", "contrast"]),
        st.sampled_from(["ar", "de", "fr"])), max_size=12))
    def test_idempotent(self, rows):
        seen = set()
        insts = []
        for talk, s, lab, wit in rows:
            key = (talk, s, lab, wit)
            if key in seen:
                continue
            seen.add(key)
            insts.append(make_instance(talk, s, lab, wit))
        once = dedup(insts)
        assert dedup(once) == once


@pytest.fixture(scope="module")
def mined(tmp_path_factory):
    import json
    from idrkit.ingest import load_lexicon, parse_subtitles
    from idrkit.mining import mine_talk
    from idrkit.synthcorpus import build_corpus
    root = tmp_path_factory.mktemp("corpus")
    summary = build_corpus(root, with_audio=False)
    talks = json.loads((root / "talks.json").read_text())
    matchers = {lang: ConnectiveMatcher(load_lexicon(
        (root / "lexicons" / f"{lang}.tsv").read_bytes(), lang))
        for lang in ("en", "fr", "de")}
    instances, report = [], []
    for talk in talks:
        src = parse_subtitles((root / talk["subtitles"]["en"]["path"]).read_bytes(),
                              "srt", talk["talk_id"])
        tgt = {lang: parse_subtitles(
            (root / talk["subtitles"][lang]["path"]).read_bytes(),
            "segments-json", talk["talk_id"]) for lang in ("fr", "de")}
        inst, rep = mine_talk(talk["talk_id"], "en", src, tgt,
                              matchers["en"],
                              {t: matchers[t] for t in ("fr", "de")})
        instances.extend(inst)
        report.extend(rep)
    return summary, instances, report


class TestPlantedCorpus:
    def test_exactly_planted_events(self, mined):
        summary, instances, _ = mined
        expected = {(e["talk_id"], e["seg_index"], e["label"], e["witness"])
                    for e in summary["events"]}
        got = {(i.talk_id, i.source_segment_index, i.label.value,
                i.witness_language) for i in instances}
        assert got == expected
        assert len(instances) == 12

    def test_all_emitted_trails_pass(self, mined):
        _, instances, _ = mined
        for inst in instances:
            assert all(r.passed for r in inst.filter_trail)

    def test_distractors_dropped_with_reasons(self, mined):
        summary, _, report = mined
        reasons = {}
        for row in report:
            if not row["emitted"]:
                reasons.setdefault(row["drop_reason"], 0)
                reasons[row["drop_reason"]] += 1
        assert reasons["DUR_RATIO"] == 2
        assert reasons["SRC_EXPLICIT"] == 2
        assert reasons["NON_DISCOURSE_INTENSIFIER"] == 2
        assert reasons["DUP"] == 2
