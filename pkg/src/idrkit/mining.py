"""Explicitation mining: pair source/target subtitle segments, detect added
connectives in translations, screen out non-discourse uses, and deduplicate
across witness languages.

Every candidate carries a filter trail recording each screen that was applied
and its outcome, so the mining report is auditable end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .ingest import ConnectiveEntry, RelationLabel, SubtitleSegment
from .text import COORDINATING_CONJUNCTIONS, Token, quoted_spans, tokenize

# Duration-consistency defaults: target/source duration ratio bounds and the
# minimum time overlap as a fraction of the shorter segment.
RATIO_BOUNDS = (0.5, 2.0)
MIN_OVERLAP_FRAC = 0.5

# Surfaces prone to intensifier readings, per language.
INTENSIFIER_SURFACES = frozenset({"so", "si", "tan"})

# Tokens that may legitimately follow a clause-initial connective; anything
# else after an intensifier-prone surface is treated as an adjective/adverb.
FUNCTION_WORDS: dict[str, frozenset[str]] = {
    "en": frozenset(
        "i you he she it we they the a an this that these those there here "
        "my your his her its our their one everyone someone nobody "
        "am is are was were do does did can could will would should not".split()),
    "fr": frozenset(
        "je tu il elle on nous vous ils elles le la les un une des ce cette "
        "ces mon ma mes ton ta tes son sa ses notre votre leur c'est il y".split()),
    "es": frozenset(
        "yo tu usted el ella ellos ellas nosotros vosotros la los las un una "
        "unos unas este esta estos estas ese esa eso mi tu su nuestro se hay".split()),
    "de": frozenset(
        "ich du er sie es wir ihr der die das ein eine dieser diese dieses "
        "mein dein sein unser euer man".split()),
}

_PUNCT_AFTER = ",.;:!?…"
_CLAUSE_PUNCT = ".!?…;:"


class FilterRecord(NamedTuple):
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class CandidatePair:
    source_segment: SubtitleSegment
    target_segment: SubtitleSegment
    target_language: str
    duration_ratio: float
    overlap: float = 0.0

    def __post_init__(self):
        if self.duration_ratio <= 0:
            raise ValueError("duration_ratio must be positive")


@dataclass(frozen=True)
class ExplicitationHit:
    surface: str
    char_start: int
    char_end: int
    token_index: int
    n_tokens: int


@dataclass
class ImplicitInstance:
    instance_id: str
    talk_id: str
    source_language: str
    explicit_connective: str
    witness_language: str
    label: RelationLabel
    context_segment_indices: tuple[int, int, int]
    filter_trail: list[FilterRecord] = field(default_factory=list)

    @property
    def source_segment_index(self) -> int:
        return self.context_segment_indices[1]

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "talk_id": self.talk_id,
            "source_language": self.source_language,
            "explicit_connective": self.explicit_connective,
            "witness_language": self.witness_language,
            "label": self.label.value,
            "context_segment_indices": list(self.context_segment_indices),
            "filter_trail": [list(r) for r in self.filter_trail],
        }

    @classmethod
    def from_json(cls, row: dict) -> "ImplicitInstance":
        return cls(
            instance_id=row["instance_id"],
            talk_id=row["talk_id"],
            source_language=row["source_language"],
            explicit_connective=row["explicit_connective"],
            witness_language=row["witness_language"],
            label=RelationLabel(row["label"]),
            context_segment_indices=tuple(row["context_segment_indices"]),
            filter_trail=[FilterRecord(*r) for r in row["filter_trail"]],
        )


def _overlap_seconds(a: SubtitleSegment, b: SubtitleSegment) -> float:
    return max(0, min(a.end_ms, b.end_ms) - max(a.start_ms, b.start_ms)) / 1000.0


def align_segment_pairs(
    source: list[SubtitleSegment],
    target: list[SubtitleSegment],
    target_language: str = "",
    tolerance: tuple[float, float] = RATIO_BOUNDS,
    min_overlap_frac: float = MIN_OVERLAP_FRAC,
    excluded: Optional[list] = None,
) -> list[CandidatePair]:
    """Match segments by maximal time overlap (one-to-one assignment), then
    drop pairs violating duration-ratio tolerance or minimum overlap.

    `excluded`, when given, collects (source_index, target_index, reason)
    records for the dropped pairs.
    """
    if not source or not target:
        return []
    overlap = np.zeros((len(source), len(target)))
    for i, s in enumerate(source):
        for j, t in enumerate(target):
            overlap[i, j] = _overlap_seconds(s, t)
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    pairs: list[CandidatePair] = []
    lo, hi = tolerance
    for i, j in zip(rows, cols):
        s, t = source[i], target[j]
        ov = overlap[i, j]
        if ov <= 0:
            continue
        ratio = t.duration / s.duration
        if not (lo <= ratio <= hi):
            if excluded is not None:
                excluded.append((s.index, t.index, "DUR_RATIO",
                                 f"ratio {ratio:.3f} outside [{lo}, {hi}]"))
            continue
        if ov < min_overlap_frac * min(s.duration, t.duration):
            if excluded is not None:
                excluded.append((s.index, t.index, "OVERLAP_LOW",
                                 f"overlap {ov:.3f}s below {min_overlap_frac:.0%} of shorter"))
            continue
        pairs.append(CandidatePair(s, t, target_language, ratio, ov))
    pairs.sort(key=lambda p: p.source_segment.index)
    return pairs


class ConnectiveMatcher:
    """Word-boundary connective matching, case-insensitive, longest match
    first for multiword surfaces."""

    def __init__(self, entries: list[ConnectiveEntry]):
        self.by_surface = {e.surface: e for e in entries}
        self._by_first: dict[str, list[tuple[tuple[str, ...], ConnectiveEntry]]] = {}
        for e in entries:
            toks = tuple(e.surface.split())
            self._by_first.setdefault(toks[0], []).append((toks, e))
        for lst in self._by_first.values():
            lst.sort(key=lambda te: (-len(te[0]), te[0]))

    def match_at(self, tokens: list[Token], k: int) -> Optional[tuple[ConnectiveEntry, int]]:
        """Longest lexicon match starting at token k; returns (entry, n_tokens)."""
        cands = self._by_first.get(tokens[k].text.lower())
        if not cands:
            return None
        for surface_toks, entry in cands:
            if k + len(surface_toks) > len(tokens):
                continue
            window = tuple(t.text.lower() for t in tokens[k : k + len(surface_toks)])
            if window == surface_toks:
                return entry, len(surface_toks)
        return None

    def find_all(self, text: str) -> list[ExplicitationHit]:
        tokens = tokenize(text)
        hits = []
        k = 0
        while k < len(tokens):
            m = self.match_at(tokens, k)
            if m:
                entry, n = m
                hits.append(ExplicitationHit(
                    entry.surface, tokens[k].start, tokens[k + n - 1].end, k, n))
                k += n
            else:
                k += 1
        return hits

    def label_of(self, surface: str) -> RelationLabel:
        try:
            return self.by_surface[surface].sense
        except KeyError:
            raise LookupError(f"connective {surface!r} not in lexicon") from None


def clause_initial_token_indices(text: str, language: str) -> list[int]:
    """Token indices at clause-initial positions: segment start, after
    sentence-final punctuation, or after a comma+conjunction boundary."""
    tokens = tokenize(text)
    if not tokens:
        return []
    conj = COORDINATING_CONJUNCTIONS.get(language, frozenset())
    out = [0]
    for k in range(1, len(tokens)):
        gap = text[tokens[k - 1].end : tokens[k].start]
        if any(c in _CLAUSE_PUNCT for c in gap):
            out.append(k)
            continue
        if tokens[k - 1].text.lower() in conj and k >= 2:
            gap_before_conj = text[tokens[k - 2].end : tokens[k - 1].start]
            if "," in gap_before_conj:
                out.append(k)
    return out


def detect_explicitation(
    pair: CandidatePair,
    src_matcher: ConnectiveMatcher,
    tgt_matcher: ConnectiveMatcher,
    trail: Optional[list[FilterRecord]] = None,
) -> Optional[ExplicitationHit]:
    """Find an added connective: clause-initial in the target while the source
    contains no connective anywhere and the target contains no other
    connective (which would signal an explicit-to-explicit translation)."""

    def record(name, passed, detail):
        if trail is not None:
            trail.append(FilterRecord(name, passed, detail))

    tgt_text = pair.target_segment.text
    tokens = tokenize(tgt_text)
    hit = None
    for k in clause_initial_token_indices(tgt_text, pair.target_language):
        m = tgt_matcher.match_at(tokens, k)
        if m:
            entry, n = m
            hit = ExplicitationHit(entry.surface, tokens[k].start,
                                   tokens[k + n - 1].end, k, n)
            break
    if hit is None:
        record("TGT_CONNECTIVE", False, "no clause-initial target connective")
        return None
    record("TGT_CONNECTIVE", True, f"{hit.surface!r} at char {hit.char_start}")

    src_hits = src_matcher.find_all(pair.source_segment.text)
    if src_hits:
        record("SRC_EXPLICIT", False,
               f"source already contains {src_hits[0].surface!r}")
        return None
    record("SRC_EXPLICIT", True, "no source connective")

    others = [h for h in tgt_matcher.find_all(tgt_text)
              if not (h.token_index == hit.token_index and h.n_tokens == hit.n_tokens)]
    if others:
        record("TGT_OTHER_CONNECTIVE", False,
               f"additional target connective {others[0].surface!r}")
        return None
    record("TGT_OTHER_CONNECTIVE", True, "single target connective")
    return hit


def apply_discourse_use_filters(
    hit: ExplicitationHit,
    text: str,
    language: str,
    trail: Optional[list[FilterRecord]] = None,
) -> tuple[bool, str]:
    """Screen a hit against the non-discourse heuristics; returns
    (passed, reason). Each rule is recorded in the trail either way."""
    records: list[FilterRecord] = []
    tokens = tokenize(text)

    next_tok = tokens[hit.token_index + hit.n_tokens] \
        if hit.token_index + hit.n_tokens < len(tokens) else None
    intensifier = (
        hit.surface in INTENSIFIER_SURFACES
        and next_tok is not None
        and next_tok.text.lower() not in FUNCTION_WORDS.get(language, frozenset())
        # adjacent word, not across a punctuation boundary
        and not any(c in _PUNCT_AFTER for c in text[hit.char_end : next_tok.start])
    )
    records.append(FilterRecord(
        "NON_DISCOURSE_INTENSIFIER", not intensifier,
        f"followed by {next_tok.text!r}" if intensifier else "ok"))

    quoted = any(s <= hit.char_start and hit.char_end <= e
                 for s, e in quoted_spans(text))
    records.append(FilterRecord(
        "NON_DISCOURSE_QUOTED", not quoted,
        "inside quotation marks" if quoted else "ok"))

    is_final = hit.token_index + hit.n_tokens == len(tokens)
    records.append(FilterRecord(
        "NON_DISCOURSE_FINAL", not is_final,
        "segment-final token" if is_final else "ok"))

    after = text[hit.char_end : hit.char_end + 1]
    filler = after != "" and after in _PUNCT_AFTER
    records.append(FilterRecord(
        "NON_DISCOURSE_FILLER", not filler,
        f"followed by punctuation {after!r}" if filler else "ok"))

    if trail is not None:
        trail.extend(records)
    for rec in records:
        if not rec.passed:
            reason = {"NON_DISCOURSE_INTENSIFIER": "intensifier",
                      "NON_DISCOURSE_QUOTED": "quoted material",
                      "NON_DISCOURSE_FINAL": "segment-final",
                      "NON_DISCOURSE_FILLER": "filler"}[rec.name]
            return False, reason
    return True, "pass"


def map_relation(connective: str, tgt_matcher: ConnectiveMatcher) -> RelationLabel:
    return tgt_matcher.label_of(connective)


def _dedup_key(inst: ImplicitInstance) -> tuple:
    return (inst.talk_id, inst.source_segment_index, inst.label.value)


def dedup(
    instances: list[ImplicitInstance],
    dropped: Optional[list[ImplicitInstance]] = None,
) -> list[ImplicitInstance]:
    """One instance per (talk, source segment, label); the retained witness is
    the lexicographically first witness language. Deterministic output order.

    Witness-label disagreement on the same segment is kept as separate
    instances and flagged in the trail for QC review.
    """
    groups: dict[tuple, list[ImplicitInstance]] = {}
    for inst in instances:
        groups.setdefault(_dedup_key(inst), []).append(inst)

    labels_per_segment: dict[tuple, set[str]] = {}
    for (talk, seg, label), _ in groups.items():
        labels_per_segment.setdefault((talk, seg), set()).add(label)

    kept: list[ImplicitInstance] = []
    for key in sorted(groups):
        group = sorted(groups[key],
                       key=lambda i: (i.witness_language, i.explicit_connective,
                                      i.instance_id))
        winner = group[0]
        trail = list(winner.filter_trail)
        seg_labels = labels_per_segment[(winner.talk_id, winner.source_segment_index)]
        if len(seg_labels) > 1:
            flag = FilterRecord("LABEL_DISAGREEMENT", True,
                                "witness labels: " + ",".join(sorted(seg_labels)))
            if flag not in trail:
                trail.append(flag)
        kept.append(replace(winner, filter_trail=trail))
        if dropped is not None:
            dropped.extend(group[1:])
    return kept


def make_instance_id(talk_id: str, seg_index: int, label: RelationLabel,
                     witness: str) -> str:
    return f"{talk_id}:s{seg_index:04d}:{label.value}:{witness}"


def mine_talk(
    talk_id: str,
    source_language: str,
    source_segments: list[SubtitleSegment],
    targets: dict[str, list[SubtitleSegment]],
    src_matcher: ConnectiveMatcher,
    tgt_matchers: dict[str, ConnectiveMatcher],
    tolerance: tuple[float, float] = RATIO_BOUNDS,
) -> tuple[list[ImplicitInstance], list[dict]]:
    """Mine one talk against all its target languages.

    Returns deduplicated instances plus one report record per candidate
    (passing or not) with the full filter trail.
    """
    report: list[dict] = []
    raw: list[ImplicitInstance] = []
    for tgt_lang in sorted(targets):
        tgt_matcher = tgt_matchers[tgt_lang]
        excluded: list = []
        pairs = align_segment_pairs(source_segments, targets[tgt_lang],
                                    tgt_lang, tolerance, excluded=excluded)
        for src_idx, tgt_idx, code, detail in excluded:
            report.append({
                "talk_id": talk_id, "witness_language": tgt_lang,
                "source_index": src_idx, "target_index": tgt_idx,
                "emitted": False, "drop_reason": code,
                "filter_trail": [[code, False, detail]],
            })
        for pair in pairs:
            trail: list[FilterRecord] = [
                FilterRecord("DUR_RATIO", True,
                             f"ratio {pair.duration_ratio:.3f}")]
            hit = detect_explicitation(pair, src_matcher, tgt_matcher, trail)
            emitted = False
            drop_reason = None
            if hit is None:
                drop_reason = trail[-1].name if not trail[-1].passed else None
                if drop_reason == "TGT_CONNECTIVE":
                    # no connective at all: not a candidate worth reporting
                    continue
            else:
                ok, reason = apply_discourse_use_filters(
                    hit, pair.target_segment.text, tgt_lang, trail)
                if ok:
                    label = map_relation(hit.surface, tgt_matcher)
                    seg = pair.source_segment.index
                    ctx = (seg - 1 if seg > 0 else -1, seg,
                           seg + 1 if seg + 1 < len(source_segments) else -1)
                    raw.append(ImplicitInstance(
                        instance_id=make_instance_id(talk_id, seg, label, tgt_lang),
                        talk_id=talk_id,
                        source_language=source_language,
                        explicit_connective=hit.surface,
                        witness_language=tgt_lang,
                        label=label,
                        context_segment_indices=ctx,
                        filter_trail=trail,
                    ))
                    emitted = True
                else:
                    drop_reason = next(r.name for r in trail if not r.passed)
            report.append({
                "talk_id": talk_id, "witness_language": tgt_lang,
                "source_index": pair.source_segment.index,
                "target_index": pair.target_segment.index,
                "emitted": emitted, "drop_reason": drop_reason,
                "filter_trail": [list(r) for r in trail],
            })

    dup_dropped: list[ImplicitInstance] = []
    instances = dedup(raw, dropped=dup_dropped)
    for inst in dup_dropped:
        report.append({
            "talk_id": talk_id, "witness_language": inst.witness_language,
            "source_index": inst.source_segment_index, "target_index": None,
            "emitted": False, "drop_reason": "DUP",
            "filter_trail": [list(r) for r in inst.filter_trail]
            + [["DUP", False, f"duplicate of {_dedup_key(inst)}"]],
        })
    return instances, report
