"""Planted synthetic corpus: 3 talks, EN source with FR and DE translations,
12 explicitation events and 8 distractors (explicit sources, intensifier
uses, duration-ratio violations, cross-witness duplicates).

Every planted fact is returned in the build summary, so tests can assert the
miner's output against ground truth by construction. Audio is synthesized
(one tone per word) with exactly known word timestamps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, write_wav
from .ingest import SubtitleSegment, serialize_segments_json, serialize_srt

SAMPLE_RATE = 16_000
SEG_SECONDS = 4.0
SEG_PERIOD = 5.0
N_SEGMENTS = 10

_EN_NOUNS = ["garden", "river", "window", "market", "bridge",
             "lantern", "orchard", "harbor", "meadow", "tower"]
_EN_VERBS = ["rested", "glowed", "waited", "drifted", "settled"]
_FR_NOUNS = ["jardin", "riviere", "fenetre", "marche", "pont",
             "lanterne", "verger", "port", "prairie", "tour"]
_FR_VERBS = ["reposait", "brillait", "attendait", "derivait", "restait"]
_DE_NOUNS = ["Garten", "Fluss", "Fenster", "Markt", "Pfad",
             "Laterne", "Hof", "Hafen", "Wiese", "Turm"]
_DE_VERBS = ["ruhte", "glanzte", "wartete", "trieb", "blieb"]

LEXICONS = {
    "en": [("therefore", "cause-effect", "false"),
           ("so", "cause-effect", "false"),
           ("however", "contrast", "false"),
           ("then", "temporal", "false"),
           ("moreover", "elaboration", "false"),
           ("and", "elaboration", "true")],
    "fr": [("donc", "cause-effect", "false"),
           ("par consequent", "cause-effect", "false"),
           ("cependant", "contrast", "false"),
           ("ensuite", "temporal", "false"),
           ("d'ailleurs", "elaboration", "false"),
           ("si", "contrast", "false"),
           ("et", "elaboration", "true")],
    "de": [("deshalb", "cause-effect", "false"),
           ("jedoch", "contrast", "false"),
           ("dann", "temporal", "false"),
           ("ausserdem", "elaboration", "false"),
           ("und", "elaboration", "true")],
}

_EVENT_TEXT = {
    ("fr", "cause-effect"): "Donc la foule attendait encore.",
    ("fr", "cause-effect-multi"): "Par consequent le marche restait vide.",
    ("fr", "contrast"): "Cependant la salle restait calme.",
    ("fr", "temporal"): "Ensuite la lanterne brillait seule.",
    ("fr", "elaboration"): "D'ailleurs le pont restait ouvert.",
    ("de", "cause-effect"): "Deshalb blieb der Hafen leer.",
    ("de", "contrast"): "Jedoch blieb der Saal ruhig.",
    ("de", "temporal"): "Dann wartete die Wiese still.",
    ("de", "elaboration"): "Ausserdem blieb der Turm dunkel.",
}

_EVENT_CONNECTIVE = {
    ("fr", "cause-effect"): "donc",
    ("fr", "cause-effect-multi"): "par consequent",
    ("fr", "contrast"): "cependant",
    ("fr", "temporal"): "ensuite",
    ("fr", "elaboration"): "d'ailleurs",
    ("de", "cause-effect"): "deshalb",
    ("de", "contrast"): "jedoch",
    ("de", "temporal"): "dann",
    ("de", "elaboration"): "ausserdem",
}


@dataclass(frozen=True)
class PlantedEvent:
    talk_id: str
    seg_index: int
    label: str
    witness: str
    connective: str


@dataclass(frozen=True)
class PlantedDistractor:
    talk_id: str
    seg_index: int
    kind: str  # src_explicit | intensifier | dur_ratio | duplicate
    language: str


# per talk: seg_index -> plan entry
# ("event", lang, label_key) | ("dup", label_key) | ("src_explicit", lang)
# | ("intensifier", lang) | ("dur_ratio", lang)
_PLANS = {
    "talk01": {
        1: ("event", "fr", "cause-effect"),
        3: ("event", "de", "contrast"),
        5: ("dup", "temporal"),
        7: ("src_explicit", "fr"),
        8: ("event", "fr", "elaboration"),
    },
    "talk02": {
        1: ("event", "fr", "cause-effect-multi"),
        2: ("event", "de", "temporal"),
        4: ("event", "de", "elaboration"),
        5: ("intensifier", "fr"),
        6: ("dup", "contrast"),
        8: ("dur_ratio", "fr"),
    },
    "talk03": {
        1: ("event", "fr", "contrast"),
        2: ("dur_ratio", "de"),
        3: ("event", "de", "cause-effect"),
        5: ("event", "fr", "temporal"),
        6: ("src_explicit", "de"),
        7: ("event", "fr", "elaboration"),
        8: ("intensifier", "fr"),
    },
}

_SRC_EXPLICIT_EN = "Therefore the gates stayed closed."
_SRC_EXPLICIT_TGT = {"fr": "Donc les portes restaient closes.",
                     "de": "Deshalb blieben die Tore geschlossen."}
_INTENSIFIER_TGT = {"fr": "Si belle etait la salle ce soir."}
_DUR_RATIO_TGT = {"fr": "Donc le chemin paraissait long.",
                  "de": "Deshalb wirkte der Weg lang."}


def _filler(lang: str, talk_seed: int, seg: int) -> str:
    nouns, verbs = {"en": (_EN_NOUNS, _EN_VERBS), "fr": (_FR_NOUNS, _FR_VERBS),
                    "de": (_DE_NOUNS, _DE_VERBS)}[lang]
    n1 = nouns[(talk_seed + seg) % len(nouns)]
    n2 = nouns[(talk_seed + seg + 3) % len(nouns)]
    v = verbs[(talk_seed + 2 * seg) % len(verbs)]
    if lang == "en":
        return f"The {n1} {v} near the {n2}."
    if lang == "fr":
        return f"Le {n1} {v} pres du {n2}."
    return f"Der {n1} {v} neben dem {n2}."


def _label_of(label_key: str) -> str:
    return "cause-effect" if label_key.startswith("cause-effect") else label_key


def build_plan() -> tuple[list[PlantedEvent], list[PlantedDistractor]]:
    events: list[PlantedEvent] = []
    distractors: list[PlantedDistractor] = []
    for talk_id, plan in _PLANS.items():
        for seg, entry in plan.items():
            kind = entry[0]
            if kind == "event":
                _, lang, label_key = entry
                events.append(PlantedEvent(
                    talk_id, seg, _label_of(label_key), lang,
                    _EVENT_CONNECTIVE[(lang, label_key)]))
            elif kind == "dup":
                # both languages explicitate; lexicographically first witness
                # (de) survives, the fr copy is the planted distractor
                _, label_key = entry
                events.append(PlantedEvent(
                    talk_id, seg, _label_of(label_key), "de",
                    _EVENT_CONNECTIVE[("de", label_key)]))
                distractors.append(PlantedDistractor(talk_id, seg, "duplicate", "fr"))
            elif kind == "src_explicit":
                distractors.append(PlantedDistractor(talk_id, seg,
                                                     "src_explicit", entry[1]))
            elif kind == "intensifier":
                distractors.append(PlantedDistractor(talk_id, seg,
                                                     "intensifier", entry[1]))
            elif kind == "dur_ratio":
                distractors.append(PlantedDistractor(talk_id, seg,
                                                     "dur_ratio", entry[1]))
    return events, distractors


def _talk_segments(talk_id: str, talk_seed: int) -> dict[str, list[SubtitleSegment]]:
    """Source (en) plus fr/de target segment lists for one talk."""
    plan = _PLANS[talk_id]
    rng = np.random.Generator(np.random.PCG64(1000 + talk_seed))
    out: dict[str, list[SubtitleSegment]] = {"en": [], "fr": [], "de": []}
    for seg in range(N_SEGMENTS):
        start = seg * SEG_PERIOD
        src_dur = SEG_SECONDS
        entry = plan.get(seg)
        if entry and entry[0] == "dur_ratio":
            src_dur = 2.0
        en_text = _filler("en", talk_seed, seg)
        if entry and entry[0] == "src_explicit":
            en_text = _SRC_EXPLICIT_EN
        out["en"].append(SubtitleSegment(
            talk_id, seg, int(start * 1000), int((start + src_dur) * 1000), en_text))
        for lang in ("fr", "de"):
            text = _filler(lang, talk_seed, seg)
            t0, t1 = start, start + src_dur
            if entry:
                kind = entry[0]
                if kind == "event" and entry[1] == lang:
                    text = _EVENT_TEXT[(lang, entry[2])]
                elif kind == "dup":
                    text = _EVENT_TEXT[(lang, entry[1])]
                elif kind == "src_explicit" and entry[1] == lang:
                    text = _SRC_EXPLICIT_TGT[lang]
                elif kind == "intensifier" and entry[1] == lang:
                    text = _INTENSIFIER_TGT[lang]
                elif kind == "dur_ratio" and entry[1] == lang:
                    text = _DUR_RATIO_TGT[lang]
                    t0, t1 = start - 2.0, start + 6.0  # 8 s vs 2 s source
            if not (entry and entry[0] == "dur_ratio" and entry[1] == lang):
                jitter = float(rng.uniform(-0.15, 0.15))
                t0, t1 = t0 + jitter, t1 + jitter
                if t0 < 0:
                    t1 -= t0
                    t0 = 0.0
            out[lang].append(SubtitleSegment(
                talk_id, seg, int(round(t0 * 1000)), int(round(t1 * 1000)), text))
    return out


def _word_schedule(segments: list[SubtitleSegment]) -> list[dict]:
    words = []
    for seg in segments:
        toks = seg.text.split()
        span = seg.duration - 0.4
        slot = span / len(toks)
        for i, tok in enumerate(toks):
            w_start = seg.start + 0.2 + i * slot
            words.append({"word": tok, "start": round(w_start, 4),
                          "end": round(w_start + slot * 0.8, 4)})
    return words


def _synthesize_audio(words: list[dict], total_s: float) -> AudioClip:
    freqs = [150.0, 190.0, 230.0, 270.0]
    n = int(round(total_s * SAMPLE_RATE))
    samples = np.zeros(n)
    t = np.arange(n) / SAMPLE_RATE
    for i, w in enumerate(words):
        a = int(round(w["start"] * SAMPLE_RATE))
        b = min(n, int(round(w["end"] * SAMPLE_RATE)))
        if b <= a:
            continue
        f = freqs[i % len(freqs)]
        samples[a:b] = 0.25 * np.sin(2 * np.pi * f * t[: b - a])
    return AudioClip(samples=samples, sample_rate=SAMPLE_RATE)


def build_corpus(root: str | Path, with_audio: bool = True) -> dict:
    """Write the planted corpus under `root`; returns the plan summary."""
    root = Path(root)
    for sub in ("subs", "lexicons", "words", "audio"):
        (root / sub).mkdir(parents=True, exist_ok=True)

    for lang, rows in LEXICONS.items():
        content = "\n".join("\t".join(r) for r in rows) + "\n"
        (root / "lexicons" / f"{lang}.tsv").write_text(content, encoding="utf-8")

    talks_meta = []
    for talk_seed, talk_id in enumerate(sorted(_PLANS)):
        segs = _talk_segments(talk_id, talk_seed)
        (root / "subs" / f"{talk_id}.en.srt").write_bytes(serialize_srt(segs["en"]))
        for lang in ("fr", "de"):
            (root / "subs" / f"{talk_id}.{lang}.json").write_bytes(
                serialize_segments_json(segs[lang]))
        words = _word_schedule(segs["en"])
        with (root / "words" / f"{talk_id}.jsonl").open("w", encoding="utf-8") as fh:
            for w in words:
                fh.write(json.dumps(w) + "\n")
        audio_rel = f"audio/{talk_id}.wav"
        if with_audio:
            total = segs["en"][-1].end + 0.5
            write_wav(_synthesize_audio(words, total), root / audio_rel)
        talks_meta.append({
            "talk_id": talk_id,
            "source_language": "en",
            "translations": ["de", "fr"],
            "audio": audio_rel,
            "subtitles": {
                "en": {"path": f"subs/{talk_id}.en.srt", "format": "srt"},
                "fr": {"path": f"subs/{talk_id}.fr.json", "format": "segments-json"},
                "de": {"path": f"subs/{talk_id}.de.json", "format": "segments-json"},
            },
        })
    (root / "talks.json").write_text(
        json.dumps(talks_meta, indent=2, sort_keys=True), encoding="utf-8")

    events, distractors = build_plan()
    return {
        "root": str(root),
        "events": [e.__dict__ for e in events],
        "distractors": [d.__dict__ for d in distractors],
    }
