"""Manifest assembly, talk-disjoint splitting, corpus statistics, evaluation
metrics, and the gold-comparison report.

The manifest is JSON Lines, one instance per line, sorted by instance_id;
split assignment happens at talk granularity so no talk ever leaks across
train/validation/test.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .ingest import RelationLabel

SPLITS = ("train", "validation", "test")
SPLIT_VALUES = SPLITS + ("unassigned",)

# Published default ratios per source language.
DEFAULT_RATIOS = {
    "en": (0.6, 0.2, 0.2),
    "fr": (0.55, 0.15, 0.3),
    "es": (0.25, 0.25, 0.5),
}


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestInstance:
    instance_id: str
    talk_id: str
    language: str
    label: RelationLabel
    arg1_text: str
    arg2_text: str
    arg1_clip: str
    arg2_clip: str
    split: str = "unassigned"
    witness_language: str = ""
    arg2_sentence_index: int = -1
    intra: bool = False

    def __post_init__(self):
        if self.split not in SPLIT_VALUES:
            raise ValueError(f"bad split {self.split!r}")

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "talk_id": self.talk_id,
            "language": self.language,
            "label": self.label.value,
            "arg1_text": self.arg1_text,
            "arg2_text": self.arg2_text,
            "arg1_clip": self.arg1_clip,
            "arg2_clip": self.arg2_clip,
            "split": self.split,
            "witness_language": self.witness_language,
            "arg2_sentence_index": self.arg2_sentence_index,
            "intra": self.intra,
        }

    @classmethod
    def from_json(cls, row: dict) -> "ManifestInstance":
        return cls(
            instance_id=row["instance_id"],
            talk_id=row["talk_id"],
            language=row["language"],
            label=RelationLabel(row["label"]),
            arg1_text=row["arg1_text"],
            arg2_text=row["arg2_text"],
            arg1_clip=row.get("arg1_clip", ""),
            arg2_clip=row.get("arg2_clip", ""),
            split=row.get("split", "unassigned"),
            witness_language=row.get("witness_language", ""),
            arg2_sentence_index=row.get("arg2_sentence_index", -1),
            intra=row.get("intra", False),
        )


@dataclass
class DatasetManifest:
    instances: list[ManifestInstance] = field(default_factory=list)
    version: str = "1"

    def __post_init__(self):
        ids = [inst.instance_id for inst in self.instances]
        if len(set(ids)) != len(ids):
            raise ValueError("instance_ids must be unique")
        self.instances = sorted(self.instances, key=lambda i: i.instance_id)

    @property
    def provenance_hash(self) -> str:
        payload = "\n".join(json.dumps(i.to_json(), sort_keys=True,
                                       ensure_ascii=False)
                            for i in self.instances)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with Path(path).open("w", encoding="utf-8") as fh:
            for inst in self.instances:
                fh.write(json.dumps(inst.to_json(), sort_keys=True,
                                    ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        instances = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                instances.append(ManifestInstance.from_json(json.loads(line)))
        return cls(instances=instances)

    def talks(self) -> dict[str, list[ManifestInstance]]:
        by_talk: dict[str, list[ManifestInstance]] = {}
        for inst in self.instances:
            by_talk.setdefault(inst.talk_id, []).append(inst)
        return by_talk


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float]
    seed: int = 0

    def __post_init__(self):
        if any(r < 0 for r in self.ratios):
            raise SplitError("ratios must be non-negative")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise SplitError(f"ratios must sum to 1.0, got {sum(self.ratios)}")


def _ideal_counts(ratios, class_totals: np.ndarray) -> np.ndarray:
    return np.outer(np.asarray(ratios), class_totals)  # (3, C)


def _objective(counts: np.ndarray, ideal: np.ndarray) -> tuple[float, float]:
    dev = np.abs(counts - ideal)
    return float(dev.max()), float(dev.sum())


def split(manifest: DatasetManifest, spec: SplitSpec) -> DatasetManifest:
    """Assign talk-disjoint splits: greedy bin-packing of talks in descending
    size order, minimizing per-class deviation from the ideal ratio counts,
    then single-move/swap local refinement. Deterministic under the seed."""
    by_talk = manifest.talks()
    talk_ids = sorted(by_talk)
    if len(talk_ids) < 3:
        raise SplitError(f"need at least 3 talks, got {len(talk_ids)}")
    active = [s for s in range(3) if spec.ratios[s] > 0]
    if len(talk_ids) < len(active):
        raise SplitError("more non-empty splits requested than talks available")

    labels = sorted({inst.label.value for inst in manifest.instances})
    lab_idx = {lab: i for i, lab in enumerate(labels)}
    talk_class = np.zeros((len(talk_ids), len(labels)), dtype=np.float64)
    for t, tid in enumerate(talk_ids):
        for inst in by_talk[tid]:
            talk_class[t, lab_idx[inst.label.value]] += 1
    ideal = _ideal_counts(spec.ratios, talk_class.sum(axis=0))

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    order = sorted(range(len(talk_ids)),
                   key=lambda t: (-talk_class[t].sum(), talk_ids[t]))
    # seed-controlled tie shuffling among equal-size talks
    sizes = [talk_class[t].sum() for t in order]
    shuffled = []
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and sizes[j] == sizes[i]:
            j += 1
        block = order[i:j]
        rng.shuffle(block)
        shuffled.extend(block)
        i = j
    order = shuffled

    counts = np.zeros((3, len(labels)))
    assign = np.full(len(talk_ids), -1, dtype=int)
    for t in order:
        best = None
        for s in active:
            counts[s] += talk_class[t]
            overfill = np.maximum(counts - ideal, 0.0)
            score = (float((overfill ** 2).sum()),
                     -float((ideal[s] - counts[s]).sum()), s)
            counts[s] -= talk_class[t]
            if best is None or score < best[0]:
                best = (score, s)
        s = best[1]
        assign[t] = s
        counts[s] += talk_class[t]

    # every active split must hold at least one talk
    for s in active:
        if not np.any(assign == s):
            donor = max((t for t in range(len(talk_ids))
                         if np.sum(assign == assign[t]) > 1),
                        key=lambda t: -talk_class[t].sum(), default=None)
            if donor is None:
                raise SplitError("cannot populate every non-empty split")
            counts[assign[donor]] -= talk_class[donor]
            assign[donor] = s
            counts[s] += talk_class[donor]

    _refine(assign, counts, talk_class, ideal, active)

    for s in active:
        if not np.any(assign == s):
            raise SplitError(f"split {SPLITS[s]} ended up empty with ratio > 0")

    new_instances = []
    for t, tid in enumerate(talk_ids):
        name = SPLITS[assign[t]]
        for inst in by_talk[tid]:
            new_instances.append(replace(inst, split=name))
    return DatasetManifest(instances=new_instances, version=manifest.version)


def _refine(assign, counts, talk_class, ideal, active, max_rounds: int = 50):
    """Hill-climb on (max deviation, total deviation): single-talk moves and
    pairwise swaps, keeping every active split non-empty."""
    n = len(assign)
    for _ in range(max_rounds):
        improved = False
        current = _objective(counts, ideal)
        for t in range(n):
            src = assign[t]
            if np.sum(assign == src) <= 1:
                continue
            for s in active:
                if s == src:
                    continue
                counts[src] -= talk_class[t]
                counts[s] += talk_class[t]
                cand = _objective(counts, ideal)
                if cand < current:
                    assign[t] = s
                    current = cand
                    improved = True
                else:
                    counts[s] -= talk_class[t]
                    counts[src] += talk_class[t]
        for a in range(n):
            for b in range(a + 1, n):
                sa, sb = assign[a], assign[b]
                if sa == sb:
                    continue
                counts[sa] += talk_class[b] - talk_class[a]
                counts[sb] += talk_class[a] - talk_class[b]
                cand = _objective(counts, ideal)
                if cand < current:
                    assign[a], assign[b] = sb, sa
                    current = cand
                    improved = True
                else:
                    counts[sa] -= talk_class[b] - talk_class[a]
                    counts[sb] -= talk_class[a] - talk_class[b]
        if not improved:
            break


def stats_report(manifest: DatasetManifest) -> dict:
    """Exact per-language counts by label, split, and (split, label)."""
    report: dict = {"languages": {}, "total": len(manifest.instances)}
    for inst in manifest.instances:
        lang = report["languages"].setdefault(inst.language, {
            "total": 0,
            "by_label": {lab.value: 0 for lab in RelationLabel},
            "by_split": {s: 0 for s in SPLIT_VALUES},
            "by_split_label": {s: {lab.value: 0 for lab in RelationLabel}
                               for s in SPLIT_VALUES},
            "talks": 0,
        })
        lang["total"] += 1
        lang["by_label"][inst.label.value] += 1
        lang["by_split"][inst.split] += 1
        lang["by_split_label"][inst.split][inst.label.value] += 1
    for lang_code, block in report["languages"].items():
        talks = {i.talk_id for i in manifest.instances if i.language == lang_code}
        block["talks"] = len(talks)
    return report


def stats_json(manifest: DatasetManifest) -> bytes:
    return json.dumps(stats_report(manifest), sort_keys=True, indent=2,
                      ensure_ascii=False).encode("utf-8")


def stats_text(manifest: DatasetManifest) -> str:
    report = stats_report(manifest)
    lines = []
    header = f"{'language':<10}{'split':<12}" + "".join(
        f"{lab.value:>14}" for lab in RelationLabel) + f"{'total':>8}"
    lines.append(header)
    lines.append("-" * len(header))
    for lang in sorted(report["languages"]):
        block = report["languages"][lang]
        for split_name in SPLIT_VALUES:
            row_counts = block["by_split_label"][split_name]
            total = block["by_split"][split_name]
            if total == 0:
                continue
            lines.append(f"{lang:<10}{split_name:<12}" + "".join(
                f"{row_counts[lab.value]:>14}" for lab in RelationLabel)
                + f"{total:>8}")
        lines.append(f"{lang:<10}{'all':<12}" + "".join(
            f"{block['by_label'][lab.value]:>14}" for lab in RelationLabel)
            + f"{block['total']:>8}")
    return "\n".join(lines) + "\n"


def _as_label_value(x) -> str:
    if isinstance(x, RelationLabel):
        return x.value
    value = str(x)
    if value not in {lab.value for lab in RelationLabel}:
        raise ValueError(f"label {x!r} outside the relation enum")
    return value


def evaluate(predictions, gold) -> dict:
    """Accuracy plus macro-averaged precision/recall/F1 over the four relation
    classes, with the 0-convention for empty denominators."""
    if len(predictions) != len(gold):
        raise ValueError("predictions and gold must have equal length")
    preds = [_as_label_value(p) for p in predictions]
    golds = [_as_label_value(g) for g in gold]
    classes = [lab.value for lab in RelationLabel]
    per_class = {}
    f1s, precs, recs = [], [], []
    correct = sum(p == g for p, g in zip(preds, golds))
    for c in classes:
        tp = sum(1 for p, g in zip(preds, golds) if p == c and g == c)
        fp = sum(1 for p, g in zip(preds, golds) if p == c and g != c)
        fn = sum(1 for p, g in zip(preds, golds) if p != c and g == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per_class[c] = {"precision": prec, "recall": rec, "f1": f1,
                        "support": tp + fn}
        precs.append(prec)
        recs.append(rec)
        f1s.append(f1)
    return {
        "accuracy": correct / len(golds) if golds else 0.0,
        "macro_precision": float(np.mean(precs)),
        "macro_recall": float(np.mean(recs)),
        "macro_f1": float(np.mean(f1s)),
        "per_class": per_class,
    }


def load_gold(path: str | Path) -> list[dict]:
    """Gold annotation JSONL: {talk_id, sentence_index, label, inter_or_intra}."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        row = json.loads(line)
        for key in ("talk_id", "sentence_index", "label", "inter_or_intra"):
            if key not in row:
                raise ValueError(f"{path}, line {lineno}: missing {key!r}")
        rows.append(row)
    return rows


def compare_to_gold(manifest: DatasetManifest, gold: list[dict]) -> dict:
    """Coverage of the mined resource against sentence-indexed gold relations.

    A mined inter-sentential instance matches a gold relation when their Arg2
    sentences coincide; label agreement is reported but not required for the
    match count. Intra-sentential instances are outside gold scope and counted
    separately."""
    gold_inter = {(g["talk_id"], g["sentence_index"]): g["label"]
                  for g in gold if g["inter_or_intra"] == "inter"}
    matching = 0
    label_agreement = 0
    new_inter = 0
    intra_count = 0
    per_witness: dict[str, dict] = {}
    matched_keys = set()
    for inst in manifest.instances:
        witness = per_witness.setdefault(
            inst.witness_language or "unknown",
            {"matching": 0, "new_inter": 0, "intra": 0})
        if inst.intra:
            intra_count += 1
            witness["intra"] += 1
            continue
        key = (inst.talk_id, inst.arg2_sentence_index)
        if key in gold_inter:
            if key not in matched_keys:
                matched_keys.add(key)
                matching += 1
                if gold_inter[key] == inst.label.value:
                    label_agreement += 1
            witness["matching"] += 1
        else:
            new_inter += 1
            witness["new_inter"] += 1
    return {
        "gold_total": len(gold_inter),
        "matching": matching,
        "new_inter": new_inter,
        "intra": intra_count,
        "label_agreement": label_agreement,
        "per_witness_language": per_witness,
    }
