"""File-based bridge to the human review tool: session bundle export, verdict
ingestion, release filtering, and the error-rate report.

Verdict ingestion never mutates mined instances; it only decides what enters
the release manifest, so the original audit trail is preserved.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import DatasetManifest

DECISIONS = ("accept", "reject", "fix")
ERROR_CLASSES = ("extraneous_content", "early_cut", "not_implicit", "wrong_label")
SEGMENTATION_ERRORS = ("extraneous_content", "early_cut")


class VerdictSchemaError(ValueError):
    def __init__(self, message: str, row: int):
        super().__init__(f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class Verdict:
    instance_id: str
    decision: str
    reviewer_id: str
    timestamp: str
    error_class: str | None = None
    corrected_spans: tuple[tuple[int, int], tuple[int, int]] | None = None

    def __post_init__(self):
        if self.decision not in DECISIONS:
            raise ValueError(f"bad decision {self.decision!r}")
        if self.decision == "reject" and self.error_class not in ERROR_CLASSES:
            raise ValueError("reject requires a valid error_class")
        if self.decision == "fix" and self.corrected_spans is None:
            raise ValueError("fix requires corrected_spans")
        if self.error_class is not None and self.error_class not in ERROR_CLASSES:
            raise ValueError(f"bad error_class {self.error_class!r}")

    def to_json(self) -> dict:
        row = {"instance_id": self.instance_id, "decision": self.decision,
               "reviewer_id": self.reviewer_id, "timestamp": self.timestamp}
        if self.error_class is not None:
            row["error_class"] = self.error_class
        if self.corrected_spans is not None:
            row["corrected_spans"] = [list(self.corrected_spans[0]),
                                      list(self.corrected_spans[1])]
        return row

    @classmethod
    def from_json(cls, row: dict) -> "Verdict":
        spans = row.get("corrected_spans")
        if spans is not None:
            spans = (tuple(spans[0]), tuple(spans[1]))
        return cls(instance_id=row["instance_id"], decision=row["decision"],
                   reviewer_id=row["reviewer_id"], timestamp=row["timestamp"],
                   error_class=row.get("error_class"), corrected_spans=spans)


def export_review_session(manifest: DatasetManifest, clips_dir: str | Path,
                          out_dir: str | Path, sample_size: int | None = None,
                          seed: int = 0) -> dict:
    """Write a self-contained session bundle: sampled manifest slice plus the
    referenced clip files. Sampling order is seeded and recorded, so a session
    is resumable."""
    out = Path(out_dir)
    (out / "clips").mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(manifest.instances))
    if sample_size is not None:
        order = order[:sample_size]
    clips = Path(clips_dir)
    rows = []
    for rank, idx in enumerate(order):
        inst = manifest.instances[int(idx)]
        row = inst.to_json()
        row["review_order"] = rank
        for key in ("arg1_clip", "arg2_clip"):
            name = row[key]
            src = clips / name if name else None
            if src and src.exists():
                shutil.copy2(src, out / "clips" / src.name)
                row[key] = f"clips/{src.name}"
            else:
                row[key] = ""
        rows.append(row)
    with (out / "session.jsonl").open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
    meta = {"seed": seed, "sample_size": len(rows),
            "manifest_hash": manifest.provenance_hash}
    (out / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2))
    return meta


def load_verdicts(path: str | Path) -> list[Verdict]:
    verdicts = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise VerdictSchemaError(f"invalid JSON: {exc}", lineno) from None
        try:
            verdicts.append(Verdict.from_json(row))
        except (KeyError, ValueError, TypeError, IndexError) as exc:
            raise VerdictSchemaError(str(exc), lineno) from None
    return verdicts


def save_verdicts(verdicts: list[Verdict], path: str | Path) -> None:
    ordered = sorted(verdicts, key=lambda v: (v.instance_id, v.reviewer_id))
    with Path(path).open("w", encoding="utf-8") as fh:
        for v in ordered:
            fh.write(json.dumps(v.to_json(), sort_keys=True, ensure_ascii=False) + "\n")


def merge_verdicts(verdicts: list[Verdict]) -> dict[str, dict[str, Verdict]]:
    """Last writer wins per (instance, reviewer); cross-reviewer conflicts are
    surfaced by the caller, never silently merged."""
    merged: dict[str, dict[str, Verdict]] = {}
    for v in verdicts:
        merged.setdefault(v.instance_id, {})
        prev = merged[v.instance_id].get(v.reviewer_id)
        if prev is None or v.timestamp >= prev.timestamp:
            merged[v.instance_id][v.reviewer_id] = v
    return merged


def error_report(verdicts: list[Verdict]) -> dict:
    """Error rates over reviewed instances, computed from the merged verdict
    state (one decision per instance per reviewer)."""
    merged = merge_verdicts(verdicts)
    reviewed = len(merged)
    counts = {ec: 0 for ec in ERROR_CLASSES}
    disagreements = 0
    rejected = 0
    for per_reviewer in merged.values():
        decisions = {v.decision for v in per_reviewer.values()}
        if len(decisions) > 1:
            disagreements += 1
        error_classes = {v.error_class for v in per_reviewer.values()
                         if v.error_class is not None}
        for ec in error_classes:
            counts[ec] += 1
        if "reject" in decisions:
            rejected += 1
    seg_errors = sum(counts[ec] for ec in SEGMENTATION_ERRORS)
    return {
        "reviewed": reviewed,
        "rejected": rejected,
        "disagreements": disagreements,
        "error_counts": counts,
        "segmentation_error_rate": seg_errors / reviewed if reviewed else 0.0,
        "not_implicit_rate": counts["not_implicit"] / reviewed if reviewed else 0.0,
        "wrong_label_rate": counts["wrong_label"] / reviewed if reviewed else 0.0,
    }


def import_verdicts(manifest: DatasetManifest,
                    verdicts: list[Verdict]) -> tuple[DatasetManifest, dict]:
    """Release filter: rejected instances are excluded; reviewer disagreement
    excludes an instance until adjudicated; unreviewed instances pass through.
    Returns the release manifest and the error report."""
    merged = merge_verdicts(verdicts)
    excluded: dict[str, str] = {}
    for instance_id, per_reviewer in merged.items():
        decisions = {v.decision for v in per_reviewer.values()}
        if len(decisions) > 1:
            excluded[instance_id] = "needs_adjudication"
        elif "reject" in decisions:
            excluded[instance_id] = "rejected"
    release = DatasetManifest(
        instances=[i for i in manifest.instances if i.instance_id not in excluded],
        version=manifest.version)
    report = error_report(verdicts)
    report["excluded"] = dict(sorted(excluded.items()))
    return release, report
