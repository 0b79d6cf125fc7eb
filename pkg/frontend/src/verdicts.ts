import { Verdict, verdictSchema } from "./types";

export class VerdictSchemaError extends Error {
  constructor(message: string, public readonly row: number) {
    super(`row ${row}: ${message}`);
  }
}

/** Parse verdict JSONL; schema violations carry the 1-based row number. */
export function parseVerdicts(text: string): Verdict[] {
  const verdicts: Verdict[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch (err) {
      throw new VerdictSchemaError(`invalid JSON: ${err}`, i + 1);
    }
    const parsed = verdictSchema.safeParse(raw);
    if (!parsed.success) {
      throw new VerdictSchemaError(parsed.error.issues[0].message, i + 1);
    }
    verdicts.push(parsed.data);
  }
  return verdicts;
}

function canonicalRow(v: Verdict): string {
  // keys emitted in sorted order so repeated exports are byte-identical
  const obj: Record<string, unknown> = {};
  const entries: [string, unknown][] = [
    ["corrected_spans", v.corrected_spans],
    ["decision", v.decision],
    ["error_class", v.error_class],
    ["instance_id", v.instance_id],
    ["reviewer_id", v.reviewer_id],
    ["timestamp", v.timestamp],
  ];
  for (const [key, value] of entries) {
    if (value !== undefined) obj[key] = value;
  }
  return JSON.stringify(obj);
}

/** Serialize verdicts sorted by (instance_id, reviewer_id). */
export function serializeVerdicts(verdicts: Verdict[]): string {
  if (verdicts.length === 0) {
    throw new Error("cannot export an empty session (no verdicts)");
  }
  const sorted = [...verdicts].sort((a, b) =>
    a.instance_id === b.instance_id
      ? a.reviewer_id.localeCompare(b.reviewer_id)
      : a.instance_id.localeCompare(b.instance_id),
  );
  return sorted.map(canonicalRow).join("\n") + "\n";
}

/** Last writer wins per (instance, reviewer); cross-reviewer conflicts are
 * surfaced by the report, never merged away. */
export function mergeVerdicts(
  verdicts: Verdict[],
): Map<string, Map<string, Verdict>> {
  const merged = new Map<string, Map<string, Verdict>>();
  for (const v of verdicts) {
    let perReviewer = merged.get(v.instance_id);
    if (!perReviewer) {
      perReviewer = new Map();
      merged.set(v.instance_id, perReviewer);
    }
    const prev = perReviewer.get(v.reviewer_id);
    if (!prev || v.timestamp >= prev.timestamp) {
      perReviewer.set(v.reviewer_id, v);
    }
  }
  return merged;
}
