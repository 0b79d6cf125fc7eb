import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import { SessionRow, Verdict } from "../src/types";

export function makeRow(k: number, overrides: Partial<SessionRow> = {}): SessionRow {
  const labels = ["cause-effect", "contrast", "temporal", "elaboration"];
  return {
    instance_id: `i${String(k).padStart(3, "0")}`,
    talk_id: `t${k % 5}`,
    language: "en",
    label: labels[k % 4],
    arg1_text: `first argument ${k}`,
    arg2_text: `second argument ${k}`,
    arg1_clip: "",
    arg2_clip: "",
    review_order: k,
    ...overrides,
  };
}

export function makeVerdict(k: number, decision: Verdict["decision"],
                            overrides: Partial<Verdict> = {}): Verdict {
  const base: Verdict = {
    instance_id: `i${String(k).padStart(3, "0")}`,
    decision,
    reviewer_id: "r1",
    timestamp: "2026-01-01T00:00:00Z",
  };
  return { ...base, ...overrides };
}

/** Write a session bundle into a fresh temp directory. */
export function makeBundle(rows: SessionRow[],
                           clips: Record<string, Buffer> = {}): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "review-session-"));
  fs.mkdirSync(path.join(dir, "clips"));
  fs.writeFileSync(
    path.join(dir, "session.jsonl"),
    rows.map((r) => JSON.stringify(r)).join("\n") + "\n",
  );
  fs.writeFileSync(
    path.join(dir, "meta.json"),
    JSON.stringify({ seed: 0, sample_size: rows.length, manifest_hash: "x" }),
  );
  for (const [name, data] of Object.entries(clips)) {
    fs.writeFileSync(path.join(dir, "clips", name), data);
  }
  return dir;
}

/** The scripted quality-control session: 4 extraneous-content fixes, 2
 * early-cut fixes, 2 not-implicit rejects, accepts for the rest of 100. */
export function scriptedHundred(): Verdict[] {
  const verdicts: Verdict[] = [];
  let k = 0;
  for (const [errorClass, n] of [["extraneous_content", 4],
                                 ["early_cut", 2]] as const) {
    for (let i = 0; i < n; i++, k++) {
      verdicts.push(makeVerdict(k, "fix", {
        error_class: errorClass,
        corrected_spans: [[0, 5], [6, 12]],
      }));
    }
  }
  for (let i = 0; i < 2; i++, k++) {
    verdicts.push(makeVerdict(k, "reject", { error_class: "not_implicit" }));
  }
  while (k < 100) {
    verdicts.push(makeVerdict(k, "accept"));
    k++;
  }
  return verdicts;
}
