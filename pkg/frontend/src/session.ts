import * as fs from "fs";
import * as path from "path";

import { errorReport, exclusions } from "./report";
import { SessionMeta, SessionRow, Verdict, sessionRowSchema } from "./types";
import { parseVerdicts, serializeVerdicts } from "./verdicts";

/** A review session over a file-based bundle (session.jsonl + meta.json +
 * clips/). Verdicts persist to verdicts.jsonl inside the bundle directory on
 * every write, so a session survives restarts and is resumable. */
export class ReviewSession {
  readonly dir: string;
  readonly meta: SessionMeta;
  readonly rows: SessionRow[];
  private verdicts: Verdict[] = [];

  constructor(dir: string) {
    this.dir = dir;
    const sessionPath = path.join(dir, "session.jsonl");
    if (!fs.existsSync(sessionPath)) {
      throw new Error(`no session bundle at ${sessionPath}`);
    }
    this.meta = JSON.parse(
      fs.readFileSync(path.join(dir, "meta.json"), "utf-8"),
    );
    this.rows = fs
      .readFileSync(sessionPath, "utf-8")
      .split("\n")
      .filter((line) => line.trim())
      .map((line, i) => {
        const parsed = sessionRowSchema.safeParse(JSON.parse(line));
        if (!parsed.success) {
          throw new Error(`session.jsonl row ${i + 1}: ${parsed.error.message}`);
        }
        return parsed.data;
      })
      .sort((a, b) => a.review_order - b.review_order);
    if (fs.existsSync(this.verdictsPath)) {
      this.verdicts = parseVerdicts(
        fs.readFileSync(this.verdictsPath, "utf-8"),
      );
    }
  }

  get verdictsPath(): string {
    return path.join(this.dir, "verdicts.jsonl");
  }

  allVerdicts(): Verdict[] {
    return [...this.verdicts];
  }

  record(verdict: Verdict): void {
    const known = this.rows.some((r) => r.instance_id === verdict.instance_id);
    if (!known) {
      throw new Error(`unknown instance ${verdict.instance_id}`);
    }
    this.verdicts.push(verdict);
    fs.writeFileSync(this.verdictsPath, serializeVerdicts(this.verdicts));
  }

  /** Sorted verdict JSONL for the pipeline's review-import stage. */
  exportVerdicts(): string {
    return serializeVerdicts(this.verdicts);
  }

  report() {
    return errorReport(this.verdicts);
  }

  /** Review state per instance, in session order, for the UI. */
  progress() {
    const byInstance = new Map<string, Verdict[]>();
    for (const v of this.verdicts) {
      const list = byInstance.get(v.instance_id) ?? [];
      list.push(v);
      byInstance.set(v.instance_id, list);
    }
    const excluded = exclusions(this.verdicts);
    return this.rows.map((row) => ({
      instance_id: row.instance_id,
      reviewed: byInstance.has(row.instance_id),
      reviewers: [...new Set(
        (byInstance.get(row.instance_id) ?? []).map((v) => v.reviewer_id),
      )],
      release_state: excluded.get(row.instance_id) ?? "released",
    }));
  }
}
