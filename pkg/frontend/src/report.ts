import { ERROR_CLASSES, ErrorReport, SEGMENTATION_ERRORS, Verdict } from "./types";
import { mergeVerdicts } from "./verdicts";

/** Error rates over reviewed instances, from the merged verdict state. The
 * same arithmetic runs pipeline-side; the two must agree on any verdict
 * file. */
export function errorReport(verdicts: Verdict[]): ErrorReport {
  const merged = mergeVerdicts(verdicts);
  const counts: Record<string, number> = {};
  for (const ec of ERROR_CLASSES) counts[ec] = 0;
  let disagreements = 0;
  let rejected = 0;
  for (const perReviewer of merged.values()) {
    const decisions = new Set<string>();
    const errorClasses = new Set<string>();
    for (const v of perReviewer.values()) {
      decisions.add(v.decision);
      if (v.error_class) errorClasses.add(v.error_class);
    }
    if (decisions.size > 1) disagreements++;
    if (decisions.has("reject")) rejected++;
    for (const ec of errorClasses) counts[ec]++;
  }
  const reviewed = merged.size;
  const segErrors = SEGMENTATION_ERRORS.reduce((n, ec) => n + counts[ec], 0);
  return {
    reviewed,
    rejected,
    disagreements,
    error_counts: counts,
    segmentation_error_rate: reviewed ? segErrors / reviewed : 0,
    not_implicit_rate: reviewed ? counts["not_implicit"] / reviewed : 0,
    wrong_label_rate: reviewed ? counts["wrong_label"] / reviewed : 0,
  };
}

/** Instances excluded from release: rejected, or disagreeing reviewers
 * (conservative rule: excluded until adjudicated). */
export function exclusions(verdicts: Verdict[]): Map<string, string> {
  const merged = mergeVerdicts(verdicts);
  const out = new Map<string, string>();
  for (const [instanceId, perReviewer] of merged) {
    const decisions = new Set([...perReviewer.values()].map((v) => v.decision));
    if (decisions.size > 1) {
      out.set(instanceId, "needs_adjudication");
    } else if (decisions.has("reject")) {
      out.set(instanceId, "rejected");
    }
  }
  return out;
}
