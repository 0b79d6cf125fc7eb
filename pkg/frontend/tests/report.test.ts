import { describe, expect, it } from "vitest";

import { errorReport, exclusions } from "../src/report";
import { makeVerdict, scriptedHundred } from "./helpers";

describe("error report", () => {
  it("scripted 100-verdict session yields 6% / 2%", () => {
    const report = errorReport(scriptedHundred());
    expect(report.reviewed).toBe(100);
    expect(report.segmentation_error_rate).toBeCloseTo(0.06, 12);
    expect(report.not_implicit_rate).toBeCloseTo(0.02, 12);
    expect(report.error_counts.extraneous_content).toBe(4);
    expect(report.error_counts.early_cut).toBe(2);
    expect(report.error_counts.not_implicit).toBe(2);
    expect(report.rejected).toBe(2);
    expect(report.disagreements).toBe(0);
  });

  it("equals direct counting over the verdict file", () => {
    const verdicts = scriptedHundred();
    const report = errorReport(verdicts);
    const direct = verdicts.filter(
      (v) => v.error_class === "extraneous_content"
          || v.error_class === "early_cut").length;
    expect(report.segmentation_error_rate * report.reviewed).toBeCloseTo(direct);
  });

  it("counts disagreements across reviewers", () => {
    const report = errorReport([
      makeVerdict(1, "accept", { reviewer_id: "r1" }),
      makeVerdict(1, "reject", { reviewer_id: "r2",
                                 error_class: "not_implicit" }),
      makeVerdict(2, "accept", { reviewer_id: "r1" }),
    ]);
    expect(report.reviewed).toBe(2);
    expect(report.disagreements).toBe(1);
  });

  it("empty input gives zero rates", () => {
    const report = errorReport([]);
    expect(report.reviewed).toBe(0);
    expect(report.segmentation_error_rate).toBe(0);
  });
});

describe("exclusions", () => {
  it("rejects and disagreements excluded, fixes retained", () => {
    const out = exclusions([
      makeVerdict(1, "reject", { error_class: "not_implicit" }),
      makeVerdict(2, "fix", { corrected_spans: [[0, 1], [2, 3]] }),
      makeVerdict(3, "accept", { reviewer_id: "r1" }),
      makeVerdict(3, "reject", { reviewer_id: "r2",
                                 error_class: "wrong_label" }),
      makeVerdict(4, "accept"),
    ]);
    expect(out.get("i001")).toBe("rejected");
    expect(out.has("i002")).toBe(false);
    expect(out.get("i003")).toBe("needs_adjudication");
    expect(out.has("i004")).toBe(false);
  });
});
