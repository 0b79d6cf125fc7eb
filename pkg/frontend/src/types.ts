import { z } from "zod";

export const DECISIONS = ["accept", "reject", "fix"] as const;
export const ERROR_CLASSES = [
  "extraneous_content",
  "early_cut",
  "not_implicit",
  "wrong_label",
] as const;
export const SEGMENTATION_ERRORS = ["extraneous_content", "early_cut"];

const spanPair = z.tuple([
  z.tuple([z.number().int(), z.number().int()]),
  z.tuple([z.number().int(), z.number().int()]),
]);

export const verdictSchema = z
  .object({
    instance_id: z.string().min(1),
    decision: z.enum(DECISIONS),
    reviewer_id: z.string().min(1),
    timestamp: z.string().min(1),
    error_class: z.enum(ERROR_CLASSES).optional(),
    corrected_spans: spanPair.optional(),
  })
  .superRefine((v, ctx) => {
    if (v.decision === "reject" && v.error_class === undefined) {
      ctx.addIssue({
        code: z.ZodIssueCode.custom,
        message: "reject requires an error_class",
      });
    }
    if (v.decision === "fix" && v.corrected_spans === undefined) {
      ctx.addIssue({
        code: z.ZodIssueCode.custom,
        message: "fix requires corrected_spans",
      });
    }
  });

export type Verdict = z.infer<typeof verdictSchema>;

// one row of the session bundle (a manifest slice with a review order)
export const sessionRowSchema = z
  .object({
    instance_id: z.string(),
    talk_id: z.string(),
    language: z.string(),
    label: z.string(),
    arg1_text: z.string(),
    arg2_text: z.string(),
    arg1_clip: z.string(),
    arg2_clip: z.string(),
    review_order: z.number().int(),
  })
  .passthrough();

export type SessionRow = z.infer<typeof sessionRowSchema>;

export interface SessionMeta {
  seed: number;
  sample_size: number;
  manifest_hash: string;
}

export interface ErrorReport {
  reviewed: number;
  rejected: number;
  disagreements: number;
  error_counts: Record<string, number>;
  segmentation_error_rate: number;
  not_implicit_rate: number;
  wrong_label_rate: number;
}
