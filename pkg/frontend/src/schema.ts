/**
 * Zod schemas for the harness exports this tool consumes.  Only the fields
 * the plots read are validated; extra fields pass through untouched.
 */
import { z } from "zod";

export const iterationEntrySchema = z.object({
  k: z.number().int(),
  center_unscaled: z.array(z.number()),
  trial_unscaled: z.array(z.number()),
  center_next_unscaled: z.array(z.number()),
  true_center_next: z.array(z.number()),
  delta_used: z.number(),
  accepted: z.boolean(),
  reason: z.string(),
});

export const runRecordSchema = z.object({
  seed: z.number().int(),
  config: z.record(z.unknown()),
  design_points_unscaled: z.array(z.array(z.number())).min(1),
  design_true: z.array(z.array(z.number())).min(1),
  initial_center_unscaled: z.array(z.number()),
  feasibility_tol: z.array(z.number()),
  entries: z.array(iterationEntrySchema),
  final_center_unscaled: z.array(z.number()),
  final_delta: z.number(),
});

export type RunRecord = z.infer<typeof runRecordSchema>;

export const gridExportSchema = z.object({
  plant: z.string(),
  bounds: z.object({
    lower: z.array(z.number()).length(2),
    upper: z.array(z.number()).length(2),
  }),
  n: z.number().int().min(2),
  u1: z.array(z.number()),
  u2: z.array(z.number()),
  cost: z.array(z.array(z.number())),
  constraints: z.array(z.array(z.array(z.number()))),
  optimum: z.object({
    u: z.array(z.number()),
    cost: z.number(),
  }),
});

export type GridExport = z.infer<typeof gridExportSchema>;

export interface RunCsvRow {
  k: number;
  u: number[];
  delta: number | null;
  rho: number | null;
  accepted: boolean | null;
  reason: string;
  acqValue: number | null;
}

export interface EnsembleRow {
  iteration: number;
  percentileCost: number | null;
  nFeasible: number;
}

export class SchemaError extends Error {}
