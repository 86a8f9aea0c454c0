/** File loading and CSV parsing for harness exports. */
import { readFileSync } from "fs";
import Papa from "papaparse";
import {
  EnsembleRow,
  GridExport,
  gridExportSchema,
  RunCsvRow,
  RunRecord,
  runRecordSchema,
  SchemaError,
} from "./schema.js";

export function loadRunRecord(path: string): RunRecord {
  const parsed = runRecordSchema.safeParse(
    JSON.parse(readFileSync(path, "utf8")),
  );
  if (!parsed.success) {
    throw new SchemaError(`${path}: ${parsed.error.message}`);
  }
  return parsed.data;
}

export function loadGrid(path: string): GridExport {
  const parsed = gridExportSchema.safeParse(
    JSON.parse(readFileSync(path, "utf8")),
  );
  if (!parsed.success) {
    throw new SchemaError(`${path}: ${parsed.error.message}`);
  }
  return parsed.data;
}

function numOrNull(raw: string): number | null {
  if (raw === undefined || raw === "") return null;
  const v = Number(raw);
  if (Number.isNaN(v)) throw new SchemaError(`not a number: ${raw}`);
  return v;
}

export function loadRunCsv(path: string): RunCsvRow[] {
  const text = readFileSync(path, "utf8");
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length) {
    throw new SchemaError(`${path}: ${parsed.errors[0].message}`);
  }
  const [header, ...rows] = parsed.data;
  const uCols = header.filter((h) => /^u_\d+$/.test(h)).length;
  if (header[0] !== "k" || uCols === 0) {
    throw new SchemaError(`${path}: unexpected run CSV header`);
  }
  const col = (name: string) => header.indexOf(name);
  return rows.map((r) => ({
    k: Number(r[0]),
    u: r.slice(1, 1 + uCols).map(Number),
    delta: numOrNull(r[col("delta")]),
    rho: numOrNull(r[col("rho")]),
    accepted:
      r[col("accepted")] === "" ? null : r[col("accepted")] === "1",
    reason: r[col("reason")] ?? "",
    acqValue: numOrNull(r[col("acq_value")]),
  }));
}

export function loadEnsembleCsv(path: string): EnsembleRow[] {
  const text = readFileSync(path, "utf8");
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length) {
    throw new SchemaError(`${path}: ${parsed.errors[0].message}`);
  }
  const [header, ...rows] = parsed.data;
  if (header.join(",") !== "iteration,percentile_cost,n_feasible") {
    throw new SchemaError(`${path}: unexpected ensemble CSV header`);
  }
  return rows.map((r) => ({
    iteration: Number(r[0]),
    percentileCost: numOrNull(r[1]),
    nFeasible: Number(r[2]),
  }));
}
