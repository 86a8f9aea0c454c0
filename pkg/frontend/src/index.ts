export { envelope, inputProfiles, iterateCloud, trEvolution } from "./plots.js";
export { loadEnsembleCsv, loadGrid, loadRunCsv, loadRunRecord } from "./io.js";
export { SchemaError } from "./schema.js";
export type { GridExport, RunRecord, RunCsvRow, EnsembleRow } from "./schema.js";
