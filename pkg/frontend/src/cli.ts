#!/usr/bin/env node
/**
 * plot <kind> <inputs...> -o <file> [--grid grid.json]
 *
 * Kinds:
 *   iterate_cloud   run_*.json inputs, requires --grid
 *   envelope        one ensemble.csv input
 *   tr_evolution    one run_*.csv input, requires --grid
 *   input_profiles  run_*.json inputs (stage-control plants)
 *
 * Exit codes: 0 ok, 1 render failure, 2 bad arguments or schema mismatch.
 */
import { writeFileSync } from "fs";
import { loadEnsembleCsv, loadGrid, loadRunCsv, loadRunRecord } from "./io.js";
import { envelope, inputProfiles, iterateCloud, trEvolution } from "./plots.js";
import { SchemaError } from "./schema.js";

const KINDS = ["iterate_cloud", "envelope", "tr_evolution", "input_profiles"];

interface Args {
  kind: string;
  inputs: string[];
  output: string;
  grid?: string;
}

function parseArgs(argv: string[]): Args {
  const positional: string[] = [];
  let output = "";
  let grid: string | undefined;
  for (let i = 0; i < argv.length; i += 1) {
    const a = argv[i];
    if (a === "-o" || a === "--output") {
      output = argv[++i] ?? "";
    } else if (a === "--grid") {
      grid = argv[++i];
    } else if (a.startsWith("-")) {
      throw new SchemaError(`unknown option ${a}`);
    } else {
      positional.push(a);
    }
  }
  const [kind, ...inputs] = positional;
  if (!kind || !KINDS.includes(kind)) {
    throw new SchemaError(`first argument must be one of: ${KINDS.join(", ")}`);
  }
  if (!inputs.length) throw new SchemaError("no input files given");
  if (!output) throw new SchemaError("missing -o <file>");
  return { kind, inputs, output, grid };
}

export function renderFromArgs(args: Args): string {
  switch (args.kind) {
    case "iterate_cloud": {
      if (!args.grid) throw new SchemaError("iterate_cloud requires --grid");
      return iterateCloud(args.inputs.map(loadRunRecord), loadGrid(args.grid));
    }
    case "envelope": {
      if (args.inputs.length !== 1) {
        throw new SchemaError("envelope takes exactly one ensemble.csv");
      }
      return envelope(loadEnsembleCsv(args.inputs[0]));
    }
    case "tr_evolution": {
      if (!args.grid) throw new SchemaError("tr_evolution requires --grid");
      if (args.inputs.length !== 1) {
        throw new SchemaError("tr_evolution takes exactly one run CSV");
      }
      return trEvolution(loadRunCsv(args.inputs[0]), loadGrid(args.grid));
    }
    default:
      return inputProfiles(args.inputs.map(loadRunRecord));
  }
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 2;
  }
  try {
    const svg = renderFromArgs(args);
    writeFileSync(args.output, svg);
    console.log(`wrote ${args.output}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError || err instanceof SyntaxError) {
      console.error(`schema error: ${(err as Error).message}`);
      return 2;
    }
    console.error(`render failed: ${(err as Error).message}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
