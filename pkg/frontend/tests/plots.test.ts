import { mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";
import { main } from "../src/cli.js";
import { loadEnsembleCsv, loadGrid, loadRunCsv, loadRunRecord } from "../src/io.js";
import { envelope, inputProfiles, iterateCloud, trEvolution } from "../src/plots.js";
import { SchemaError } from "../src/schema.js";

const FIXTURES = join(__dirname, "fixtures");
const QUAD_RUNS = [0, 1, 2].map((s) => join(FIXTURES, "quad", `run_${s}.json`));
const PBR_RUNS = [0, 1].map((s) => join(FIXTURES, "pbr", `run_${s}.json`));

function count(svg: string, needle: string): number {
  return svg.split(needle).length - 1;
}

describe("iterate_cloud", () => {
  it("renders one polyline, start and final marker per run plus the optimum star", () => {
    const runs = QUAD_RUNS.map(loadRunRecord);
    const grid = loadGrid(join(FIXTURES, "quad_grid.json"));
    const svg = iterateCloud(runs, grid);
    expect(count(svg, 'class="run-path"')).toBe(runs.length);
    expect(count(svg, 'class="start-marker"')).toBe(runs.length);
    expect(count(svg, 'class="final-marker"')).toBe(runs.length);
    expect(count(svg, 'class="optimum-star"')).toBe(1);
    expect(count(svg, 'class="constraint-boundary"')).toBe(1);
    expect(count(svg, 'class="cost-contour"')).toBeGreaterThan(4);
    // One iterate dot per center: K+1 per run.
    const run0 = runs[0];
    expect(count(svg, 'class="iterate"')).toBe(
      runs.length * (run0.entries.length + 1),
    );
  });

  it("is a pure function of its inputs", () => {
    const runs = QUAD_RUNS.map(loadRunRecord);
    const grid = loadGrid(join(FIXTURES, "quad_grid.json"));
    expect(iterateCloud(runs, grid)).toBe(iterateCloud(runs, grid));
  });
});

describe("envelope", () => {
  it("renders a single percentile line", () => {
    const rows = loadEnsembleCsv(join(FIXTURES, "quad", "ensemble.csv"));
    const svg = envelope(rows);
    expect(count(svg, 'class="envelope-line"')).toBe(1);
  });

  it("single-run ensemble still renders one line and no band", () => {
    const rows = loadEnsembleCsv(join(FIXTURES, "pbr", "ensemble.csv"));
    const svg = envelope(rows);
    expect(count(svg, 'class="envelope-line"')).toBe(1);
    expect(count(svg, "band")).toBe(0);
  });
});

describe("tr_evolution", () => {
  it("draws one ellipse per iteration row of the run CSV", () => {
    const rows = loadRunCsv(join(FIXTURES, "quad", "run_0.csv"));
    const grid = loadGrid(join(FIXTURES, "quad_grid.json"));
    const svg = trEvolution(rows, grid);
    const withDelta = rows.filter((r) => r.delta !== null).length;
    expect(count(svg, 'class="trust-region"')).toBe(withDelta);
    expect(count(svg, 'class="optimum-star"')).toBe(1);
  });
});

describe("input_profiles", () => {
  it("draws a dashed staircase per run per channel plus one band per channel", () => {
    const runs = PBR_RUNS.map(loadRunRecord);
    const svg = inputProfiles(runs);
    expect(count(svg, 'class="profile-line"')).toBe(runs.length * 2);
    expect(count(svg, 'class="profile-band"')).toBe(2);
    expect(count(svg, 'class="panel-title"')).toBe(2);
  });

  it("rejects odd control vectors", () => {
    const run = loadRunRecord(PBR_RUNS[0]);
    const broken = { ...run, final_center_unscaled: [1, 2, 3] };
    expect(() => inputProfiles([broken])).toThrow(SchemaError);
  });
});

describe("schema validation", () => {
  it("rejects malformed run records", () => {
    const dir = mkdtempSync(join(tmpdir(), "madapt-plots-"));
    const bad = join(dir, "bad.json");
    writeFileSync(bad, JSON.stringify({ seed: "zero" }));
    expect(() => loadRunRecord(bad)).toThrow(SchemaError);
  });

  it("rejects a CSV with the wrong header", () => {
    const dir = mkdtempSync(join(tmpdir(), "madapt-plots-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "a,b,c\n1,2,3\n");
    expect(() => loadEnsembleCsv(bad)).toThrow(SchemaError);
  });
});

describe("cli", () => {
  it("renders all four kinds end to end with exit code 0", () => {
    const dir = mkdtempSync(join(tmpdir(), "madapt-plots-"));
    const grid = join(FIXTURES, "quad_grid.json");
    expect(
      main([
        "iterate_cloud", ...QUAD_RUNS, "--grid", grid,
        "-o", join(dir, "cloud.svg"),
      ]),
    ).toBe(0);
    expect(
      main([
        "envelope", join(FIXTURES, "quad", "ensemble.csv"),
        "-o", join(dir, "envelope.svg"),
      ]),
    ).toBe(0);
    expect(
      main([
        "tr_evolution", join(FIXTURES, "quad", "run_0.csv"), "--grid", grid,
        "-o", join(dir, "tr.svg"),
      ]),
    ).toBe(0);
    expect(
      main([
        "input_profiles", ...PBR_RUNS,
        "-o", join(dir, "profiles.svg"),
      ]),
    ).toBe(0);
    const svg = readFileSync(join(dir, "cloud.svg"), "utf8");
    expect(svg.startsWith("<svg")).toBe(true);
  });

  it("bad usage exits 2", () => {
    expect(main(["mystery_plot", "x", "-o", "y.svg"])).toBe(2);
    expect(main(["envelope"])).toBe(2);
    expect(main(["iterate_cloud", QUAD_RUNS[0], "-o", "out.svg"])).toBe(2);
  });

  it("schema mismatch exits 2", () => {
    const dir = mkdtempSync(join(tmpdir(), "madapt-plots-"));
    const bad = join(dir, "bad.json");
    writeFileSync(bad, JSON.stringify({ nope: true }));
    expect(
      main([
        "input_profiles", bad, "-o", join(dir, "x.svg"),
      ]),
    ).toBe(2);
  });
});
