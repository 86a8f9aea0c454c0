/**
 * The four figure kinds regenerated from harness exports.  Pure functions of
 * their input files: no science is recomputed here.
 */
import { drawContours } from "./contours.js";
import { EnsembleRow, GridExport, RunCsvRow, RunRecord, SchemaError } from "./schema.js";
import { LinearScale, SvgCanvas } from "./svg.js";

/** Centers visited by a run: initial center then one per iteration. */
function centerTrajectory(run: RunRecord): number[][] {
  const pts = [run.initial_center_unscaled];
  for (const e of run.entries) {
    pts.push(e.center_next_unscaled);
  }
  return pts;
}

/**
 * Iterate cloud over cost contours: per-run polyline of centers, start
 * hexagon-ish markers, final triangle markers, optimum star.
 */
export function iterateCloud(runs: RunRecord[], grid: GridExport): string {
  if (!runs.length) throw new SchemaError("iterate_cloud needs >= 1 run");
  const canvas = new SvgCanvas(640, 560);
  const x = canvas.xScale(grid.bounds.lower[0], grid.bounds.upper[0]);
  const y = canvas.yScale(grid.bounds.lower[1], grid.bounds.upper[1]);
  drawContours(canvas, grid, x, y);
  for (const run of runs) {
    const pts = centerTrajectory(run).map(
      ([a, b]) => [x.apply(a), y.apply(b)] as [number, number],
    );
    canvas.polyline(pts, {
      stroke: "#d62728",
      "stroke-width": 1.2,
      class: "run-path",
    });
    for (const [px, py] of pts) {
      canvas.circle(px, py, 2.4, { fill: "#d62728", class: "iterate" });
    }
    const [sx, sy] = pts[0];
    canvas.circle(sx, sy, 4.5, { fill: "#1f77b4", class: "start-marker" });
    const [fx, fy] = pts[pts.length - 1];
    canvas.raw(
      `<polygon points="${fx},${fy - 5} ${fx - 4.5},${fy + 4} ${fx + 4.5},${fy + 4}" ` +
        `fill="#2ca02c" class="final-marker"/>`,
    );
  }
  canvas.star(x.apply(grid.optimum.u[0]), y.apply(grid.optimum.u[1]), 8, {
    fill: "#1f77b4",
    class: "optimum-star",
  });
  canvas.axes(x, y, "u1", "u2");
  return canvas.render();
}

/** Percentile-envelope curve of feasible-iterate cost vs iteration. */
export function envelope(rows: EnsembleRow[]): string {
  if (!rows.length) throw new SchemaError("envelope needs a nonempty ensemble");
  const canvas = new SvgCanvas(640, 440);
  const costs = rows
    .map((r) => r.percentileCost)
    .filter((v): v is number => v !== null);
  if (!costs.length) throw new SchemaError("ensemble has no feasible iterates");
  let lo = Math.min(...costs);
  let hi = Math.max(...costs);
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const x = canvas.xScale(rows[0].iteration, rows[rows.length - 1].iteration);
  const y = canvas.yScale(lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo));
  const pts = rows
    .filter((r) => r.percentileCost !== null)
    .map((r) => [x.apply(r.iteration), y.apply(r.percentileCost as number)] as [number, number]);
  canvas.polyline(pts, {
    stroke: "#d62728",
    "stroke-width": 2,
    class: "envelope-line",
  });
  canvas.axes(x, y, "RTO iteration", "cost percentile");
  return canvas.render();
}

/** Trust-region evolution: one dashed ellipse per iteration row. */
export function trEvolution(rows: RunCsvRow[], grid: GridExport): string {
  if (!rows.length) throw new SchemaError("tr_evolution needs a nonempty run CSV");
  const canvas = new SvgCanvas(640, 560);
  const x = canvas.xScale(grid.bounds.lower[0], grid.bounds.upper[0]);
  const y = canvas.yScale(grid.bounds.lower[1], grid.bounds.upper[1]);
  drawContours(canvas, grid, x, y);
  const span = [
    grid.bounds.upper[0] - grid.bounds.lower[0],
    grid.bounds.upper[1] - grid.bounds.lower[1],
  ];
  const pathPts: Array<[number, number]> = [];
  for (const row of rows) {
    if (row.delta === null || row.u.length < 2) continue;
    const cx = x.apply(row.u[0]);
    const cy = y.apply(row.u[1]);
    pathPts.push([cx, cy]);
    // The radius lives in scaled units; the ellipse axes are its image in
    // the unscaled plane.
    const rx = Math.abs(x.apply(row.u[0] + row.delta * span[0]) - cx);
    const ry = Math.abs(y.apply(row.u[1] + row.delta * span[1]) - cy);
    canvas.ellipse(cx, cy, rx, ry, {
      fill: "none",
      stroke: "#555555",
      "stroke-dasharray": "6 4",
      class: "trust-region",
    });
  }
  canvas.polyline(pathPts, {
    stroke: "#d62728",
    "stroke-width": 1.2,
    class: "run-path",
  });
  canvas.star(x.apply(grid.optimum.u[0]), y.apply(grid.optimum.u[1]), 8, {
    fill: "#1f77b4",
    class: "optimum-star",
  });
  canvas.axes(x, y, "u1", "u2");
  return canvas.render();
}

/**
 * Final-iteration input profiles (stacked panels, one per control channel)
 * with a min/max envelope across runs and each run as a dashed staircase.
 * The control vector is channel-major: [I_1..I_S, F_1..F_S].
 */
export function inputProfiles(runs: RunRecord[]): string {
  if (!runs.length) throw new SchemaError("input_profiles needs >= 1 run");
  const nU = runs[0].final_center_unscaled.length;
  if (nU % 2 !== 0) {
    throw new SchemaError("expected an even number of stage controls");
  }
  const stages = nU / 2;
  const channels = [
    { name: "light intensity I", offset: 0 },
    { name: "nitrate inflow F_N", offset: stages },
  ];
  const panelH = 250;
  const canvas = new SvgCanvas(640, panelH * channels.length + 40);
  channels.forEach((channel, ci) => {
    const top = 20 + ci * panelH;
    const profiles = runs.map((r) =>
      r.final_center_unscaled.slice(channel.offset, channel.offset + stages),
    );
    const lo = Math.min(...profiles.flat());
    const hi = Math.max(...profiles.flat());
    const pad = 0.08 * (hi - lo || 1);
    const x = canvas.xScale(0, stages);
    const y = new LinearScale(lo - pad, hi + pad, top + panelH - 36, top + 12);
    const staircase = (profile: number[]): Array<[number, number]> => {
      const pts: Array<[number, number]> = [];
      profile.forEach((v, s) => {
        pts.push([x.apply(s), y.apply(v)]);
        pts.push([x.apply(s + 1), y.apply(v)]);
      });
      return pts;
    };
    // Min/max envelope across runs, then the individual dashed profiles.
    const minP = Array.from({ length: stages }, (_, s) =>
      Math.min(...profiles.map((p) => p[s])),
    );
    const maxP = Array.from({ length: stages }, (_, s) =>
      Math.max(...profiles.map((p) => p[s])),
    );
    const band = [
      ...staircase(maxP),
      ...staircase(minP).reverse(),
    ]
      .map(([a, b]) => `${a},${b}`)
      .join(" ");
    canvas.raw(
      `<polygon points="${band}" fill="#1f77b4" fill-opacity="0.18" ` +
        `stroke="none" class="profile-band"/>`,
    );
    for (const profile of profiles) {
      canvas.polyline(staircase(profile), {
        stroke: "#1f77b4",
        "stroke-dasharray": "5 3",
        "stroke-width": 1.2,
        class: "profile-line",
      });
    }
    canvas.text(canvas.margin.left, top + 4, channel.name, {
      "font-size": 13,
      class: "panel-title",
    });
    // Panel frame and stage ticks.
    const y0 = top + panelH - 36;
    canvas.raw(
      `<line x1="${canvas.margin.left}" y1="${y0}" ` +
        `x2="${canvas.margin.left + canvas.innerWidth}" y2="${y0}" stroke="black"/>`,
    );
    for (let s = 0; s <= stages; s += 1) {
      const px = x.apply(s);
      canvas.raw(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 4}" stroke="black"/>`);
      canvas.text(px, y0 + 16, String(s), { "text-anchor": "middle", "font-size": 10 });
    }
  });
  return canvas.render();
}
