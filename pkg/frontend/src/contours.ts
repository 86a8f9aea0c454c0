/** Contour extraction from grid exports (marching squares via d3-contour). */
import { contours } from "d3-contour";
import { GridExport } from "./schema.js";
import { LinearScale, SvgCanvas } from "./svg.js";

function flatten(grid: number[][]): { values: number[]; n1: number; n2: number } {
  // Grid export is cost[i][j] with i indexing u1 and j indexing u2; d3 wants
  // row-major over (x=column, y=row), so transpose to [j][i].
  const n1 = grid.length;
  const n2 = grid[0].length;
  const values = new Array<number>(n1 * n2);
  for (let j = 0; j < n2; j += 1) {
    for (let i = 0; i < n1; i += 1) {
      values[j * n1 + i] = grid[i][j];
    }
  }
  return { values, n1, n2 };
}

function levelRange(values: number[], nLevels: number): number[] {
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const out: number[] = [];
  for (let i = 1; i <= nLevels; i += 1) {
    out.push(lo + ((hi - lo) * i) / (nLevels + 1));
  }
  return out;
}

function toPath(
  polygons: Array<Array<Array<[number, number]>>>,
  grid: GridExport,
  x: LinearScale,
  y: LinearScale,
): string {
  // d3-contour coordinates are in grid-index units.
  const n1 = grid.u1.length;
  const n2 = grid.u2.length;
  const sx = (gi: number) =>
    x.apply(grid.u1[0] + (gi / (n1 - 1)) * (grid.u1[n1 - 1] - grid.u1[0]));
  const sy = (gj: number) =>
    y.apply(grid.u2[0] + (gj / (n2 - 1)) * (grid.u2[n2 - 1] - grid.u2[0]));
  const parts: string[] = [];
  for (const polygon of polygons) {
    for (const ring of polygon) {
      const coords = ring.map(([gi, gj]) => `${sx(gi)},${sy(gj)}`);
      parts.push(`M${coords.join("L")}Z`);
    }
  }
  return parts.join("");
}

/** Thin multicolored cost contours plus thick black constraint boundaries. */
export function drawContours(
  canvas: SvgCanvas,
  grid: GridExport,
  x: LinearScale,
  y: LinearScale,
  nLevels = 12,
): void {
  const { values, n1, n2 } = flatten(grid.cost);
  const gen = contours().size([n1, n2]);
  const palette = ["#4c78a8", "#72b7b2", "#54a24b", "#eeca3b", "#f58518", "#e45756"];
  levelRange(values, nLevels).forEach((level, idx) => {
    const geo = gen.contour(values, level);
    const d = toPath(geo.coordinates as never, grid, x, y);
    if (d) {
      canvas.path(d, {
        fill: "none",
        stroke: palette[idx % palette.length],
        "stroke-width": 0.8,
        class: "cost-contour",
      });
    }
  });
  for (const constraint of grid.constraints) {
    const flat = flatten(constraint);
    const geo = gen.contour(flat.values, 0.0);
    const d = toPath(geo.coordinates as never, grid, x, y);
    if (d) {
      canvas.path(d, {
        fill: "none",
        stroke: "black",
        "stroke-width": 2.0,
        class: "constraint-boundary",
      });
    }
  }
}
