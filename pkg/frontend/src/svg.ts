/** Minimal SVG canvas with linear data-to-pixel scales. */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

const DEFAULT_MARGIN: Margin = { top: 24, right: 16, bottom: 42, left: 56 };

function fmt(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toPrecision(6);
}

export class LinearScale {
  constructor(
    readonly d0: number,
    readonly d1: number,
    readonly r0: number,
    readonly r1: number,
  ) {}

  apply(v: number): number {
    const t = (v - this.d0) / (this.d1 - this.d0 || 1);
    return this.r0 + t * (this.r1 - this.r0);
  }

  ticks(n = 5): number[] {
    const span = this.d1 - this.d0;
    if (span === 0) return [this.d0];
    const step = Math.pow(10, Math.floor(Math.log10(Math.abs(span) / n)));
    const err = (Math.abs(span) / n) / step;
    const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
    const s = step * mult * Math.sign(span);
    const start = Math.ceil(Math.min(this.d0, this.d1) / Math.abs(s));
    const out: number[] = [];
    for (let v = start * Math.abs(s); v <= Math.max(this.d0, this.d1) + 1e-12; v += Math.abs(s)) {
      out.push(Number(v.toPrecision(12)));
    }
    return out;
  }
}

export class SvgCanvas {
  private parts: string[] = [];
  readonly margin: Margin;

  constructor(
    readonly width = 640,
    readonly height = 480,
    margin: Partial<Margin> = {},
  ) {
    this.margin = { ...DEFAULT_MARGIN, ...margin };
  }

  get innerWidth(): number {
    return this.width - this.margin.left - this.margin.right;
  }

  get innerHeight(): number {
    return this.height - this.margin.top - this.margin.bottom;
  }

  xScale(d0: number, d1: number): LinearScale {
    return new LinearScale(d0, d1, this.margin.left, this.margin.left + this.innerWidth);
  }

  yScale(d0: number, d1: number): LinearScale {
    // SVG y grows downward; map domain minimum to the bottom.
    return new LinearScale(d0, d1, this.margin.top + this.innerHeight, this.margin.top);
  }

  raw(element: string): void {
    this.parts.push(element);
  }

  polyline(points: Array<[number, number]>, attrs: Record<string, string | number>): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.raw(`<polyline points="${pts}" ${attrString({ fill: "none", ...attrs })}/>`);
  }

  path(d: string, attrs: Record<string, string | number>): void {
    this.raw(`<path d="${d}" ${attrString(attrs)}/>`);
  }

  circle(cx: number, cy: number, r: number, attrs: Record<string, string | number> = {}): void {
    this.raw(`<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${fmt(r)}" ${attrString(attrs)}/>`);
  }

  ellipse(cx: number, cy: number, rx: number, ry: number, attrs: Record<string, string | number> = {}): void {
    this.raw(
      `<ellipse cx="${fmt(cx)}" cy="${fmt(cy)}" rx="${fmt(rx)}" ry="${fmt(ry)}" ${attrString(attrs)}/>`,
    );
  }

  text(x: number, y: number, content: string, attrs: Record<string, string | number> = {}): void {
    this.raw(`<text x="${fmt(x)}" y="${fmt(y)}" ${attrString(attrs)}>${escapeXml(content)}</text>`);
  }

  /** Five-pointed star marker (the optimum in the iterate plots). */
  star(cx: number, cy: number, r: number, attrs: Record<string, string | number> = {}): void {
    const pts: string[] = [];
    for (let i = 0; i < 10; i += 1) {
      const rad = i % 2 === 0 ? r : r * 0.45;
      const a = -Math.PI / 2 + (i * Math.PI) / 5;
      pts.push(`${fmt(cx + rad * Math.cos(a))},${fmt(cy + rad * Math.sin(a))}`);
    }
    this.raw(`<polygon points="${pts.join(" ")}" ${attrString(attrs)}/>`);
  }

  axes(x: LinearScale, y: LinearScale, xLabel: string, yLabel: string): void {
    const x0 = this.margin.left;
    const x1 = this.margin.left + this.innerWidth;
    const y0 = this.margin.top + this.innerHeight;
    const y1 = this.margin.top;
    this.raw(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`);
    this.raw(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`);
    for (const t of x.ticks()) {
      const px = x.apply(t);
      this.raw(`<line x1="${fmt(px)}" y1="${y0}" x2="${fmt(px)}" y2="${y0 + 5}" stroke="black"/>`);
      this.text(px, y0 + 18, String(t), { "text-anchor": "middle", "font-size": 11 });
    }
    for (const t of y.ticks()) {
      const py = y.apply(t);
      this.raw(`<line x1="${x0 - 5}" y1="${fmt(py)}" x2="${x0}" y2="${fmt(py)}" stroke="black"/>`);
      this.text(x0 - 8, py + 4, String(t), { "text-anchor": "end", "font-size": 11 });
    }
    this.text(x0 + this.innerWidth / 2, this.height - 8, xLabel, {
      "text-anchor": "middle",
      "font-size": 13,
    });
    this.raw(
      `<text x="14" y="${this.margin.top + this.innerHeight / 2}" text-anchor="middle" font-size="13" ` +
        `transform="rotate(-90 14 ${this.margin.top + this.innerHeight / 2})">${escapeXml(yLabel)}</text>`,
    );
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
      `viewBox="0 0 ${this.width} ${this.height}">\n<rect width="100%" height="100%" fill="white"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

function attrString(attrs: Record<string, string | number>): string {
  return Object.entries(attrs)
    .map(([k, v]) => `${k}="${v}"`)
    .join(" ");
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}
