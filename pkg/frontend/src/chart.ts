/**
 * Minimal chart layer: a drawing interface with an SVG backend plus the
 * panel/axis/series helpers shared by every figure kind. The PNG backend in
 * raster.ts implements the same interface, so figures are format-agnostic.
 */

export interface Style {
  stroke?: string;
  width?: number;
  dash?: number[];
  fill?: string;
  opacity?: number;
}

export interface TextStyle {
  size?: number;
  anchor?: "start" | "middle" | "end";
  color?: string;
  rotate?: 0 | -90;
  bold?: boolean;
}

export interface Draw {
  readonly width: number;
  readonly height: number;
  polyline(pts: Array<[number, number]>, s: Style): void;
  circle(x: number, y: number, r: number, s: Style): void;
  rect(x: number, y: number, w: number, h: number, s: Style): void;
  text(x: number, y: number, str: string, t?: TextStyle): void;
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export class SvgDraw implements Draw {
  private parts: string[] = [];

  constructor(public readonly width: number, public readonly height: number) {}

  private strokeAttrs(s: Style): string {
    const a: string[] = [];
    a.push(`stroke="${s.stroke ?? "none"}"`);
    if (s.stroke) a.push(`stroke-width="${s.width ?? 1}"`);
    if (s.dash && s.dash.length) a.push(`stroke-dasharray="${s.dash.join(",")}"`);
    a.push(`fill="${s.fill ?? "none"}"`);
    if (s.opacity !== undefined) a.push(`opacity="${s.opacity}"`);
    return a.join(" ");
  }

  polyline(pts: Array<[number, number]>, s: Style): void {
    if (pts.length < 2) return;
    const d = pts.map(([x, y]) => `${x.toFixed(2)},${y.toFixed(2)}`).join(" ");
    this.parts.push(`<polyline points="${d}" ${this.strokeAttrs(s)}/>`);
  }

  circle(x: number, y: number, r: number, s: Style): void {
    this.parts.push(
      `<circle cx="${x.toFixed(2)}" cy="${y.toFixed(2)}" r="${r}" ${this.strokeAttrs(s)}/>`
    );
  }

  rect(x: number, y: number, w: number, h: number, s: Style): void {
    this.parts.push(
      `<rect x="${x.toFixed(2)}" y="${y.toFixed(2)}" width="${w.toFixed(2)}" ` +
        `height="${h.toFixed(2)}" ${this.strokeAttrs(s)}/>`
    );
  }

  text(x: number, y: number, str: string, t: TextStyle = {}): void {
    const size = t.size ?? 11;
    const anchor = t.anchor ?? "start";
    const transform = t.rotate ? ` transform="rotate(${t.rotate} ${x} ${y})"` : "";
    const weight = t.bold ? ` font-weight="bold"` : "";
    this.parts.push(
      `<text x="${x.toFixed(2)}" y="${y.toFixed(2)}" font-family="Helvetica,Arial,sans-serif" ` +
        `font-size="${size}" text-anchor="${anchor}" fill="${t.color ?? "#222"}"${weight}${transform}>` +
        `${esc(str)}</text>`
    );
  }

  toString(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
      `viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<rect x="0" y="0" width="${this.width}" height="${this.height}" fill="#ffffff"/>\n` +
      this.parts.join("\n") +
      `\n</svg>\n`
    );
  }
}

export const PALETTE = [
  "#1f6feb", "#d1242f", "#1a7f37", "#9a6700", "#8250df",
  "#bf3989", "#1b7c83", "#57606a",
];

export function niceTicks(min: number, max: number, count = 5): number[] {
  if (!(max > min)) return [min];
  const rough = (max - min) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const step = [1, 2, 2.5, 5, 10].map((m) => m * mag).find((n) => n >= rough) ?? rough;
  const ticks: number[] = [];
  for (let v = Math.ceil(min / step) * step; v <= max + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

export function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 10000 || a < 0.001) return v.toExponential(0);
  return String(Number(v.toPrecision(4)));
}

export interface PanelOpts {
  x0: number;
  y0: number;
  w: number;
  h: number;
  xlim: [number, number];
  ylim: [number, number];
  xLabel?: string;
  yLabel?: string;
  title?: string;
  xLog2?: boolean; // ticks at the data's powers-of-two style positions
  xTicks?: number[];
}

/** One plot area with data-space projection and drawn axes. */
export class Panel {
  constructor(public o: PanelOpts) {
    if (o.xlim[0] === o.xlim[1]) o.xlim = [o.xlim[0] - 1, o.xlim[1] + 1];
    if (o.ylim[0] === o.ylim[1]) o.ylim = [o.ylim[0] - 1, o.ylim[1] + 1];
  }

  px(x: number): number {
    const { x0, w, xlim, xLog2 } = this.o;
    const t = xLog2
      ? (Math.log2(x) - Math.log2(xlim[0])) / (Math.log2(xlim[1]) - Math.log2(xlim[0]))
      : (x - xlim[0]) / (xlim[1] - xlim[0]);
    return x0 + t * w;
  }

  py(y: number): number {
    const { y0, h, ylim } = this.o;
    return y0 + h - ((y - ylim[0]) / (ylim[1] - ylim[0])) * h;
  }

  point(x: number, y: number): [number, number] {
    return [this.px(x), this.py(y)];
  }

  axes(d: Draw): void {
    const { x0, y0, w, h, xlim, ylim, xLabel, yLabel, title } = this.o;
    d.rect(x0, y0, w, h, { stroke: "#444", width: 1 });
    const xt = this.o.xTicks ?? (this.o.xLog2 ? [] : niceTicks(xlim[0], xlim[1]));
    for (const v of xt) {
      const x = this.px(v);
      d.polyline([[x, y0 + h], [x, y0 + h + 4]], { stroke: "#444", width: 1 });
      d.polyline([[x, y0], [x, y0 + h]], { stroke: "#ddd", width: 0.5 });
      d.text(x, y0 + h + 15, fmtTick(v), { anchor: "middle", size: 10 });
    }
    for (const v of niceTicks(ylim[0], ylim[1])) {
      const y = this.py(v);
      d.polyline([[x0 - 4, y], [x0, y]], { stroke: "#444", width: 1 });
      d.polyline([[x0, y], [x0 + w, y]], { stroke: "#ddd", width: 0.5 });
      d.text(x0 - 6, y + 3, fmtTick(v), { anchor: "end", size: 10 });
    }
    if (xLabel) d.text(x0 + w / 2, y0 + h + 30, xLabel, { anchor: "middle", size: 11 });
    if (yLabel) {
      d.text(x0 - 40, y0 + h / 2, yLabel, { anchor: "middle", size: 11, rotate: -90 });
    }
    if (title) d.text(x0 + w / 2, y0 - 8, title, { anchor: "middle", size: 12, bold: true });
  }

  series(d: Draw, xs: number[], ys: number[], s: Style): void {
    const pts: Array<[number, number]> = [];
    for (let i = 0; i < xs.length; i++) {
      if (Number.isFinite(xs[i]) && Number.isFinite(ys[i])) {
        pts.push(this.point(xs[i], ys[i]));
      }
    }
    d.polyline(pts, { width: 1.5, ...s });
  }

  markers(d: Draw, xs: number[], ys: number[], kind: "o" | "x" | "dot", color: string, r = 3.5): void {
    for (let i = 0; i < xs.length; i++) {
      if (!Number.isFinite(xs[i]) || !Number.isFinite(ys[i])) continue;
      const [x, y] = this.point(xs[i], ys[i]);
      if (kind === "o") {
        d.circle(x, y, r, { stroke: color, width: 1.5 });
      } else if (kind === "dot") {
        d.circle(x, y, r - 1, { fill: color });
      } else {
        d.polyline([[x - r, y - r], [x + r, y + r]], { stroke: color, width: 1.5 });
        d.polyline([[x - r, y + r], [x + r, y - r]], { stroke: color, width: 1.5 });
      }
    }
  }
}

export interface LegendItem {
  label: string;
  color: string;
  dash?: number[];
  marker?: "o" | "x" | "dot" | "line";
}

export function legend(d: Draw, x: number, y: number, items: LegendItem[]): void {
  let yy = y;
  for (const item of items) {
    const marker = item.marker ?? "line";
    if (marker === "line") {
      d.polyline([[x, yy - 3], [x + 18, yy - 3]], {
        stroke: item.color, width: 1.5, dash: item.dash,
      });
    } else if (marker === "o") {
      d.circle(x + 9, yy - 3, 3.5, { stroke: item.color, width: 1.5 });
    } else if (marker === "dot") {
      d.circle(x + 9, yy - 3, 2.5, { fill: item.color });
    } else {
      d.polyline([[x + 5, yy - 7], [x + 13, yy + 1]], { stroke: item.color, width: 1.5 });
      d.polyline([[x + 5, yy + 1], [x + 13, yy - 7]], { stroke: item.color, width: 1.5 });
    }
    d.text(x + 24, yy, item.label, { size: 10 });
    yy += 14;
  }
}

export function extent(values: number[], padFrac = 0.05): [number, number] {
  const finite = values.filter(Number.isFinite);
  if (finite.length === 0) return [0, 1];
  let lo = Math.min(...finite);
  let hi = Math.max(...finite);
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const pad = (hi - lo) * padFrac;
  return [lo - pad, hi + pad];
}
