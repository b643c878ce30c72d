/**
 * The five figure kinds, all rendered through the shared Draw interface so
 * SVG and PNG come from the same code path. Rendering never mutates or
 * reorders the parsed data; axis limits derive from the data unless a
 * figure states otherwise.
 */

import {
  Draw,
  LegendItem,
  PALETTE,
  Panel,
  SvgDraw,
  TextStyle,
  Style,
  extent,
  legend,
  niceTicks,
} from "./chart.js";
import { CsvTable, SchemaError, distinct, numbersOf, requireColumns } from "./csv.js";
import { RasterDraw } from "./raster.js";

export type FigureKind =
  | "spectra"
  | "localization3d"
  | "error-curves"
  | "convergence"
  | "se-tradeoff";

export const FIGURE_KINDS: FigureKind[] = [
  "spectra", "localization3d", "error-curves", "convergence", "se-tradeoff",
];

export interface NamedTable {
  name: string;
  table: CsvTable;
}

export interface FigureOptions {
  metric?: string;
  title?: string;
}

class ScaledDraw implements Draw {
  constructor(private inner: Draw, private s: number) {}

  get width(): number {
    return this.inner.width / this.s;
  }

  get height(): number {
    return this.inner.height / this.s;
  }

  polyline(pts: Array<[number, number]>, style: Style): void {
    this.inner.polyline(
      pts.map(([x, y]) => [x * this.s, y * this.s] as [number, number]),
      { ...style, width: (style.width ?? 1) * this.s }
    );
  }

  circle(x: number, y: number, r: number, style: Style): void {
    this.inner.circle(x * this.s, y * this.s, r * this.s, {
      ...style,
      width: (style.width ?? 1) * this.s,
    });
  }

  rect(x: number, y: number, w: number, h: number, style: Style): void {
    this.inner.rect(x * this.s, y * this.s, w * this.s, h * this.s, {
      ...style,
      width: (style.width ?? 1) * this.s,
    });
  }

  text(x: number, y: number, str: string, t: TextStyle = {}): void {
    this.inner.text(x * this.s, y * this.s, str, { ...t, size: (t.size ?? 11) * this.s });
  }
}

const PANEL_UNITS: Record<string, string> = {
  range: "range [m]",
  velocity: "velocity [m/s]",
  azimuth: "azimuth [deg]",
  elevation: "elevation [deg]",
};

function drawSpectra(d: Draw, inputs: NamedTable[]): void {
  const { name, table } = inputs[0];
  requireColumns(table, name, ["target", "x", "y"], ["panel"]);
  const panels = ["range", "velocity", "azimuth", "elevation"];
  const targets = distinct<number>(table, "target");
  const W = d.width / 2;
  const H = d.height / 2;
  panels.forEach((panelName, pi) => {
    const rows = table.rows.filter((r) => r.panel === panelName);
    if (rows.length === 0) {
      throw new SchemaError(`${name}: no rows for panel '${panelName}'`);
    }
    const x0 = 55 + (pi % 2) * W;
    const y0 = 30 + Math.floor(pi / 2) * H;
    const xs = rows.map((r) => r.x as number);
    const peak = Math.max(...rows.map((r) => Math.abs(r.y as number)), 1e-300);
    const panel = new Panel({
      x0, y0, w: W - 75, h: H - 70,
      xlim: extent(xs, 0),
      ylim: [0, 1.05],
      xLabel: PANEL_UNITS[panelName],
      yLabel: pi % 2 === 0 ? "normalized response" : undefined,
      title: panelName,
    });
    panel.axes(d);
    targets.forEach((t, ti) => {
      const sub = rows.filter((r) => r.target === t);
      panel.series(
        d,
        sub.map((r) => r.x as number),
        sub.map((r) => (Math.abs(r.y as number)) / peak),
        { stroke: PALETTE[ti % PALETTE.length], width: 1.2 }
      );
    });
  });
  legend(
    d, d.width - 110, 18,
    targets.map((t, ti) => ({ label: `target ${t}`, color: PALETTE[ti % PALETTE.length] }))
  );
}

function toCart(r: number, azDeg: number, elDeg: number): [number, number, number] {
  const az = (azDeg * Math.PI) / 180;
  const el = (elDeg * Math.PI) / 180;
  return [r * Math.sin(el) * Math.cos(az), r * Math.sin(el) * Math.sin(az), r * Math.cos(el)];
}

function drawLocalization(d: Draw, inputs: NamedTable[]): void {
  const { name, table } = inputs[0];
  requireColumns(table, name, [
    "target", "r", "az_deg", "el_deg", "r_true", "az_true_deg", "el_true_deg",
  ]);
  const est = table.rows.map((r) =>
    toCart(r.r as number, r.az_deg as number, r.el_deg as number)
  );
  const tru = table.rows.map((r) =>
    toCart(r.r_true as number, r.az_true_deg as number, r.el_true_deg as number)
  );
  // oblique projection for the left panel: u along x with y receding
  const cos30 = Math.cos(Math.PI / 6);
  const proj = ([x, y, z]: [number, number, number]): [number, number] =>
    [x + 0.5 * cos30 * y, z + 0.5 * 0.5 * y];
  const pu = [...est, ...tru].map(proj);
  const half = d.width / 2;
  const left = new Panel({
    x0: 60, y0: 40, w: half - 95, h: d.height - 110,
    xlim: extent(pu.map((p) => p[0]), 0.15),
    ylim: extent(pu.map((p) => p[1]), 0.15),
    xLabel: "x + y/2 [m] (oblique)",
    yLabel: "z [m]",
    title: "3-D localization",
  });
  left.axes(d);
  const right = new Panel({
    x0: half + 60, y0: 40, w: half - 95, h: d.height - 110,
    xlim: extent([...est, ...tru].map((p) => p[0]), 0.15),
    ylim: extent([...est, ...tru].map((p) => p[1]), 0.15),
    xLabel: "x [m]",
    yLabel: "y [m]",
    title: "top view",
  });
  right.axes(d);
  table.rows.forEach((row, i) => {
    const color = PALETTE[i % PALETTE.length];
    const [ue, ve] = proj(est[i]);
    const [ut, vt] = proj(tru[i]);
    left.markers(d, [ut], [vt], "o", color);
    left.markers(d, [ue], [ve], "x", color);
    right.markers(d, [tru[i][0]], [tru[i][1]], "o", color);
    right.markers(d, [est[i][0]], [est[i][1]], "x", color);
  });
  legend(d, d.width - 130, 20, [
    { label: "truth", color: "#444", marker: "o" },
    { label: "estimate", color: "#444", marker: "x" },
  ]);
}

function decadeTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let k = Math.ceil(lo); k <= Math.floor(hi); k++) ticks.push(k);
  return ticks.length ? ticks : [Math.round((lo + hi) / 2)];
}

function drawErrorCurves(d: Draw, inputs: NamedTable[], opts: FigureOptions): void {
  const metric = opts.metric ?? "pos_err_m";
  const { name, table } = inputs[0];
  requireColumns(table, name, ["snr_db", "velocity_mps", metric], ["estimator"]);
  const estimators = distinct<string>(table, "estimator");
  const velocities = distinct<number>(table, "velocity_mps");
  const logs = table.rows.map((r) => Math.log10(Math.max(r[metric] as number, 1e-9)));
  const ylim = extent(logs, 0.08);
  const panel = new Panel({
    x0: 70, y0: 40, w: d.width - 260, h: d.height - 105,
    xlim: extent(numbersOf(table, "snr_db"), 0.02),
    ylim,
    xLabel: "receive SNR [dB]",
    yLabel: `${metric} (log10)`,
    title: opts.title ?? "estimation error vs SNR",
  });
  panel.o.xTicks = distinct<number>(table, "snr_db");
  panel.axes(d);
  // decade labels on top of the log-scale axis
  for (const k of decadeTicks(ylim[0], ylim[1])) {
    d.text(panel.o.x0 + 4, panel.py(k) - 2, `1e${k}`, { size: 9, color: "#777" });
  }
  const items: LegendItem[] = [];
  estimators.forEach((est, ei) => {
    const dash = ei === 0 ? undefined : [5, 4];
    velocities.forEach((v, vi) => {
      const rows = table.rows.filter(
        (r) => r.estimator === est && r.velocity_mps === v
      );
      const xs = rows.map((r) => r.snr_db as number);
      const ys = rows.map((r) => Math.log10(Math.max(r[metric] as number, 1e-9)));
      const color = PALETTE[vi % PALETTE.length];
      panel.series(d, xs, ys, { stroke: color, dash, width: 1.4 });
      panel.markers(d, xs, ys, ei === 0 ? "dot" : "o", color, 3);
    });
    items.push({
      label: `${est}${ei === 0 ? " (solid)" : " (dashed)"}`,
      color: "#444",
      dash,
    });
  });
  velocities.forEach((v, vi) =>
    items.push({ label: `v = ${v} m/s`, color: PALETTE[vi % PALETTE.length] })
  );
  legend(d, d.width - 175, 45, items);
}

function drawConvergence(d: Draw, inputs: NamedTable[], opts: FigureOptions): void {
  const curves = inputs.map(({ name, table }) => {
    requireColumns(table, name, ["iter", "nmse_db"]);
    const byIter = new Map<number, number>();
    for (const r of table.rows) byIter.set(r.iter as number, r.nmse_db as number);
    const iters = [...byIter.keys()];
    return {
      label: table.meta.estimator ? `${name} (${table.meta.estimator})` : name,
      xs: iters,
      ys: iters.map((i) => byIter.get(i)!),
    };
  });
  const allX = curves.flatMap((c) => c.xs);
  const allY = curves.flatMap((c) => c.ys);
  const panel = new Panel({
    x0: 70, y0: 40, w: d.width - 250, h: d.height - 105,
    xlim: [Math.min(...allX), Math.max(...allX)],
    ylim: extent(allY, 0.1),
    xLabel: "sweep",
    yLabel: "normalized residual [dB]",
    title: opts.title ?? "convergence",
  });
  panel.axes(d);
  curves.forEach((c, i) => {
    const color = PALETTE[i % PALETTE.length];
    panel.series(d, c.xs, c.ys, { stroke: color, width: 1.5 });
    panel.markers(d, c.xs, c.ys, "dot", color, 3);
  });
  legend(
    d, d.width - 170, 45,
    curves.map((c, i) => ({ label: c.label, color: PALETTE[i % PALETTE.length] }))
  );
}

function drawSeTradeoff(d: Draw, inputs: NamedTable[]): void {
  const { name, table } = inputs[0];
  requireColumns(table, name, ["psen", "snr_db", "angle_err_deg", "mean_sinr_db", "c_paper", "se_avg"]);
  const psen = numbersOf(table, "psen");
  const half = d.width / 2;
  const xlim: [number, number] = [Math.min(...psen), Math.max(...psen)];
  const err = numbersOf(table, "angle_err_deg");
  const left = new Panel({
    x0: 65, y0: 40, w: half - 100, h: d.height - 105,
    xlim, ylim: extent([0, ...err], 0.08),
    xLabel: "pilot length", yLabel: "angle error [deg]",
    title: "estimation vs pilot budget", xLog2: true, xTicks: psen,
  });
  left.axes(d);
  left.series(d, psen, err, { stroke: PALETTE[0], width: 1.5 });
  left.markers(d, psen, err, "dot", PALETTE[0], 3);

  const se = numbersOf(table, "se_avg");
  const right = new Panel({
    x0: half + 65, y0: 40, w: half - 100, h: d.height - 105,
    xlim, ylim: extent([0, ...se], 0.08),
    xLabel: "pilot length", yLabel: "avg spectral efficiency",
    title: "rate vs pilot budget", xLog2: true, xTicks: psen,
  });
  right.axes(d);
  right.series(d, psen, se, { stroke: PALETTE[2], width: 1.5 });
  right.markers(d, psen, se, "dot", PALETTE[2], 3);
  const peak = se.indexOf(Math.max(...se));
  right.markers(d, [psen[peak]], [se[peak]], "o", PALETTE[1], 6);
  d.text(right.px(psen[peak]), right.py(se[peak]) - 12, "peak", {
    anchor: "middle", size: 10, color: PALETTE[1],
  });
}

const SIZES: Record<FigureKind, [number, number]> = {
  spectra: [860, 560],
  localization3d: [860, 460],
  "error-curves": [760, 440],
  convergence: [720, 420],
  "se-tradeoff": [860, 420],
};

function dispatch(kind: FigureKind, d: Draw, inputs: NamedTable[], opts: FigureOptions): void {
  if (inputs.length === 0) throw new SchemaError("no input tables");
  switch (kind) {
    case "spectra":
      return drawSpectra(d, inputs);
    case "localization3d":
      return drawLocalization(d, inputs);
    case "error-curves":
      return drawErrorCurves(d, inputs, opts);
    case "convergence":
      return drawConvergence(d, inputs, opts);
    case "se-tradeoff":
      return drawSeTradeoff(d, inputs);
  }
}

export function renderSvg(kind: FigureKind, inputs: NamedTable[], opts: FigureOptions = {}): string {
  const [w, h] = SIZES[kind];
  const svg = new SvgDraw(w, h);
  dispatch(kind, svg, inputs, opts);
  return svg.toString();
}

export function renderPng(kind: FigureKind, inputs: NamedTable[], opts: FigureOptions = {}): Buffer {
  const [w, h] = SIZES[kind];
  const scale = 2;
  const raster = new RasterDraw(w * scale, h * scale);
  dispatch(kind, new ScaledDraw(raster, scale), inputs, opts);
  return raster.toPng();
}
