#!/usr/bin/env node
/**
 * Figure renderer for the vortex-ISAC CSV outputs.
 *
 * Usage:
 *   vortex-isac-figures <kind> --input a.csv[,b.csv...] --out figure.svg
 *                       [--format svg|png] [--metric col] [--title text]
 *
 * Kinds: spectra | localization3d | error-curves | convergence | se-tradeoff
 *
 * Inputs per kind: spectra.csv (spectra), estimates.csv (localization3d),
 * mc_summary.csv (error-curves), one or more trace.csv (convergence),
 * pilot_sweep.csv (se-tradeoff).
 *
 * Exits non-zero without writing anything when an input violates its
 * documented schema; the diagnostic names the offending column(s).
 */

import { readFileSync, writeFileSync } from "node:fs";
import * as path from "node:path";

import { SchemaError, parseCsv } from "./csv.js";
import {
  FIGURE_KINDS,
  FigureKind,
  NamedTable,
  renderPng,
  renderSvg,
} from "./figures.js";

interface Args {
  kind: FigureKind;
  inputs: string[];
  out: string;
  format: "svg" | "png";
  metric?: string;
  title?: string;
}

function usage(): string {
  return (
    "usage: vortex-isac-figures <kind> --input <csv[,csv...]> --out <file> " +
    "[--format svg|png] [--metric col] [--title text]\n" +
    `kinds: ${FIGURE_KINDS.join(" | ")}`
  );
}

export function parseArgs(argv: string[]): Args {
  if (argv.length === 0) throw new Error(usage());
  const kind = argv[0] as FigureKind;
  if (!FIGURE_KINDS.includes(kind)) {
    throw new Error(`unknown figure kind '${argv[0]}'\n${usage()}`);
  }
  const args: Partial<Args> = { kind, format: "svg" };
  for (let i = 1; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (value === undefined) throw new Error(`missing value for ${flag}\n${usage()}`);
    if (flag === "--input") args.inputs = value.split(",").map((s) => s.trim());
    else if (flag === "--out") args.out = value;
    else if (flag === "--format") {
      if (value !== "svg" && value !== "png") throw new Error(`unknown format '${value}'`);
      args.format = value;
    } else if (flag === "--metric") args.metric = value;
    else if (flag === "--title") args.title = value;
    else throw new Error(`unknown flag '${flag}'\n${usage()}`);
  }
  if (!args.inputs || args.inputs.length === 0) throw new Error(`--input is required\n${usage()}`);
  if (!args.out) throw new Error(`--out is required\n${usage()}`);
  return args as Args;
}

export function run(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (e) {
    console.error((e as Error).message);
    return 2;
  }
  try {
    const tables: NamedTable[] = args.inputs.map((p) => ({
      name: path.basename(p),
      table: parseCsv(readFileSync(p, "utf-8"), path.basename(p)),
    }));
    const opts = { metric: args.metric, title: args.title };
    if (args.format === "png") {
      writeFileSync(args.out, renderPng(args.kind, tables, opts));
    } else {
      writeFileSync(args.out, renderSvg(args.kind, tables, opts));
    }
    console.log(args.out);
    return 0;
  } catch (e) {
    if (e instanceof SchemaError) {
      console.error(`schema error: ${e.message}`);
      return 1;
    }
    if ((e as NodeJS.ErrnoException).code === "ENOENT") {
      console.error(`missing input: ${(e as Error).message}`);
      return 1;
    }
    throw e;
  }
}

const isMain =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${path.resolve(process.argv[1])}`).href;
if (isMain) {
  process.exit(run(process.argv.slice(2)));
}
