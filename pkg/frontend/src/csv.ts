/**
 * CSV reading for the harness outputs.
 *
 * Every file starts with a `# key=value ...` metadata comment, then a header
 * row, then data rows. Parsing preserves row order; schema checks report
 * exactly which columns are missing or malformed.
 */

export interface CsvTable {
  meta: Record<string, string>;
  columns: string[];
  rows: Record<string, number | string>[];
}

export class SchemaError extends Error {}

const NUMERIC = /^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$/;

export function parseCsv(text: string, source = "<csv>"): CsvTable {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  const meta: Record<string, string> = {};
  let i = 0;
  while (i < lines.length && lines[i].startsWith("#")) {
    for (const kv of lines[i].slice(1).trim().split(/\s+/)) {
      const eq = kv.indexOf("=");
      if (eq > 0) meta[kv.slice(0, eq)] = kv.slice(eq + 1);
    }
    i += 1;
  }
  if (i >= lines.length) {
    throw new SchemaError(`${source}: no header row found`);
  }
  const columns = lines[i].split(",").map((c) => c.trim());
  const rows: Record<string, number | string>[] = [];
  for (let j = i + 1; j < lines.length; j++) {
    const cells = lines[j].split(",");
    if (cells.length !== columns.length) {
      throw new SchemaError(
        `${source}: row ${j + 1} has ${cells.length} cells, expected ${columns.length} ` +
          `(columns: ${columns.join(", ")})`
      );
    }
    const row: Record<string, number | string> = {};
    for (let c = 0; c < columns.length; c++) {
      const cell = cells[c].trim();
      row[columns[c]] = NUMERIC.test(cell) ? Number(cell) : cell;
    }
    rows.push(row);
  }
  return { meta, columns, rows };
}

/** Check required columns exist and numeric ones hold numbers everywhere. */
export function requireColumns(
  table: CsvTable,
  source: string,
  numeric: string[],
  textual: string[] = []
): void {
  const missing = [...numeric, ...textual].filter((c) => !table.columns.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(
      `${source}: missing column(s) ${missing.join(", ")} ` +
        `(found: ${table.columns.join(", ")})`
    );
  }
  if (table.rows.length === 0) {
    throw new SchemaError(`${source}: no data rows`);
  }
  for (const col of numeric) {
    const bad = table.rows.findIndex((r) => typeof r[col] !== "number");
    if (bad >= 0) {
      throw new SchemaError(
        `${source}: column '${col}' is not numeric at data row ${bad + 1} ` +
          `(value: ${JSON.stringify(table.rows[bad][col])})`
      );
    }
  }
}

export function numbersOf(table: CsvTable, col: string): number[] {
  return table.rows.map((r) => r[col] as number);
}

/** Distinct values of a column in first-appearance order. */
export function distinct<T extends number | string>(table: CsvTable, col: string): T[] {
  const seen = new Set<number | string>();
  const out: T[] = [];
  for (const r of table.rows) {
    const v = r[col];
    if (!seen.has(v)) {
      seen.add(v);
      out.push(v as T);
    }
  }
  return out;
}
