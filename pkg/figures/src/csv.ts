/**
 * Parsers for the two CSV artifacts the `quadsmile` CLI reads and writes.
 *
 * Both formats start with `# key=value` metadata lines, followed by one
 * header row naming the columns, followed by numeric data rows.  Curve CSVs
 * are emitted by `quadsmile calibrate` / `quadsmile eval --grid`; quote CSVs
 * are the calibration inputs.
 */

import { readFileSync } from "node:fs";

/** A column-schema problem: missing columns, no rows, non-numeric cells. */
export class SchemaMismatchError extends Error {
  override name = "SchemaMismatchError";
}

export interface CurveData {
  /** `# key=value` header metadata (e.g. name, forward, max_density). */
  metadata: Record<string, string>;
  strikes: number[];
  density: number[];
  impliedVol: number[];
  callPrice: number[];
}

export interface QuoteData {
  metadata: Record<string, string>;
  strikes: number[];
  vols: number[];
}

interface RawTable {
  metadata: Record<string, string>;
  header: string[];
  rows: number[][];
}

function parseTable(text: string, what: string): RawTable {
  const metadata: Record<string, string> = {};
  const lines = text.split(/\r?\n/);
  let header: string[] | null = null;
  const rows: number[][] = [];
  for (const [index, rawLine] of lines.entries()) {
    const line = rawLine.trim();
    if (line === "") continue;
    if (line.startsWith("#")) {
      const body = line.slice(1).trim();
      const eq = body.indexOf("=");
      if (eq > 0) metadata[body.slice(0, eq).trim()] = body.slice(eq + 1).trim();
      continue;
    }
    const cells = line.split(",").map((cell) => cell.trim());
    if (header === null) {
      header = cells.map((cell) => cell.toLowerCase());
      continue;
    }
    if (cells.length !== header.length) {
      throw new SchemaMismatchError(
        `${what}: line ${index + 1} has ${cells.length} cells, expected ${header.length}`,
      );
    }
    const row = cells.map(Number);
    const bad = row.findIndex((value) => !Number.isFinite(value));
    if (bad >= 0) {
      throw new SchemaMismatchError(
        `${what}: line ${index + 1}, column ${header[bad]}: not a finite number`,
      );
    }
    rows.push(row);
  }
  if (header === null || rows.length === 0) {
    throw new SchemaMismatchError(`${what}: no data rows`);
  }
  return { metadata, header, rows };
}

function column(table: RawTable, name: string, what: string): number[] {
  const index = table.header.indexOf(name);
  if (index < 0) {
    throw new SchemaMismatchError(
      `${what}: missing column ${name} (have: ${table.header.join(", ")})`,
    );
  }
  return table.rows.map((row) => row[index] as number);
}

/** Parse the text of a model curve CSV. */
export function parseCurveCsv(text: string, what = "curve CSV"): CurveData {
  const table = parseTable(text, what);
  return {
    metadata: table.metadata,
    strikes: column(table, "strike", what),
    density: column(table, "density", what),
    impliedVol: column(table, "implied_vol", what),
    callPrice: column(table, "call_price", what),
  };
}

/** Parse the text of a market quote CSV. */
export function parseQuoteCsv(text: string, what = "quote CSV"): QuoteData {
  const table = parseTable(text, what);
  return {
    metadata: table.metadata,
    strikes: column(table, "strike", what),
    vols: column(table, "vol", what),
  };
}

export function readCurveCsv(path: string): CurveData {
  return parseCurveCsv(readFileSync(path, "utf8"), path);
}

export function readQuoteCsv(path: string): QuoteData {
  return parseQuoteCsv(readFileSync(path, "utf8"), path);
}

/** Metadata value as a number, or null when absent/non-numeric. */
export function metadataNumber(
  metadata: Record<string, string>,
  key: string,
): number | null {
  const raw = metadata[key];
  if (raw === undefined) return null;
  const value = Number(raw);
  return Number.isFinite(value) ? value : null;
}
