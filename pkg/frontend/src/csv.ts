/**
 * Readers for the simulator's output files.
 *
 * Data CSVs start with '#' comment headers carrying the preset name, a
 * schema version and the resolved parameters; the first non-comment line
 * names the columns. Readers fail loudly on schema mismatches and never
 * mutate inputs.
 */

import { readFileSync } from "node:fs";

export const SUPPORTED_SCHEMA = 1;

export class SchemaError extends Error {}

export interface Table {
  meta: Record<string, string>;
  columns: string[];
  rows: number[][];
  raw: string[][];
}

export function readTable(path: string): Table {
  const text = readFileSync(path, "utf8");
  const meta: Record<string, string> = {};
  let columns: string[] | null = null;
  const rows: number[][] = [];
  const raw: string[][] = [];
  for (const line of text.split("\n")) {
    if (line === "") continue;
    if (line.startsWith("#")) {
      const body = line.slice(1).trim();
      const sep = body.indexOf(":");
      if (sep >= 0) meta[body.slice(0, sep).trim()] = body.slice(sep + 1).trim();
      continue;
    }
    if (columns === null) {
      columns = line.split(",");
      continue;
    }
    const cells = line.split(",");
    raw.push(cells);
    rows.push(cells.map((c) => (c === "" ? NaN : Number(c))));
  }
  if (columns === null) throw new SchemaError(`${path}: no column header found`);
  const version = Number(meta["schema_version"]);
  if (version !== SUPPORTED_SCHEMA) {
    throw new SchemaError(
      `${path}: schema_version ${meta["schema_version"]} != ${SUPPORTED_SCHEMA}`,
    );
  }
  return { meta, columns, rows, raw };
}

export function requireColumns(table: Table, names: string[], path: string): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new SchemaError(`${path}: missing column '${name}' (have ${table.columns.join(",")})`);
    }
  }
}

export function column(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) throw new SchemaError(`missing column '${name}'`);
  return table.rows.map((r) => r[idx]);
}

export function columnsMatching(table: Table, prefix: string): string[] {
  return table.columns.filter((c) => c.startsWith(prefix));
}

export function readJson(path: string): Record<string, unknown> {
  return JSON.parse(readFileSync(path, "utf8")) as Record<string, unknown>;
}

/** Trajectory JSONL: first line is a metadata record, then one record per line. */
export interface TrajectoryRecord {
  seed: number;
  events: [number, number | number[], number | number[] | null][];
  reason: string;
}

export function readTrajectories(path: string): TrajectoryRecord[] {
  const lines = readFileSync(path, "utf8").split("\n").filter((l) => l !== "");
  if (lines.length === 0) throw new SchemaError(`${path}: empty file`);
  const head = JSON.parse(lines[0]) as { _meta?: { schema_version?: number } };
  if (!head._meta || head._meta.schema_version !== SUPPORTED_SCHEMA) {
    throw new SchemaError(`${path}: missing or unsupported _meta header`);
  }
  return lines.slice(1).map((l) => JSON.parse(l) as TrajectoryRecord);
}
