/**
 * Strict CSV reading for the experiment outputs.
 *
 * The primary tool emits plain comma-separated files with a header row and
 * no quoting, so parsing is a straight split. Every consumer declares the
 * columns it needs up front; a missing column fails loudly with its name,
 * never silently plotting garbage.
 */

import { readFileSync } from "node:fs";
import { basename } from "node:path";

export type Row = Record<string, string>;

export interface Table {
  path: string;
  columns: string[];
  rows: Row[];
}

export class MissingColumnError extends Error {
  constructor(column: string, path: string) {
    super(`missing column "${column}" in ${basename(path)}`);
    this.name = "MissingColumnError";
  }
}

export function readCsv(path: string, required: string[]): Table {
  const text = readFileSync(path, "utf-8");
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new Error(`empty CSV: ${basename(path)}`);
  }
  const columns = lines[0].split(",");
  for (const col of required) {
    if (!columns.includes(col)) {
      throw new MissingColumnError(col, path);
    }
  }
  const rows: Row[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== columns.length) {
      throw new Error(`ragged row ${i + 1} in ${basename(path)}`);
    }
    const row: Row = {};
    columns.forEach((col, j) => (row[col] = cells[j]));
    rows.push(row);
  }
  if (rows.length === 0) {
    throw new Error(`no data rows in ${basename(path)}`);
  }
  return { path, columns, rows };
}

export function num(row: Row, column: string): number {
  const value = Number(row[column]);
  if (!Number.isFinite(value)) {
    throw new Error(`non-numeric value ${JSON.stringify(row[column])} in column "${column}"`);
  }
  return value;
}

/** Parse a grid label like "ratio=2|alpha=3|tau_ms=1" into its parts. */
export function parseLabel(label: string): Record<string, string> {
  const parts: Record<string, string> = {};
  for (const piece of label.split("|")) {
    const eq = piece.indexOf("=");
    if (eq < 0) throw new Error(`unparseable grid label: ${label}`);
    parts[piece.slice(0, eq)] = piece.slice(eq + 1);
  }
  return parts;
}

export function groupBy<T>(items: T[], key: (item: T) => string): Map<string, T[]> {
  const out = new Map<string, T[]>();
  for (const item of items) {
    const k = key(item);
    const bucket = out.get(k);
    if (bucket) bucket.push(item);
    else out.set(k, [item]);
  }
  return out;
}
