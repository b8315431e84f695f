/** Strict readers for the simulator's CSV/JSON output contract.
 *
 * The schema is fixed by the producing CLI; anything unexpected (missing
 * column, ragged row, non-numeric cell) is a hard error naming the culprit,
 * never a silent guess.
 */

import { readFileSync } from "node:fs";

export interface Table {
  /** column name -> values; always includes "t" */
  columns: Map<string, number[]>;
  length: number;
}

export function parseCsv(text: string, path = "<string>"): Table {
  const lines = text.split("\n").filter((ln) => ln.length > 0);
  if (lines.length === 0) throw new Error(`${path}: empty CSV`);
  const header = lines[0].split(",").map((h) => h.trim());
  const columns = new Map<string, number[]>(header.map((h) => [h, []]));
  if (new Set(header).size !== header.length) {
    throw new Error(`${path}: duplicate column names in ${header.join(",")}`);
  }
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== header.length) {
      throw new Error(`${path}: row ${i} has ${cells.length} cells, expected ${header.length}`);
    }
    for (let j = 0; j < header.length; j++) {
      const v = Number(cells[j]);
      if (!Number.isFinite(v)) {
        throw new Error(`${path}: row ${i}, column "${header[j]}": not a number (${cells[j]})`);
      }
      columns.get(header[j])!.push(v);
    }
  }
  return { columns, length: lines.length - 1 };
}

export function readTable(path: string): Table {
  return parseCsv(readFileSync(path, "utf8"), path);
}

export function requireColumn(table: Table, name: string, path = "table"): number[] {
  const col = table.columns.get(name);
  if (!col) {
    const have = [...table.columns.keys()].join(", ");
    throw new Error(`${path}: missing column "${name}" (have: ${have})`);
  }
  return col;
}

export interface DetectionEvent {
  t: number;
  channel: "plus" | "minus" | "single";
}

export function readEvents(path: string): DetectionEvent[] {
  const lines = readFileSync(path, "utf8").split("\n").filter((ln) => ln.length > 0);
  if (lines[0] !== "t,channel") {
    throw new Error(`${path}: expected header "t,channel", got "${lines[0]}"`);
  }
  return lines.slice(1).map((ln, i) => {
    const [ts, ch] = ln.split(",");
    const t = Number(ts);
    if (!Number.isFinite(t)) throw new Error(`${path}: row ${i + 1}: bad time ${ts}`);
    if (ch !== "plus" && ch !== "minus" && ch !== "single") {
      throw new Error(`${path}: row ${i + 1}: unknown channel "${ch}"`);
    }
    return { t, channel: ch };
  });
}

export interface FeedbackPoint {
  time: number;
  column: string;
  value: number;
}

export interface RunSummary {
  figure: string | null;
  feedback_points?: FeedbackPoint[];
  n_plus?: number;
  n_minus?: number;
  t_end: number;
  columns: string[];
  params: Record<string, unknown>;
  [key: string]: unknown;
}

export function readSummary(path: string): RunSummary {
  const data = JSON.parse(readFileSync(path, "utf8"));
  for (const key of ["t_end", "columns", "params"]) {
    if (!(key in data)) throw new Error(`${path}: summary missing "${key}"`);
  }
  return data as RunSummary;
}
