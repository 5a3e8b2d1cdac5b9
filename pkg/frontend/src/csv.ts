/**
 * Strict readers for the simulator's trace and summary CSV files.
 *
 * Both schemas are fixed: any header or row deviation is an error carrying
 * the file name and 1-based line number, so a truncated or hand-edited file
 * fails loudly instead of producing a silently wrong figure.
 */

import { readFileSync } from "fs";

export const TRACE_HEADER = "t,t_norm,J,D,gamma,msgs,reals_tx";
export const SUMMARY_HEADER = "B,t_end,t_end_norm,reals_tx";

export class CsvError extends Error {
  readonly file: string;
  readonly line: number;

  constructor(file: string, line: number, detail: string) {
    super(`${file}:${line}: ${detail}`);
    this.file = file;
    this.line = line;
  }
}

export interface TraceRow {
  t: number;
  tNorm: number;
  j: number;
  d: number;
  gamma: number;
  msgs: number;
  realsTx: number;
}

export interface TraceFile {
  path: string;
  rows: TraceRow[];
  /** Block count recovered from t / t_norm; null for a single-row trace. */
  numBlocks: number | null;
}

export interface SummaryRow {
  b: number;
  tEnd: number;
  tEndNorm: number;
  realsTx: number;
}

export interface SummaryFile {
  path: string;
  rows: SummaryRow[];
}

function splitLines(text: string): string[] {
  const lines = text.split(/\r?\n/);
  while (lines.length > 0 && lines[lines.length - 1] === "") {
    lines.pop();
  }
  return lines;
}

function parseNumber(file: string, line: number, field: string, raw: string): number {
  if (raw.trim() === "") {
    throw new CsvError(file, line, `empty value for ${field}`);
  }
  const value = Number(raw);
  if (Number.isNaN(value) && raw.trim().toLowerCase() !== "nan") {
    throw new CsvError(file, line, `cannot parse ${field} value ${JSON.stringify(raw)}`);
  }
  return value;
}

export function parseTrace(text: string, path: string): TraceFile {
  const lines = splitLines(text);
  if (lines.length === 0 || lines[0] !== TRACE_HEADER) {
    throw new CsvError(path, 1, `expected header ${JSON.stringify(TRACE_HEADER)}`);
  }
  const rows: TraceRow[] = [];
  let numBlocks: number | null = null;
  for (let i = 1; i < lines.length; i++) {
    const lineNo = i + 1;
    const parts = lines[i].split(",");
    if (parts.length !== 7) {
      throw new CsvError(path, lineNo, `expected 7 fields, got ${parts.length}`);
    }
    const row: TraceRow = {
      t: parseNumber(path, lineNo, "t", parts[0]),
      tNorm: parseNumber(path, lineNo, "t_norm", parts[1]),
      j: parseNumber(path, lineNo, "J", parts[2]),
      d: parseNumber(path, lineNo, "D", parts[3]),
      gamma: parseNumber(path, lineNo, "gamma", parts[4]),
      msgs: parseNumber(path, lineNo, "msgs", parts[5]),
      realsTx: parseNumber(path, lineNo, "reals_tx", parts[6]),
    };
    if (rows.length > 0 && row.t <= rows[rows.length - 1].t) {
      throw new CsvError(path, lineNo, `iteration ${row.t} does not increase`);
    }
    if (row.t > 0 && row.tNorm > 0) {
      numBlocks = Math.round(row.t / row.tNorm);
    }
    rows.push(row);
  }
  if (rows.length === 0) {
    throw new CsvError(path, 1, "trace has a header but no rows");
  }
  return { path, rows, numBlocks };
}

export function readTrace(path: string): TraceFile {
  return parseTrace(readFileSync(path, "utf8"), path);
}

export function parseSummary(text: string, path: string): SummaryFile {
  const lines = splitLines(text);
  if (lines.length === 0 || lines[0] !== SUMMARY_HEADER) {
    throw new CsvError(path, 1, `expected header ${JSON.stringify(SUMMARY_HEADER)}`);
  }
  const rows: SummaryRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const lineNo = i + 1;
    const parts = lines[i].split(",");
    if (parts.length !== 4) {
      throw new CsvError(path, lineNo, `expected 4 fields, got ${parts.length}`);
    }
    rows.push({
      b: parseNumber(path, lineNo, "B", parts[0]),
      tEnd: parseNumber(path, lineNo, "t_end", parts[1]),
      tEndNorm: parseNumber(path, lineNo, "t_end_norm", parts[2]),
      realsTx: parseNumber(path, lineNo, "reals_tx", parts[3]),
    });
  }
  if (rows.length === 0) {
    throw new CsvError(path, 1, "summary has a header but no rows");
  }
  return { path, rows };
}

export function readSummary(path: string): SummaryFile {
  return parseSummary(readFileSync(path, "utf8"), path);
}
