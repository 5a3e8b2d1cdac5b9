import { describe, expect, it } from "vitest";

import {
  CsvError,
  SUMMARY_HEADER,
  TRACE_HEADER,
  parseSummary,
  parseTrace,
} from "../src/csv";

const GOOD_TRACE = [
  TRACE_HEADER,
  "0,0,10,0,0.5,0,0",
  "1,0.25,9.8383227961934949,5.9764843402148116,0.49999749999999998,50,5050",
  "2,0.5,7.25,3.5,0.49999499999999998,50,10100",
].join("\n") + "\n";

describe("parseTrace", () => {
  it("reads every column with full precision", () => {
    const trace = parseTrace(GOOD_TRACE, "trace.csv");
    expect(trace.rows).toHaveLength(3);
    expect(trace.rows[1].j).toBe(9.8383227961934949);
    expect(trace.rows[1].gamma).toBe(0.49999749999999998);
    expect(trace.rows[2].realsTx).toBe(10100);
  });

  it("recovers the block count from t over t_norm", () => {
    expect(parseTrace(GOOD_TRACE, "trace.csv").numBlocks).toBe(4);
  });

  it("leaves the block count null for a t=0-only trace", () => {
    const single = `${TRACE_HEADER}\n0,0,10,0,0.5,0,0\n`;
    expect(parseTrace(single, "trace.csv").numBlocks).toBeNull();
  });

  it("rejects a wrong header at line 1", () => {
    expect(() => parseTrace("time,J\n", "x.csv")).toThrowError(/x\.csv:1:/);
  });

  it("rejects a short row with its line number", () => {
    const bad = `${TRACE_HEADER}\n0,0,10,0\n`;
    try {
      parseTrace(bad, "bad.csv");
      throw new Error("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(CsvError);
      expect((err as CsvError).line).toBe(2);
      expect(String((err as CsvError).message)).toContain("bad.csv:2:");
    }
  });

  it("rejects non-numeric fields with their line number", () => {
    const bad = `${TRACE_HEADER}\n0,0,10,0,0.5,0,0\n1,0.25,oops,0,0.5,50,100\n`;
    expect(() => parseTrace(bad, "bad.csv")).toThrowError(/bad\.csv:3:/);
  });

  it("rejects non-increasing iterations", () => {
    const bad = `${TRACE_HEADER}\n0,0,10,0,0.5,0,0\n0,0,9,0,0.5,0,0\n`;
    expect(() => parseTrace(bad, "bad.csv")).toThrowError(/increase/);
  });

  it("rejects a header-only file", () => {
    expect(() => parseTrace(`${TRACE_HEADER}\n`, "empty.csv"))
      .toThrowError(/no rows/);
  });
});

describe("parseSummary", () => {
  it("reads rows", () => {
    const text = `${SUMMARY_HEADER}\n1,108,108,2165400\n4,435,108.75,2196750\n`;
    const summary = parseSummary(text, "summary.csv");
    expect(summary.rows).toHaveLength(2);
    expect(summary.rows[1].tEndNorm).toBe(108.75);
  });

  it("rejects a missing completion time with line number", () => {
    const text = `${SUMMARY_HEADER}\n1,,,\n`;
    expect(() => parseSummary(text, "s.csv")).toThrowError(/s\.csv:2:.*t_end/);
  });

  it("rejects the wrong header", () => {
    expect(() => parseSummary("B,t\n1,2\n", "s.csv")).toThrowError(/s\.csv:1:/);
  });
});
