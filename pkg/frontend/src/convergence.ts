/**
 * Stationarity/disagreement convergence figure from one trace per block
 * count: residual J drawn solid, disagreement D dashed, log y axis, x axis
 * in communication rounds per block (t/B).
 */

import { readdirSync, writeFileSync } from "fs";
import { basename, dirname, join } from "path";
import yargs from "yargs";

import { PALETTE, Series, renderLineChart } from "./chart";
import { TraceFile, readTrace } from "./csv";

export function expandTracePatterns(patterns: string[]): string[] {
  const out: string[] = [];
  for (const pattern of patterns) {
    if (!pattern.includes("*")) {
      out.push(pattern);
      continue;
    }
    const dir = dirname(pattern);
    const name = basename(pattern);
    const regex = new RegExp(
      "^" + name.split("*").map(escapeRegex).join(".*") + "$",
    );
    const matches = readdirSync(dir)
      .filter((f) => regex.test(f))
      .sort()
      .map((f) => join(dir, f));
    if (matches.length === 0) {
      throw new Error(`no files match ${pattern}`);
    }
    out.push(...matches);
  }
  return out;
}

function escapeRegex(text: string): string {
  return text.replace(/[.*+?^${}()|[\]\\]/g, "\\$&");
}

export function traceLabel(trace: TraceFile): string {
  if (trace.numBlocks !== null) {
    return `B=${trace.numBlocks}`;
  }
  const fromName = basename(trace.path).match(/B(\d+)/);
  return fromName ? `B=${fromName[1]}` : basename(trace.path);
}

export function buildConvergenceFigure(traces: TraceFile[]): string {
  const series: Series[] = [];
  traces.forEach((trace, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const label = traceLabel(trace);
    series.push({
      label: `${label} J`,
      color,
      points: trace.rows.map((r) => ({ x: r.tNorm, y: r.j })),
    });
    series.push({
      label: `${label} D`,
      color,
      dashed: true,
      points: trace.rows.map((r) => ({ x: r.tNorm, y: r.d })),
    });
  });
  return renderLineChart(series, {
    title: "Stationarity J (solid) and disagreement D (dashed)",
    xLabel: "normalized iterations t/B",
    yLabel: "merit value",
    logY: true,
  });
}

export function runConvergence(argv: string[]): number {
  const parser = yargs(argv)
    .usage("plot_convergence --traces <files-or-glob...> --out <figure.svg>")
    .option("traces", { type: "string", array: true, demandOption: true })
    .option("out", { type: "string", demandOption: true })
    .strict()
    .exitProcess(false);
  let args;
  try {
    args = parser.parseSync();
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
  try {
    const paths = expandTracePatterns(args.traces as string[]);
    const traces = paths.map(readTrace);
    writeFileSync(args.out as string, buildConvergenceFigure(traces));
    console.log(`wrote ${args.out} (${traces.length} trace(s))`);
    return 0;
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
}
