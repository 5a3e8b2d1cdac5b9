/**
 * Communication-cost tradeoff figure: normalized completion time t_end/B
 * against the block count B, one line per summary file (e.g. one per
 * surrogate family).
 */

import { writeFileSync } from "fs";
import { basename } from "path";
import yargs from "yargs";

import { Series, renderLineChart } from "./chart";
import { CsvError, SummaryFile, readSummary } from "./csv";

export function summaryLabel(summary: SummaryFile): string {
  return basename(summary.path).replace(/\.csv$/i, "");
}

export function buildTradeoffFigure(summaries: SummaryFile[]): string {
  for (const summary of summaries) {
    if (summary.rows.length < 2) {
      throw new CsvError(summary.path, 2,
        "need at least 2 rows to draw a tradeoff line");
    }
  }
  const series: Series[] = summaries.map((summary) => ({
    label: summaryLabel(summary),
    points: summary.rows
      .slice()
      .sort((a, b) => a.b - b.b)
      .map((r) => ({ x: r.b, y: r.tEndNorm })),
  }));
  return renderLineChart(series, {
    title: "Normalized completion time vs block count",
    xLabel: "blocks B",
    yLabel: "t_end / B",
  });
}

export function runTradeoff(argv: string[]): number {
  const parser = yargs(argv)
    .usage("plot_tradeoff --summary <summary.csv> [--summary <more.csv>] --out <figure.svg>")
    .option("summary", { type: "string", array: true, demandOption: true })
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
    const summaries = (args.summary as string[]).map(readSummary);
    writeFileSync(args.out as string, buildTradeoffFigure(summaries));
    console.log(`wrote ${args.out} (${summaries.length} summar${summaries.length === 1 ? "y" : "ies"})`);
    return 0;
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
}
