/**
 * Minimal deterministic SVG line charts.
 *
 * Hand-rolled on purpose: the output is a pure function of the input data,
 * so reruns are byte-identical and tests can assert on the markup.  Supports
 * a log y axis (nonpositive values are skipped, as on any log plot), dashed
 * strokes, and a legend.
 */

export interface Point {
  x: number;
  y: number;
}

export interface Series {
  label: string;
  points: Point[];
  dashed?: boolean;
  color?: string;
}

export interface ChartOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  logY?: boolean;
  width?: number;
  height?: number;
}

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const MARGIN = { top: 42, right: 24, bottom: 48, left: 64 };

function fmt(v: number): string {
  return Number(v.toPrecision(6)).toString();
}

function niceTicks(lo: number, hi: number, count: number): number[] {
  if (!(hi > lo)) {
    return [lo];
  }
  const span = hi - lo;
  const step0 = span / Math.max(count - 1, 1);
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const candidates = [1, 2, 5, 10].map((m) => m * mag);
  const step = candidates.find((s) => span / s <= count) ?? candidates[3];
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += step) {
    ticks.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return ticks;
}

function decadeTicks(lo: number, hi: number): number[] {
  const first = Math.ceil(Math.log10(lo) - 1e-9);
  const last = Math.floor(Math.log10(hi) + 1e-9);
  const ticks: number[] = [];
  for (let e = first; e <= last; e++) {
    ticks.push(Math.pow(10, e));
  }
  return ticks.length > 0 ? ticks : [lo];
}

function tickLabel(v: number, log: boolean): string {
  if (log) {
    const e = Math.round(Math.log10(v));
    return `1e${e}`;
  }
  return fmt(v);
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderLineChart(series: Series[], options: ChartOptions): string {
  const width = options.width ?? 760;
  const height = options.height ?? 480;
  const logY = options.logY ?? false;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const visible = series.map((s) => ({
    ...s,
    points: s.points.filter((p) => Number.isFinite(p.x) && Number.isFinite(p.y)
      && (!logY || p.y > 0)),
  }));
  const drawable = visible.filter((s) => s.points.length > 0);
  if (drawable.length === 0) {
    throw new Error("nothing to draw: every series is empty"
      + (logY ? " (nonpositive values are skipped on a log axis)" : ""));
  }

  const xs = drawable.flatMap((s) => s.points.map((p) => p.x));
  const ys = drawable.flatMap((s) => s.points.map((p) => p.y));
  let xLo = Math.min(...xs);
  let xHi = Math.max(...xs);
  if (xHi === xLo) {
    xLo -= 1;
    xHi += 1;
  }
  let yLo = Math.min(...ys);
  let yHi = Math.max(...ys);
  if (logY) {
    if (yHi === yLo) {
      yLo /= 10;
      yHi *= 10;
    }
  } else if (yHi === yLo) {
    yLo -= 1;
    yHi += 1;
  }

  const xPos = (x: number) =>
    MARGIN.left + ((x - xLo) / (xHi - xLo)) * plotW;
  const yPos = (y: number) => {
    const f = logY
      ? (Math.log10(y) - Math.log10(yLo)) / (Math.log10(yHi) - Math.log10(yLo))
      : (y - yLo) / (yHi - yLo);
    return MARGIN.top + (1 - f) * plotH;
  };

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="24" text-anchor="middle" font-size="15">` +
    `${esc(options.title)}</text>`,
  );

  const yTicks = logY ? decadeTicks(yLo, yHi) : niceTicks(yLo, yHi, 7);
  for (const v of yTicks) {
    const y = yPos(v);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${fmt(y)}" x2="${width - MARGIN.right}" ` +
      `y2="${fmt(y)}" stroke="#dddddd"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${fmt(y + 4)}" text-anchor="end">` +
      `${tickLabel(v, logY)}</text>`,
    );
  }
  for (const v of niceTicks(xLo, xHi, 8)) {
    const x = xPos(v);
    parts.push(
      `<line x1="${fmt(x)}" y1="${MARGIN.top}" x2="${fmt(x)}" ` +
      `y2="${height - MARGIN.bottom}" stroke="#eeeeee"/>`,
    );
    parts.push(
      `<text x="${fmt(x)}" y="${height - MARGIN.bottom + 18}" ` +
      `text-anchor="middle">${tickLabel(v, false)}</text>`,
    );
  }
  const axisColor = "#333333";
  parts.push(
    `<line x1="${MARGIN.left}" y1="${height - MARGIN.bottom}" ` +
    `x2="${width - MARGIN.right}" y2="${height - MARGIN.bottom}" stroke="${axisColor}"/>`,
  );
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" ` +
    `y2="${height - MARGIN.bottom}" stroke="${axisColor}"/>`,
  );
  parts.push(
    `<text x="${width / 2}" y="${height - 10}" text-anchor="middle">` +
    `${esc(options.xLabel)}</text>`,
  );
  parts.push(
    `<text x="16" y="${height / 2}" text-anchor="middle" ` +
    `transform="rotate(-90 16 ${height / 2})">${esc(options.yLabel)}</text>`,
  );

  drawable.forEach((s, idx) => {
    const color = s.color ?? PALETTE[idx % PALETTE.length];
    const dash = s.dashed ? ` stroke-dasharray="6 4"` : "";
    if (s.points.length === 1) {
      const p = s.points[0];
      parts.push(
        `<circle cx="${fmt(xPos(p.x))}" cy="${fmt(yPos(p.y))}" r="3.5" ` +
        `fill="${color}"/>`,
      );
    } else {
      const coords = s.points
        .map((p) => `${fmt(xPos(p.x))},${fmt(yPos(p.y))}`)
        .join(" ");
      parts.push(
        `<polyline points="${coords}" fill="none" stroke="${color}" ` +
        `stroke-width="1.6"${dash}/>`,
      );
    }
  });

  const legendX = width - MARGIN.right - 170;
  drawable.forEach((s, idx) => {
    const color = s.color ?? PALETTE[idx % PALETTE.length];
    const y = MARGIN.top + 10 + idx * 18;
    const dash = s.dashed ? ` stroke-dasharray="6 4"` : "";
    parts.push(
      `<line x1="${legendX}" y1="${y}" x2="${legendX + 26}" y2="${y}" ` +
      `stroke="${color}" stroke-width="1.6"${dash}/>`,
    );
    parts.push(
      `<text x="${legendX + 32}" y="${y + 4}">${esc(s.label)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
