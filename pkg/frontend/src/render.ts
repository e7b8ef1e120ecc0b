import { resolve, dirname } from "node:path";

import { column, readCsv, Table } from "./csv.js";
import { CurveSpec, FigureSpec, PanelSpec } from "./figspec.js";

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const DASHES: Record<string, string> = {
  solid: "",
  dashed: "9,5",
  dotted: "2,4",
  dashdot: "9,4,2,4",
};

const MARGIN = { left: 64, right: 16, top: 30, bottom: 46 };
const LEGEND_LINE = 16;

function fmt(v: number): string {
  // fixed shortest-ish formatting keeps output byte-stable
  if (v === 0) return "0";
  const out = v.toPrecision(8);
  return out.includes("e") ? out : out.replace(/\.?0+$/, "");
}

/** Tick positions: 4-8 "nice" steps covering [lo, hi]. */
export function niceTicks(lo: number, hi: number): number[] {
  const span = hi - lo;
  if (!(span > 0) || !Number.isFinite(span)) return [lo];
  const raw = span / 5;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const candidates = [1, 2, 2.5, 5, 10].map((m) => m * mag);
  const step = candidates.find((c) => span / c <= 7) ?? candidates[candidates.length - 1];
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span; v += step) {
    ticks.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return ticks;
}

interface CurveData {
  spec: CurveSpec;
  xs: number[];
  ys: number[];
  color: string;
  dash: string;
}

function loadCurves(panel: PanelSpec, baseDir: string, tables: Map<string, Table>): CurveData[] {
  return panel.curves.map((c, i) => {
    const path = resolve(baseDir, c.csv);
    let table = tables.get(path);
    if (table === undefined) {
      table = readCsv(path);
      tables.set(path, table);
    }
    const xs = column(table, c.x, path);
    const scale = c.scale ?? 1.0;
    const ys = column(table, c.y, path).map((v) => v * scale);
    return {
      spec: c,
      xs,
      ys,
      color: c.color ?? PALETTE[i % PALETTE.length],
      dash: DASHES[c.style ?? "solid"],
    };
  });
}

function dataRange(values: number[][]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const arr of values) {
    for (const v of arr) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

function renderPanel(
  panel: PanelSpec,
  index: number,
  baseDir: string,
  tables: Map<string, Table>,
  width: number,
  top: number,
  height: number,
): string {
  const curves = loadCurves(panel, baseDir, tables);
  const [xLo, xHi] = panel.x_range ?? dataRange(curves.map((c) => c.xs));
  const [yLoRaw, yHiRaw] = panel.y_range ?? dataRange(curves.map((c) => c.ys));
  const pad = panel.y_range ? 0 : 0.04 * (yHiRaw - yLoRaw);
  const yLo = yLoRaw - pad;
  const yHi = yHiRaw + pad;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;
  const sx = (v: number) => MARGIN.left + ((v - xLo) / (xHi - xLo)) * plotW;
  const sy = (v: number) => top + MARGIN.top + plotH - ((v - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<g class="panel" data-panel="${index}" data-x-min="${fmt(xLo)}" data-x-max="${fmt(xHi)}" ` +
      `data-y-min="${fmt(yLo)}" data-y-max="${fmt(yHi)}" data-curves="${curves.length}">`,
  );
  parts.push(
    `<rect x="${MARGIN.left}" y="${top + MARGIN.top}" width="${plotW}" height="${plotH}" ` +
      `fill="none" stroke="#222" stroke-width="1"/>`,
  );
  for (const tx of niceTicks(xLo, xHi)) {
    const px = fmt(sx(tx));
    parts.push(
      `<line x1="${px}" y1="${fmt(top + MARGIN.top + plotH)}" x2="${px}" ` +
        `y2="${fmt(top + MARGIN.top + plotH + 5)}" stroke="#222"/>`,
      `<text x="${px}" y="${fmt(top + MARGIN.top + plotH + 18)}" text-anchor="middle" ` +
        `font-size="11">${fmt(tx)}</text>`,
    );
  }
  for (const ty of niceTicks(yLo, yHi)) {
    const py = fmt(sy(ty));
    parts.push(
      `<line x1="${MARGIN.left - 5}" y1="${py}" x2="${MARGIN.left}" y2="${py}" stroke="#222"/>`,
      `<text x="${MARGIN.left - 8}" y="${py}" text-anchor="end" dominant-baseline="middle" ` +
        `font-size="11">${fmt(ty)}</text>`,
    );
  }
  if (panel.x_label) {
    parts.push(
      `<text x="${fmt(MARGIN.left + plotW / 2)}" y="${fmt(top + height - 8)}" ` +
        `text-anchor="middle" font-size="12">${esc(panel.x_label)}</text>`,
    );
  }
  if (panel.y_label) {
    const cy = top + MARGIN.top + plotH / 2;
    parts.push(
      `<text x="16" y="${fmt(cy)}" text-anchor="middle" font-size="12" ` +
        `transform="rotate(-90 16 ${fmt(cy)})">${esc(panel.y_label)}</text>`,
    );
  }
  curves.forEach((c, ci) => {
    const pts: string[] = [];
    for (let i = 0; i < c.xs.length; i++) {
      const x = c.xs[i];
      const y = c.ys[i];
      if (x < xLo || x > xHi) continue;
      const yc = Math.min(yHi, Math.max(yLo, y)); // clip into the panel
      pts.push(`${i === 0 || pts.length === 0 ? "M" : "L"}${fmt(sx(x))} ${fmt(sy(yc))}`);
    }
    const dash = c.dash ? ` stroke-dasharray="${c.dash}"` : "";
    parts.push(
      `<path class="curve" data-label="${esc(c.spec.label)}" d="${pts.join(" ")}" ` +
        `fill="none" stroke="${c.color}" stroke-width="1.4"${dash}/>`,
    );
    const lx = MARGIN.left + plotW - 170;
    const ly = top + MARGIN.top + 14 + LEGEND_LINE * ci;
    parts.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 26}" y2="${ly - 4}" stroke="${c.color}" ` +
        `stroke-width="1.4"${dash}/>`,
      `<text x="${lx + 32}" y="${ly}" font-size="11">${esc(c.spec.label)}</text>`,
    );
  });
  parts.push("</g>");
  return parts.join("\n");
}

/** Render a whole figure to SVG text (deterministic: pure function of inputs). */
export function renderFigure(spec: FigureSpec, baseDir: string): string {
  const width = spec.width ?? 760;
  const panelHeight = spec.height ?? (spec.panels.length > 1 ? 300 : 440);
  const titleH = spec.title ? 24 : 0;
  const total = titleH + panelHeight * spec.panels.length;
  const tables = new Map<string, Table>();
  const body = spec.panels
    .map((p, i) => renderPanel(p, i, baseDir, tables, width, titleH + i * panelHeight, panelHeight))
    .join("\n");
  const title = spec.title
    ? `<text x="${fmt(width / 2)}" y="17" text-anchor="middle" font-size="14" ` +
      `font-weight="bold">${esc(spec.title)}</text>\n`
    : "";
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${total}" ` +
    `viewBox="0 0 ${width} ${total}" font-family="Helvetica, Arial, sans-serif">\n` +
    `<rect width="${width}" height="${total}" fill="#ffffff"/>\n` +
    title +
    body +
    "\n</svg>\n"
  );
}

export function outputPathFor(spec: FigureSpec, specPath: string): string {
  return resolve(dirname(specPath), spec.output);
}
