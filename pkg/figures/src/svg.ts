/**
 * Minimal deterministic SVG chart primitives: linear/log scales, tick
 * selection, axes, polylines, and markers.  No timestamps or random ids are
 * emitted, so rendering the same data twice yields identical bytes.
 */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const DEFAULT_MARGIN: Margin = { top: 42, right: 24, bottom: 52, left: 72 };

export interface Scale {
  (value: number): number;
  readonly domain: [number, number];
  readonly range: [number, number];
  readonly log: boolean;
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 === 0 ? 1 : d1 - d0;
  const scale = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  Object.assign(scale, { domain, range, log: false });
  return scale;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  if (!(d0 > 0) || !(d1 > 0)) {
    throw new RangeError(`log scale needs a positive domain, got [${d0}, ${d1}]`);
  }
  const l0 = Math.log10(d0);
  const l1 = Math.log10(d1);
  const inner = linearScale([l0, l1], range);
  const scale = ((value: number) => inner(Math.log10(value))) as Scale;
  Object.assign(scale, { domain, range, log: true });
  return scale;
}

/** Round-number ticks covering the domain (1/2/5 progression). */
export function linearTicks(domain: [number, number], count = 6): number[] {
  const [lo, hi] = domain;
  const span = hi - lo;
  if (!(span > 0)) return [lo];
  const rawStep = span / count;
  const power = Math.floor(Math.log10(rawStep));
  const base = Math.pow(10, power);
  let step = base;
  for (const mult of [1, 2, 5, 10]) {
    if (base * mult >= rawStep) {
      step = base * mult;
      break;
    }
  }
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + step * 1e-9; t += step) {
    ticks.push(Math.abs(t) < step * 1e-9 ? 0 : t);
  }
  return ticks;
}

/** Decade ticks (1eN) inside the domain; thinned when there are many. */
export function logTicks(domain: [number, number]): number[] {
  const lo = Math.ceil(Math.log10(domain[0]) - 1e-9);
  const hi = Math.floor(Math.log10(domain[1]) + 1e-9);
  const decades: number[] = [];
  for (let e = lo; e <= hi; e += 1) decades.push(e);
  const stride = Math.max(1, Math.ceil(decades.length / 8));
  return decades.filter((_, i) => i % stride === 0).map((e) => Math.pow(10, e));
}

export function formatTick(value: number, log: boolean): string {
  if (log) {
    const exp = Math.round(Math.log10(value));
    return `1e${exp}`;
  }
  if (value === 0) return "0";
  const magnitude = Math.abs(value);
  if (magnitude >= 10000 || magnitude < 0.001) return value.toExponential(1);
  const text = value.toPrecision(6);
  return text.includes(".") ? text.replace(/\.?0+$/, "") : text;
}

export function escapeText(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

const FONT = 'font-family="Helvetica, Arial, sans-serif"';

export function polylinePath(
  xs: number[],
  ys: number[],
  x: Scale,
  y: Scale,
  skip?: (index: number) => boolean,
): string {
  const parts: string[] = [];
  let pen = false;
  for (let i = 0; i < xs.length; i += 1) {
    if (skip !== undefined && skip(i)) {
      pen = false;
      continue;
    }
    const px = x(xs[i] as number).toFixed(2);
    const py = y(ys[i] as number).toFixed(2);
    parts.push(`${pen ? "L" : "M"}${px} ${py}`);
    pen = true;
  }
  return parts.join(" ");
}

export interface AxesOptions {
  width: number;
  height: number;
  margin: Margin;
  x: Scale;
  y: Scale;
  title: string;
  xLabel: string;
  yLabel: string;
}

/** Background, grid, axis lines, tick labels, title, and axis labels. */
export function renderAxes(options: AxesOptions): string {
  const { width, height, margin, x, y, title, xLabel, yLabel } = options;
  const plotRight = width - margin.right;
  const plotBottom = height - margin.bottom;
  const out: string[] = [];
  out.push(`<rect width="${width}" height="${height}" fill="white"/>`);

  const xTicks = x.log ? logTicks(x.domain) : linearTicks(x.domain);
  const yTicks = y.log ? logTicks(y.domain) : linearTicks(y.domain);
  for (const t of xTicks) {
    const px = x(t).toFixed(2);
    out.push(
      `<line x1="${px}" y1="${margin.top}" x2="${px}" y2="${plotBottom}" stroke="#e5e5e5"/>`,
      `<text x="${px}" y="${plotBottom + 18}" text-anchor="middle" font-size="12" ${FONT} fill="#333">${escapeText(formatTick(t, x.log))}</text>`,
    );
  }
  for (const t of yTicks) {
    const py = y(t).toFixed(2);
    out.push(
      `<line x1="${margin.left}" y1="${py}" x2="${plotRight}" y2="${py}" stroke="#e5e5e5"/>`,
      `<text x="${margin.left - 8}" y="${py}" text-anchor="end" dominant-baseline="middle" font-size="12" ${FONT} fill="#333">${escapeText(formatTick(t, y.log))}</text>`,
    );
  }
  out.push(
    `<rect x="${margin.left}" y="${margin.top}" width="${plotRight - margin.left}" height="${plotBottom - margin.top}" fill="none" stroke="#999"/>`,
    `<text x="${(margin.left + plotRight) / 2}" y="24" text-anchor="middle" font-size="15" font-weight="bold" ${FONT} fill="#111">${escapeText(title)}</text>`,
    `<text x="${(margin.left + plotRight) / 2}" y="${height - 12}" text-anchor="middle" font-size="13" ${FONT} fill="#333">${escapeText(xLabel)}</text>`,
    `<text transform="translate(16 ${(margin.top + plotBottom) / 2}) rotate(-90)" text-anchor="middle" font-size="13" ${FONT} fill="#333">${escapeText(yLabel)}</text>`,
  );
  return out.join("\n");
}

export const SERIES_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

export interface LegendEntry {
  label: string;
  color: string;
  marker?: boolean;
}

export function renderLegend(
  entries: LegendEntry[],
  width: number,
  margin: Margin,
): string {
  const out: string[] = [];
  const x0 = width - margin.right - 190;
  let y0 = margin.top + 14;
  for (const entry of entries) {
    if (entry.marker === true) {
      out.push(`<circle cx="${x0 + 12}" cy="${y0 - 4}" r="3.5" fill="${entry.color}"/>`);
    } else {
      out.push(
        `<line x1="${x0}" y1="${y0 - 4}" x2="${x0 + 24}" y2="${y0 - 4}" stroke="${entry.color}" stroke-width="2"/>`,
      );
    }
    out.push(
      `<text x="${x0 + 30}" y="${y0}" font-size="12" ${FONT} fill="#111">${escapeText(entry.label)}</text>`,
    );
    y0 += 18;
  }
  return out.join("\n");
}

export function svgDocument(width: number, height: number, body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">\n${body}\n</svg>\n`
  );
}
