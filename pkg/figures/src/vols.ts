/**
 * Implied-volatility figures: the model's vol curve as a line with the
 * market quotes as markers.  A forward mismatch between the two files is
 * annotated on the figure rather than silently ignored.
 */

import { writeFileSync } from "node:fs";

import {
  metadataNumber,
  readCurveCsv,
  readQuoteCsv,
  type CurveData,
  type QuoteData,
} from "./csv.js";
import {
  DEFAULT_MARGIN,
  SERIES_COLORS,
  escapeText,
  linearScale,
  polylinePath,
  renderAxes,
  renderLegend,
  svgDocument,
  type LegendEntry,
} from "./svg.js";

export interface VolPlotOptions {
  title?: string;
  width?: number;
  height?: number;
}

/** Render the model line plus market markers to an SVG string. */
export function renderVolPlot(
  curve: CurveData | null,
  quotes: QuoteData,
  options: VolPlotOptions = {},
): string {
  const width = options.width ?? 800;
  const height = options.height ?? 420;
  const margin = DEFAULT_MARGIN;

  const xs = [...quotes.strikes, ...(curve?.strikes ?? [])];
  const vols = [...quotes.vols, ...(curve?.impliedVol ?? [])];
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  let vLo = Math.min(...vols);
  let vHi = Math.max(...vols);
  const pad = (vHi - vLo || vHi || 1) * 0.08;
  vLo = Math.max(0, vLo - pad);
  vHi = vHi + pad;

  const x = linearScale([xLo, xHi], [margin.left, width - margin.right]);
  const y = linearScale([vLo, vHi], [height - margin.bottom, margin.top]);

  const body: string[] = [];
  body.push(
    renderAxes({
      width,
      height,
      margin,
      x,
      y,
      title: options.title ?? "Implied volatility",
      xLabel: "strike",
      yLabel: "implied volatility",
    }),
  );

  const legend: LegendEntry[] = [];
  const lineColor = SERIES_COLORS[0] as string;
  const markColor = SERIES_COLORS[1] as string;
  if (curve !== null) {
    const path = polylinePath(curve.strikes, curve.impliedVol, x, y);
    body.push(
      `<path d="${path}" fill="none" stroke="${lineColor}" stroke-width="1.8"/>`,
    );
    legend.push({ label: "model", color: lineColor });
  }
  for (let i = 0; i < quotes.strikes.length; i += 1) {
    const cx = x(quotes.strikes[i] as number).toFixed(2);
    const cy = y(quotes.vols[i] as number).toFixed(2);
    body.push(`<circle cx="${cx}" cy="${cy}" r="3.5" fill="${markColor}"/>`);
  }
  legend.push({ label: `market (${quotes.strikes.length} quotes)`, color: markColor, marker: true });
  body.push(renderLegend(legend, width, margin));

  if (curve !== null) {
    const forwardCurve = metadataNumber(curve.metadata, "forward");
    const forwardQuotes = metadataNumber(quotes.metadata, "forward");
    if (
      forwardCurve !== null &&
      forwardQuotes !== null &&
      Math.abs(forwardCurve - forwardQuotes) >
        1e-9 * Math.max(1, Math.abs(forwardQuotes))
    ) {
      const note =
        `warning: forward mismatch (curve ${forwardCurve}, quotes ${forwardQuotes})`;
      body.push(
        `<text x="${margin.left + 6}" y="${margin.top + 16}" font-size="12" ` +
          `font-family="Helvetica, Arial, sans-serif" fill="#b00">${escapeText(note)}</text>`,
      );
    }
  }

  return svgDocument(width, height, body.join("\n"));
}

/** Read the artifacts, render the smile figure, and write the SVG file. */
export function plotVols(
  curveCsv: string | null,
  quotesCsv: string,
  out: string,
  options: VolPlotOptions = {},
): string {
  const curve = curveCsv === null ? null : readCurveCsv(curveCsv);
  const quotes = readQuoteCsv(quotesCsv);
  writeFileSync(out, renderVolPlot(curve, quotes, options));
  return out;
}
