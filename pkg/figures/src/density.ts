/**
 * Implied-density figures: one overlaid line per labelled curve CSV, with an
 * optional log y-axis for fat-winged smiles.
 */

import { writeFileSync } from "node:fs";

import { readCurveCsv, type CurveData } from "./csv.js";
import {
  DEFAULT_MARGIN,
  SERIES_COLORS,
  linearScale,
  logScale,
  polylinePath,
  renderAxes,
  renderLegend,
  svgDocument,
  type LegendEntry,
} from "./svg.js";

export interface DensityPlotOptions {
  logScale?: boolean;
  title?: string;
  width?: number;
  height?: number;
}

export interface LabelledCurve {
  label: string;
  curve: CurveData;
}

/** Render overlaid implied-density curves to an SVG string. */
export function renderDensityPlot(
  curves: LabelledCurve[],
  options: DensityPlotOptions = {},
): string {
  if (curves.length === 0) throw new RangeError("no curves to plot");
  const width = options.width ?? 800;
  const height = options.height ?? 420;
  const margin = DEFAULT_MARGIN;
  const useLog = options.logScale === true;

  let xLo = Infinity;
  let xHi = -Infinity;
  let yHi = 0;
  let yLoPositive = Infinity;
  for (const { curve } of curves) {
    xLo = Math.min(xLo, ...curve.strikes);
    xHi = Math.max(xHi, ...curve.strikes);
    for (const d of curve.density) {
      if (d > yHi) yHi = d;
      if (d > 0 && d < yLoPositive) yLoPositive = d;
    }
  }
  if (!(yHi > 0)) throw new RangeError("density is zero everywhere");

  const x = linearScale([xLo, xHi], [margin.left, width - margin.right]);
  // On the log axis, clamp the floor a fixed number of decades below the
  // peak so underflowed tail values do not stretch the plot unreadably.
  const yFloor = useLog ? Math.max(yLoPositive, yHi * 1e-12) : 0;
  const y = useLog
    ? logScale([yFloor, yHi], [height - margin.bottom, margin.top])
    : linearScale([0, yHi * 1.05], [height - margin.bottom, margin.top]);

  const body: string[] = [];
  body.push(
    renderAxes({
      width,
      height,
      margin,
      x,
      y,
      title: options.title ?? "Implied density",
      xLabel: "strike",
      yLabel: useLog ? "implied density (log scale)" : "implied density",
    }),
  );

  const legend: LegendEntry[] = [];
  curves.forEach(({ label, curve }, index) => {
    const color = SERIES_COLORS[index % SERIES_COLORS.length] as string;
    const values = useLog
      ? curve.density.map((d) => Math.max(d, yFloor))
      : curve.density;
    const path = polylinePath(curve.strikes, values, x, y);
    body.push(
      `<path d="${path}" fill="none" stroke="${color}" stroke-width="1.8"/>`,
    );
    legend.push({ label, color });
  });
  if (curves.length > 1) body.push(renderLegend(legend, width, margin));

  return svgDocument(width, height, body.join("\n"));
}

/** Read labelled curve CSVs, render the overlay, and write the SVG file. */
export function plotDensity(
  csvPaths: string[],
  labels: string[],
  out: string,
  options: DensityPlotOptions = {},
): string {
  if (csvPaths.length !== labels.length) {
    throw new RangeError(
      `${csvPaths.length} CSVs but ${labels.length} labels`,
    );
  }
  const curves = csvPaths.map((path, index) => ({
    label: labels[index] as string,
    curve: readCurveCsv(path),
  }));
  writeFileSync(out, renderDensityPlot(curves, options));
  return out;
}
