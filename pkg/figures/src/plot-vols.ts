/**
 * Command wrapper: model implied-vol line plus market quote markers.
 *
 *   node dist/plot-vols.js --curve fit.curve.csv --quotes quotes.csv --out smile.svg
 *   node dist/plot-vols.js --quotes quotes.csv --out markers-only.svg
 */

import { parseArgs } from "node:util";

import { plotVols } from "./vols.js";

export function main(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      curve: { type: "string" },
      quotes: { type: "string" },
      out: { type: "string" },
      title: { type: "string" },
    },
  });
  if (values.quotes === undefined || values.out === undefined) {
    console.error("usage: plot-vols [--curve fit.curve.csv] --quotes quotes.csv --out FILE");
    return 1;
  }
  try {
    const written = plotVols(values.curve ?? null, values.quotes, values.out, {
      title: values.title,
    });
    console.log(`wrote ${written}`);
    return 0;
  } catch (error) {
    console.error(`plot-vols: error: ${(error as Error).message}`);
    return 1;
  }
}

if (process.argv[1]?.endsWith("plot-vols.js") === true) {
  process.exitCode = main(process.argv.slice(2));
}
