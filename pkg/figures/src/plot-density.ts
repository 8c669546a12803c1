/**
 * Command wrapper: overlay one or more curve CSVs in a density figure.
 *
 *   node dist/plot-density.js a.curve.csv b.curve.csv \
 *     --labels "with tie,without tie" --log-scale --out density.svg
 */

import { parseArgs } from "node:util";

import { plotDensity } from "./density.js";

export function main(argv: string[]): number {
  const { values, positionals } = parseArgs({
    args: argv,
    allowPositionals: true,
    options: {
      labels: { type: "string" },
      "log-scale": { type: "boolean", default: false },
      out: { type: "string" },
      title: { type: "string" },
    },
  });
  if (positionals.length === 0) {
    console.error("usage: plot-density CSV [CSV...] [--labels a,b] [--log-scale] --out FILE");
    return 1;
  }
  const out = values.out;
  if (out === undefined) {
    console.error("plot-density: --out is required");
    return 1;
  }
  const labels =
    values.labels !== undefined
      ? values.labels.split(",").map((label) => label.trim())
      : positionals.map((path) => path.replace(/\.curve\.csv$/, ""));
  try {
    const written = plotDensity(positionals, labels, out, {
      logScale: values["log-scale"],
      title: values.title,
    });
    console.log(`wrote ${written}`);
    return 0;
  } catch (error) {
    console.error(`plot-density: error: ${(error as Error).message}`);
    return 1;
  }
}

if (process.argv[1]?.endsWith("plot-density.js") === true) {
  process.exitCode = main(process.argv.slice(2));
}
