/**
 * Batch driver: calibrate every built-in dataset through the `quadsmile`
 * CLI, then regenerate the density and implied-vol figures from the emitted
 * CSV artifacts.  The smoothness-ablation overlay is rendered from two runs
 * of the flat lognormal dataset, with and without the forward-smoothness
 * tie; the embedded `max_density` metadata quantifies the separation.
 *
 *   node dist/render-all.js [--fixtures a,b] [--out-dir out] \
 *     [--work-dir work] [--quotes-dir ../src/quadsmile/fixtures]
 */

import { spawnSync } from "node:child_process";
import { mkdirSync } from "node:fs";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";
import { parseArgs } from "node:util";

import { metadataNumber, readCurveCsv } from "./csv.js";
import { plotDensity } from "./density.js";
import { plotVols } from "./vols.js";

interface FixtureSpec {
  name: string;
  /** Extra `quadsmile calibrate` flags. */
  flags: string[];
  /** Fat-winged smiles are plotted with a log density axis. */
  logDensity: boolean;
}

export const FIXTURES: FixtureSpec[] = [
  { name: "lognormal_a", flags: [], logDensity: false },
  { name: "lognormal_b", flags: [], logDensity: false },
  { name: "lognormal_c", flags: [], logDensity: false },
  { name: "lognormal_d", flags: [], logDensity: false },
  { name: "flat_lognormal", flags: [], logDensity: false },
  { name: "audnzd_1w", flags: [], logDensity: true },
  { name: "jackel_case1", flags: [], logDensity: true },
  { name: "jackel_case2", flags: ["--max-iterations", "60"], logDensity: true },
  { name: "tsla_1m", flags: ["--points", "10"], logDensity: true },
  { name: "spx_1m", flags: ["--points", "10"], logDensity: true },
  { name: "spx_1w", flags: ["--points", "10"], logDensity: true },
];

/** Run one CLI calibration; returns the artifact prefix. */
export function calibrateFixture(
  name: string,
  flags: string[],
  workDir: string,
): string {
  mkdirSync(workDir, { recursive: true });
  const prefix = join(workDir, name);
  const args = ["calibrate", "--fixture", name, ...flags, "--out", prefix];
  const run = spawnSync("quadsmile", args, { encoding: "utf8" });
  if (run.error !== undefined) {
    throw new Error(`quadsmile ${args.join(" ")}: ${run.error.message}`);
  }
  if (run.status === 2) {
    // Iteration cap reached: the artifacts are still written and usable.
    console.warn(`warning: ${name}: ${run.stderr.trim()}`);
  } else if (run.status !== 0) {
    throw new Error(
      `quadsmile ${args.join(" ")} exited ${run.status}: ${run.stderr.trim()}`,
    );
  }
  return prefix;
}

export interface RenderOptions {
  fixtures?: string[];
  outDir: string;
  workDir: string;
  quotesDir: string;
}

/** Calibrate and render every requested fixture; returns written SVG paths. */
export function renderAll(options: RenderOptions): string[] {
  mkdirSync(options.outDir, { recursive: true });
  mkdirSync(options.workDir, { recursive: true });
  const wanted =
    options.fixtures === undefined
      ? FIXTURES
      : options.fixtures.map((name) => {
          const spec = FIXTURES.find((candidate) => candidate.name === name);
          if (spec === undefined) {
            throw new Error(
              `unknown fixture ${name}; known: ${FIXTURES.map((f) => f.name).join(", ")}`,
            );
          }
          return spec;
        });

  const written: string[] = [];
  for (const spec of wanted) {
    const prefix = calibrateFixture(spec.name, spec.flags, options.workDir);
    const curveCsv = `${prefix}.curve.csv`;
    const quotesCsv = join(options.quotesDir, `${spec.name}.csv`);

    written.push(
      plotDensity(
        [curveCsv],
        [spec.name],
        join(options.outDir, `${spec.name}.density.svg`),
        { logScale: spec.logDensity, title: `Implied density: ${spec.name}` },
      ),
      plotVols(
        curveCsv,
        quotesCsv,
        join(options.outDir, `${spec.name}.vols.svg`),
        { title: `Implied volatility: ${spec.name}` },
      ),
    );

    if (spec.name === "flat_lognormal") {
      const ablatedPrefix = calibrateFixture(
        spec.name,
        ["--no-c3"],
        join(options.workDir, "ablated"),
      );
      const overlayInputs = [curveCsv, `${ablatedPrefix}.curve.csv`];
      const labels = ["with smoothness tie", "without smoothness tie"];
      written.push(
        plotDensity(
          overlayInputs,
          labels,
          join(options.outDir, `${spec.name}.c3_overlay.svg`),
          { title: "Smoothness tie vs. density spike" },
        ),
        plotDensity(
          overlayInputs,
          labels,
          join(options.outDir, `${spec.name}.c3_overlay_log.svg`),
          { logScale: true, title: "Smoothness tie vs. density spike (log)" },
        ),
      );
      const withMax = metadataNumber(readCurveCsv(curveCsv).metadata, "max_density");
      const withoutMax = metadataNumber(
        readCurveCsv(`${ablatedPrefix}.curve.csv`).metadata,
        "max_density",
      );
      console.log(
        `flat_lognormal max_density: with tie ${withMax}, without ${withoutMax}`,
      );
    }
  }
  return written;
}

export function main(argv: string[]): number {
  const packageRoot = resolve(dirname(fileURLToPath(import.meta.url)), "..");
  const { values } = parseArgs({
    args: argv,
    options: {
      fixtures: { type: "string" },
      "out-dir": { type: "string", default: join(packageRoot, "out") },
      "work-dir": { type: "string", default: join(packageRoot, "work") },
      "quotes-dir": {
        type: "string",
        default: resolve(packageRoot, "..", "src", "quadsmile", "fixtures"),
      },
    },
  });
  try {
    const written = renderAll({
      fixtures: values.fixtures?.split(",").map((name) => name.trim()),
      outDir: values["out-dir"],
      workDir: values["work-dir"],
      quotesDir: values["quotes-dir"],
    });
    for (const path of written) console.log(`wrote ${path}`);
    return 0;
  } catch (error) {
    console.error(`render-all: error: ${(error as Error).message}`);
    return 1;
  }
}

if (process.argv[1]?.endsWith("render-all.js") === true) {
  process.exitCode = main(process.argv.slice(2));
}
