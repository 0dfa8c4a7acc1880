/**
 * Batch renderer.
 *
 * Usage:
 *   node dist/cli.js --traj RUN_trajectory.csv --config RUN.json \
 *       [--inactivity MAP.csv] [--states 2,5] [--out DIR]
 *
 * Reads the simulator's trajectory CSV and run-config JSON contracts and
 * writes <stem>_phase.svg and <stem>_inputs.svg. --states uses 1-based
 * state indices; the default picks the first two coordinates the barriers
 * actually curve in.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { Barrier, PlotSpec, renderPhase } from "./phase.js";
import { renderInputs } from "./inputs.js";

interface Args {
  traj: string;
  config: string;
  inactivity?: string;
  out: string;
  states?: [number, number];
}

function parseArgs(argv: string[]): Args {
  const out: Partial<Args> = { out: "." };
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (value === undefined) {
      throw new Error(`missing value for ${flag}`);
    }
    switch (flag) {
      case "--traj":
        out.traj = value;
        break;
      case "--config":
        out.config = value;
        break;
      case "--inactivity":
        out.inactivity = value;
        break;
      case "--out":
        out.out = value;
        break;
      case "--states": {
        const pair = value.split(",").map((v) => Number(v));
        if (pair.length !== 2 || pair.some((v) => !Number.isInteger(v) || v < 1)) {
          throw new Error(`--states expects "i,j" with 1-based indices, got "${value}"`);
        }
        out.states = [pair[0] - 1, pair[1] - 1];
        break;
      }
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!out.traj || !out.config) {
    throw new Error("--traj and --config are required");
  }
  return out as Args;
}

function loadBarriers(configPath: string): {
  barriers: Barrier[];
  inputBounds?: { lower: number[]; upper: number[] };
} {
  const doc = JSON.parse(fs.readFileSync(configPath, "utf8"));
  if (!Array.isArray(doc.barriers)) {
    throw new Error(`no "barriers" array in ${configPath}`);
  }
  const barriers: Barrier[] = doc.barriers.map(
    (b: { c: number[]; p_diag: number[] }) => ({ c: b.c, pDiag: b.p_diag })
  );
  const box = doc.input_set?.box;
  const inputBounds = box ? { lower: box.lower, upper: box.upper } : undefined;
  return { barriers, inputBounds };
}

function defaultStatePair(barriers: Barrier[]): [number, number] {
  const curved = new Set<number>();
  for (const b of barriers) {
    b.pDiag.forEach((p, i) => {
      if (p > 0) {
        curved.add(i);
      }
    });
  }
  const idx = [...curved].sort((a, b) => a - b);
  return idx.length >= 2 ? [idx[0], idx[1]] : [0, 1];
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`argument error: ${(err as Error).message}`);
    return 1;
  }
  try {
    const { barriers, inputBounds } = loadBarriers(args.config);
    const stem = path
      .basename(args.traj)
      .replace(/\.csv$/, "")
      .replace(/_trajectory$/, "");
    const spec: PlotSpec = {
      trajectoryCsv: args.traj,
      inactivityCsv: args.inactivity,
      barriers,
      statePair: args.states ?? defaultStatePair(barriers),
      out: path.join(args.out, `${stem}_phase.svg`),
      inputBounds,
    };
    renderPhase(spec);
    const inputsOut = path.join(args.out, `${stem}_inputs.svg`);
    renderInputs({ ...spec, out: inputsOut });
    console.log(`wrote ${spec.out} and ${inputsOut}`);
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && path.basename(process.argv[1]) === "cli.js") {
  process.exit(main(process.argv.slice(2)));
}
