import { execFileSync } from "node:child_process";
import { createHash } from "node:crypto";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { beforeAll, describe, expect, it } from "vitest";

import { parseTrajectoryCsv } from "../src/csv.js";
import { renderPhase, PlotSpec, Barrier } from "../src/phase.js";
import { renderInputs } from "../src/inputs.js";
import { main as cliMain } from "../src/cli.js";

const HERE = path.dirname(new URL(import.meta.url).pathname);
const ROOT = path.resolve(HERE, "..", "..");
const CONFIGS = path.join(ROOT, "configs");
const RESULTS = path.join(ROOT, "results");
const OUT = fs.mkdtempSync(path.join(os.tmpdir(), "cbf-plots-"));

const RUNS = [
  "di_single",
  "di_multi",
  "quad_single",
  "quad_multi",
] as const;

/** Trajectory CSV for a bundled run, generating it via the simulator CLI
 *  if scripts/run_experiments.py has not populated results/ yet. */
function trajectoryFor(run: string): string {
  const existing = path.join(RESULTS, `${run}_trajectory.csv`);
  if (fs.existsSync(existing)) {
    return existing;
  }
  const generated = path.join(OUT, "gen", `${run}_trajectory.csv`);
  if (!fs.existsSync(generated)) {
    execFileSync(
      "python3",
      [
        "-m",
        "cbf_guard",
        "simulate",
        "--config",
        path.join(CONFIGS, `${run}.json`),
        "--out",
        path.join(OUT, "gen"),
        "--quiet",
      ],
      { cwd: ROOT, timeout: 180_000 }
    );
  }
  return generated;
}

function barriersFor(run: string): Barrier[] {
  const doc = JSON.parse(
    fs.readFileSync(path.join(CONFIGS, `${run}.json`), "utf8")
  );
  return doc.barriers.map((b: { c: number[]; p_diag: number[] }) => ({
    c: b.c,
    pDiag: b.p_diag,
  }));
}

function specFor(run: string, statePair: [number, number]): PlotSpec {
  return {
    trajectoryCsv: trajectoryFor(run),
    barriers: barriersFor(run),
    statePair,
    out: path.join(OUT, `${run}_phase.svg`),
  };
}

const STATE_PAIRS: Record<string, [number, number]> = {
  di_single: [0, 1],
  di_multi: [0, 1],
  quad_single: [1, 4],
  quad_multi: [1, 4],
};

beforeAll(() => {
  for (const run of RUNS) {
    trajectoryFor(run);
  }
}, 240_000);

describe("phase portraits", () => {
  for (const run of RUNS) {
    it(`renders ${run}`, () => {
      const svg = renderPhase(specFor(run, STATE_PAIRS[run]));
      expect(svg.startsWith("<svg")).toBe(true);
      expect(svg).toContain("<polyline");
      expect(svg).toContain("<circle"); // start marker
      expect(fs.existsSync(path.join(OUT, `${run}_phase.svg`))).toBe(true);
    });
  }

  it("shades inactivity cells when a map is supplied", () => {
    const spec = specFor("di_single", [0, 1]);
    spec.inactivityCsv = fs.existsSync(path.join(RESULTS, "di_inactivity.csv"))
      ? path.join(RESULTS, "di_inactivity.csv")
      : undefined;
    if (!spec.inactivityCsv) {
      execFileSync(
        "python3",
        [
          "-m",
          "cbf_guard",
          "inactivity-map",
          "--config",
          path.join(CONFIGS, "di_inactivity.json"),
          "--out",
          path.join(OUT, "gen"),
          "--quiet",
        ],
        { cwd: ROOT, timeout: 180_000 }
      );
      spec.inactivityCsv = path.join(OUT, "gen", "di_inactivity.csv");
    }
    spec.out = path.join(OUT, "di_single_phase_map.svg");
    const svg = renderPhase(spec);
    expect(svg).toContain('fill="#b6e3b6"');
  }, 240_000);

  it("is deterministic and leaves inputs unchanged", () => {
    const spec = specFor("di_single", [0, 1]);
    const before = createHash("sha256")
      .update(fs.readFileSync(spec.trajectoryCsv))
      .digest("hex");
    const a = renderPhase(spec);
    const b = renderPhase(spec);
    const after = createHash("sha256")
      .update(fs.readFileSync(spec.trajectoryCsv))
      .digest("hex");
    expect(a).toBe(b);
    expect(after).toBe(before);
  });

  it("rejects out-of-range state indices", () => {
    const spec = specFor("di_single", [0, 7]);
    expect(() => renderPhase(spec)).toThrow(/out of range/);
  });
});

describe("input plots", () => {
  it("single-barrier run shows chattering, two-barrier run does not", () => {
    const signFlips = (run: string): number => {
      const traj = parseTrajectoryCsv(trajectoryFor(run));
      let flips = 0;
      let prev = 0;
      for (let r = 0; r < traj.t.length; r++) {
        if (traj.substep[r] !== 0 || r + 1 >= traj.t.length) {
          continue;
        }
        const delta = traj.uCert[r][0] - prev;
        prev = traj.uCert[r][0];
        if (r > 0 && delta !== 0) {
          flips += 1;
        }
      }
      return flips;
    };
    expect(signFlips("di_single")).toBeGreaterThan(10);
    const svgSingle = renderInputs({
      ...specFor("di_single", [0, 1]),
      out: path.join(OUT, "di_single_inputs.svg"),
    });
    const svgMulti = renderInputs({
      ...specFor("di_multi", [0, 1]),
      out: path.join(OUT, "di_multi_inputs.svg"),
    });
    expect(svgSingle).toContain("<polyline");
    expect(svgMulti).toContain("<polyline");
  });

  it("renders one panel per input channel with bound lines", () => {
    const spec = {
      ...specFor("quad_multi", [1, 4]),
      inputBounds: { lower: [-0.35, 0.2], upper: [0.35, 0.9] },
      out: path.join(OUT, "quad_multi_inputs.svg"),
    };
    const svg = renderInputs(spec);
    expect(svg).toContain("u1");
    expect(svg).toContain("u2");
    expect(svg).toContain('stroke-dasharray="6 4"'); // bound lines
  });
});

describe("csv errors", () => {
  it("names an empty file", () => {
    const p = path.join(OUT, "empty.csv");
    fs.writeFileSync(p, "");
    expect(() => parseTrajectoryCsv(p)).toThrow(/empty CSV file.*empty\.csv/);
  });

  it("names a header-only file", () => {
    const p = path.join(OUT, "header_only.csv");
    fs.writeFileSync(p, "t,x1,x2,u1,uc1,h1,inactive,substep\n");
    expect(() => parseTrajectoryCsv(p)).toThrow(/no data rows/);
  });

  it("reports missing columns by name", () => {
    const p = path.join(OUT, "missing.csv");
    fs.writeFileSync(p, "t,x1,x2,u1,h1,inactive,substep\n0,0,0,0,0,0,0\n");
    expect(() => parseTrajectoryCsv(p)).toThrow(/missing column "uc1"/);
  });
});

describe("cli", () => {
  it("renders both figures from flags", () => {
    const code = cliMain([
      "--traj",
      trajectoryFor("di_multi"),
      "--config",
      path.join(CONFIGS, "di_multi.json"),
      "--out",
      path.join(OUT, "cli"),
    ]);
    expect(code).toBe(0);
    expect(fs.existsSync(path.join(OUT, "cli", "di_multi_phase.svg"))).toBe(true);
    expect(fs.existsSync(path.join(OUT, "cli", "di_multi_inputs.svg"))).toBe(true);
  });

  it("fails cleanly on missing flags", () => {
    expect(cliMain(["--traj", "x.csv"])).toBe(1);
  });
});

describe("acceptance", () => {
  it("11: renders runs 3/4/9 and the two-barrier run never leaves both contours", () => {
    for (const run of RUNS) {
      renderPhase({
        ...specFor(run, STATE_PAIRS[run]),
        out: path.join(OUT, `acc_${run}_phase.svg`),
      });
      renderInputs({
        ...specFor(run, STATE_PAIRS[run]),
        out: path.join(OUT, `acc_${run}_inputs.svg`),
      });
    }
    // Numeric containment for the two-barrier double-integrator run: recompute
    // each barrier value from the logged states; no point may be outside both.
    const traj = parseTrajectoryCsv(trajectoryFor("di_multi"));
    const barriers = barriersFor("di_multi");
    let worst = Infinity;
    for (const x of traj.states) {
      const hs = barriers.map((b) =>
        1 -
        b.pDiag.reduce(
          (acc, p, i) => acc + p * (x[i] - b.c[i]) * (x[i] - b.c[i]),
          0
        )
      );
      worst = Math.min(worst, Math.max(...hs));
      expect(Math.max(...hs)).toBeGreaterThanOrEqual(0);
    }
    console.log(
      `ACCEPTANCE 11 (figures render; containment margin ${worst.toExponential(
        3
      )}): PASS`
    );
  }, 240_000);
});
