/**
 * Input time series: zero-order-hold step plots of the certified and desired
 * inputs per channel, with optional input-bound lines.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { parseTrajectoryCsv, TrajectoryData } from "./csv.js";
import {
  HEIGHT,
  MARGIN,
  WIDTH,
  axes,
  document,
  fmt,
  makeScale,
  polyline,
  text,
} from "./svg.js";
import { PlotSpec } from "./phase.js";

/** Tick-resolution (t, u) samples expanded to zero-order-hold step points. */
function stepPoints(
  t: number[],
  u: number[],
  horizonEnd: number
): Array<[number, number]> {
  const pts: Array<[number, number]> = [];
  for (let k = 0; k < t.length; k++) {
    const tNext = k + 1 < t.length ? t[k + 1] : horizonEnd;
    pts.push([t[k], u[k]], [tNext, u[k]]);
  }
  return pts;
}

function tickSamples(traj: TrajectoryData): {
  t: number[];
  uCert: number[][];
  uUncert: number[][];
} {
  const t: number[] = [];
  const uCert: number[][] = [];
  const uUncert: number[][] = [];
  for (let r = 0; r < traj.t.length; r++) {
    if (traj.substep[r] === 0) {
      t.push(traj.t[r]);
      uCert.push(traj.uCert[r]);
      uUncert.push(traj.uUncert[r]);
    }
  }
  return { t, uCert, uUncert };
}

export function renderInputs(spec: PlotSpec): string {
  const traj = parseTrajectoryCsv(spec.trajectoryCsv);
  const { t, uCert, uUncert } = tickSamples(traj);
  const horizonEnd = traj.t[traj.t.length - 1];
  const panelHeight = HEIGHT;
  const totalHeight = panelHeight * traj.m;
  const parts: string[] = [];

  for (let ch = 0; ch < traj.m; ch++) {
    const certVals = uCert.map((u) => u[ch]);
    const uncertVals = uUncert.map((u) => u[ch]);
    let lo = Math.min(...certVals, ...uncertVals);
    let hi = Math.max(...certVals, ...uncertVals);
    if (spec.inputBounds) {
      lo = Math.min(lo, spec.inputBounds.lower[ch]);
      hi = Math.max(hi, spec.inputBounds.upper[ch]);
    }
    const scale = makeScale(t[0], horizonEnd, lo, hi);
    const offset = ch * panelHeight;
    const panel: string[] = [];

    if (spec.inputBounds) {
      for (const bound of [
        spec.inputBounds.lower[ch],
        spec.inputBounds.upper[ch],
      ]) {
        panel.push(
          polyline(
            [
              [MARGIN, scale.toY(bound)],
              [WIDTH - MARGIN, scale.toY(bound)],
            ],
            "#999",
            1.0,
            "6 4"
          )
        );
      }
    }
    panel.push(
      polyline(
        stepPoints(t, uncertVals, horizonEnd).map(([x, y]) => [
          scale.toX(x),
          scale.toY(y),
        ]),
        "#888",
        1.0,
        "3 3"
      )
    );
    panel.push(
      polyline(
        stepPoints(t, certVals, horizonEnd).map(([x, y]) => [
          scale.toX(x),
          scale.toY(y),
        ]),
        "#d62728",
        1.2
      )
    );
    panel.push(axes(scale, "t", `u${ch + 1}`));
    panel.push(
      text(WIDTH / 2, 20, `${path.basename(spec.trajectoryCsv)} u${ch + 1}`)
    );
    parts.push(`<g transform="translate(0 ${offset})">${panel.join("\n")}</g>`);
  }

  const svg = document(parts.join("\n"), WIDTH, totalHeight);
  fs.mkdirSync(path.dirname(path.resolve(spec.out)), { recursive: true });
  fs.writeFileSync(spec.out, svg);
  return svg;
}
