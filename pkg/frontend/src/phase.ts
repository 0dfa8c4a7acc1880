/**
 * Phase portrait: barrier zero-level contours, the trajectory projected onto
 * a chosen state pair, a start marker, and shaded filter-inactivity cells.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { parseInactivityCsv, parseTrajectoryCsv } from "./csv.js";
import { axes, document, fmt, makeScale, polyline, text } from "./svg.js";

export interface Barrier {
  c: number[];
  pDiag: number[];
}

export interface PlotSpec {
  trajectoryCsv: string;
  inactivityCsv?: string;
  barriers: Barrier[];
  statePair: [number, number];
  out: string;
  /** per-channel input bounds, used by the input plot */
  inputBounds?: { lower: number[]; upper: number[] };
}

const CONTOUR_COLORS = ["#1f77b4", "#2ca02c", "#9467bd", "#8c564b"];

function checkSpec(spec: PlotSpec, n: number): void {
  const [i, j] = spec.statePair;
  if (i < 0 || j < 0 || i >= n || j >= n || i === j) {
    throw new Error(
      `state pair [${i}, ${j}] out of range for ${n}-dimensional states`
    );
  }
  for (const b of spec.barriers) {
    if (b.c.length !== n || b.pDiag.length !== n) {
      throw new Error(
        `barrier parameters have dimension ${b.c.length}, states have ${n}`
      );
    }
  }
}

/** Points of {h = 0} projected onto coordinates (i, j), if it is an ellipse there. */
function contourPoints(
  b: Barrier,
  i: number,
  j: number
): Array<[number, number]> | null {
  const pi = b.pDiag[i];
  const pj = b.pDiag[j];
  if (pi <= 0 || pj <= 0) {
    return null; // flat in one of the plotted coordinates: no closed contour
  }
  const pts: Array<[number, number]> = [];
  const steps = 256;
  for (let s = 0; s <= steps; s++) {
    const a = (2 * Math.PI * s) / steps;
    pts.push([
      b.c[i] + Math.cos(a) / Math.sqrt(pi),
      b.c[j] + Math.sin(a) / Math.sqrt(pj),
    ]);
  }
  return pts;
}

/** Smallest positive spacing among sorted unique values (grid cell size). */
function gridSpacing(values: number[]): number {
  const uniq = [...new Set(values)].sort((a, b) => a - b);
  let best = Infinity;
  for (let i = 1; i < uniq.length; i++) {
    const d = uniq[i] - uniq[i - 1];
    if (d > 1e-12 && d < best) {
      best = d;
    }
  }
  return Number.isFinite(best) ? best : 0.05;
}

export function renderPhase(spec: PlotSpec): string {
  const traj = parseTrajectoryCsv(spec.trajectoryCsv);
  checkSpec(spec, traj.n);
  const [i, j] = spec.statePair;

  const xs = traj.states.map((s) => s[i]);
  const ys = traj.states.map((s) => s[j]);
  let xLo = Math.min(...xs);
  let xHi = Math.max(...xs);
  let yLo = Math.min(...ys);
  let yHi = Math.max(...ys);
  const contours = spec.barriers.map((b) => contourPoints(b, i, j));
  for (const pts of contours) {
    if (pts) {
      for (const [x, y] of pts) {
        xLo = Math.min(xLo, x);
        xHi = Math.max(xHi, x);
        yLo = Math.min(yLo, y);
        yHi = Math.max(yHi, y);
      }
    }
  }
  const scale = makeScale(xLo, xHi, yLo, yHi);
  const parts: string[] = [];

  if (spec.inactivityCsv) {
    const map = parseInactivityCsv(spec.inactivityCsv);
    if (map.n !== traj.n) {
      throw new Error(
        `inactivity map dimension ${map.n} does not match trajectory dimension ${traj.n}`
      );
    }
    const dx = gridSpacing(map.points.map((p) => p[i]));
    const dy = gridSpacing(map.points.map((p) => p[j]));
    const w = Math.abs(scale.toX(dx) - scale.toX(0));
    const h = Math.abs(scale.toY(dy) - scale.toY(0));
    for (let r = 0; r < map.points.length; r++) {
      if (map.labels[r] !== 1) {
        continue;
      }
      const cx = scale.toX(map.points[r][i]);
      const cy = scale.toY(map.points[r][j]);
      parts.push(
        `<rect x="${fmt(cx - w / 2)}" y="${fmt(cy - h / 2)}" width="${fmt(
          w
        )}" height="${fmt(h)}" fill="#b6e3b6" stroke="none"/>`
      );
    }
  }

  contours.forEach((pts, b) => {
    if (pts) {
      parts.push(
        polyline(
          pts.map(([x, y]) => [scale.toX(x), scale.toY(y)]),
          CONTOUR_COLORS[b % CONTOUR_COLORS.length],
          1.6
        )
      );
    }
  });

  parts.push(
    polyline(
      traj.states.map((s) => [scale.toX(s[i]), scale.toY(s[j])]),
      "#d62728",
      1.0
    )
  );
  parts.push(
    `<circle cx="${fmt(scale.toX(xs[0]))}" cy="${fmt(
      scale.toY(ys[0])
    )}" r="4" fill="#d62728" stroke="#333"/>`
  );
  parts.push(axes(scale, `x${i + 1}`, `x${j + 1}`));
  parts.push(text(320, 20, path.basename(spec.trajectoryCsv)));

  const svg = document(parts.join("\n"));
  fs.mkdirSync(path.dirname(path.resolve(spec.out)), { recursive: true });
  fs.writeFileSync(spec.out, svg);
  return svg;
}
