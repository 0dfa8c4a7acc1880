/**
 * Parsers for the simulator's CSV contracts.
 *
 * Trajectory CSV header: t,x1..xn,u1..um,uc1..ucm,h1..hK,inactive,substep
 * Inactivity CSV header: x1..xn,label  (0 active, 1 inactive, 2 outside)
 */

import * as fs from "node:fs";

export interface TrajectoryData {
  /** substep times, one per row */
  t: number[];
  /** states[k][i] is coordinate i at row k */
  states: number[][];
  /** desired inputs, per row (held from the owning tick) */
  uUncert: number[][];
  /** certified inputs, per row */
  uCert: number[][];
  /** barrier values, per row */
  h: number[][];
  inactive: boolean[];
  /** 0 marks the first substep of a control tick */
  substep: number[];
  n: number;
  m: number;
  k: number;
}

export interface InactivityData {
  points: number[][];
  labels: number[];
  n: number;
}

function readLines(path: string): { header: string[]; rows: string[][] } {
  const text = fs.readFileSync(path, "utf8");
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error(`empty CSV file: ${path}`);
  }
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(","));
  if (rows.length === 0) {
    throw new Error(`no data rows in CSV file: ${path}`);
  }
  return { header, rows };
}

/** Count of consecutive columns named `${prefix}1..${prefix}N` starting at idx. */
function countRun(header: string[], prefix: string, start: number): number {
  let count = 0;
  while (header[start + count] === `${prefix}${count + 1}`) {
    count += 1;
  }
  return count;
}

export function parseTrajectoryCsv(path: string): TrajectoryData {
  const { header, rows } = readLines(path);
  if (header[0] !== "t") {
    throw new Error(`missing column "t" in ${path} (got "${header[0]}")`);
  }
  const n = countRun(header, "x", 1);
  if (n === 0) {
    throw new Error(`missing column "x1" in ${path}`);
  }
  const m = countRun(header, "u", 1 + n);
  if (m === 0) {
    throw new Error(`missing column "u1" in ${path}`);
  }
  const mc = countRun(header, "uc", 1 + n + m);
  if (mc !== m) {
    throw new Error(`missing column "uc${mc + 1}" in ${path}`);
  }
  const k = countRun(header, "h", 1 + n + 2 * m);
  const tail = 1 + n + 2 * m + k;
  for (const [offset, name] of [
    [0, "inactive"],
    [1, "substep"],
  ] as const) {
    if (header[tail + offset] !== name) {
      throw new Error(`missing column "${name}" in ${path}`);
    }
  }

  const num = (row: string[], j: number, line: number): number => {
    const v = Number(row[j]);
    if (!Number.isFinite(v)) {
      throw new Error(
        `non-numeric value "${row[j]}" in column ${header[j]}, line ${line} of ${path}`
      );
    }
    return v;
  };

  const data: TrajectoryData = {
    t: [],
    states: [],
    uUncert: [],
    uCert: [],
    h: [],
    inactive: [],
    substep: [],
    n,
    m,
    k,
  };
  rows.forEach((row, r) => {
    if (row.length !== header.length) {
      throw new Error(
        `row ${r + 2} of ${path} has ${row.length} fields, expected ${header.length}`
      );
    }
    const line = r + 2;
    data.t.push(num(row, 0, line));
    data.states.push(
      Array.from({ length: n }, (_, i) => num(row, 1 + i, line))
    );
    data.uUncert.push(
      Array.from({ length: m }, (_, i) => num(row, 1 + n + i, line))
    );
    data.uCert.push(
      Array.from({ length: m }, (_, i) => num(row, 1 + n + m + i, line))
    );
    data.h.push(
      Array.from({ length: k }, (_, i) => num(row, 1 + n + 2 * m + i, line))
    );
    data.inactive.push(num(row, tail, line) !== 0);
    data.substep.push(num(row, tail + 1, line));
  });
  return data;
}

export function parseInactivityCsv(path: string): InactivityData {
  const { header, rows } = readLines(path);
  const n = countRun(header, "x", 0);
  if (n === 0) {
    throw new Error(`missing column "x1" in ${path}`);
  }
  if (header[n] !== "label") {
    throw new Error(`missing column "label" in ${path}`);
  }
  const points: number[][] = [];
  const labels: number[] = [];
  rows.forEach((row, r) => {
    points.push(
      Array.from({ length: n }, (_, i) => {
        const v = Number(row[i]);
        if (!Number.isFinite(v)) {
          throw new Error(`non-numeric value in line ${r + 2} of ${path}`);
        }
        return v;
      })
    );
    labels.push(Number(row[n]));
  });
  return { points, labels, n };
}
