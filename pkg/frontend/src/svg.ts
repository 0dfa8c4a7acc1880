/** Minimal deterministic SVG assembly: fixed precision, no timestamps. */

export const WIDTH = 640;
export const HEIGHT = 480;
export const MARGIN = 56;

export function fmt(v: number): string {
  if (!Number.isFinite(v)) {
    throw new Error(`cannot format non-finite coordinate ${v}`);
  }
  const s = v.toPrecision(6);
  // Normalize "-0.00000" style output so identical inputs give identical bytes.
  return String(Number(s));
}

export interface Scale {
  toX(v: number): number;
  toY(v: number): number;
  xLo: number;
  xHi: number;
  yLo: number;
  yHi: number;
}

export function makeScale(
  xLo: number,
  xHi: number,
  yLo: number,
  yHi: number
): Scale {
  const padX = (xHi - xLo || 1) * 0.05;
  const padY = (yHi - yLo || 1) * 0.05;
  xLo -= padX;
  xHi += padX;
  yLo -= padY;
  yHi += padY;
  const sx = (WIDTH - 2 * MARGIN) / (xHi - xLo);
  const sy = (HEIGHT - 2 * MARGIN) / (yHi - yLo);
  return {
    toX: (v) => MARGIN + (v - xLo) * sx,
    toY: (v) => HEIGHT - MARGIN - (v - yLo) * sy,
    xLo,
    xHi,
    yLo,
    yHi,
  };
}

export function polyline(
  pts: Array<[number, number]>,
  stroke: string,
  width = 1.2,
  dash = ""
): string {
  const d = pts.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
  const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
  return `<polyline fill="none" stroke="${stroke}" stroke-width="${width}"${dashAttr} points="${d}"/>`;
}

export function text(
  x: number,
  y: number,
  content: string,
  anchor = "middle",
  size = 12
): string {
  return `<text x="${fmt(x)}" y="${fmt(y)}" text-anchor="${anchor}" font-family="sans-serif" font-size="${size}">${content}</text>`;
}

export function axes(scale: Scale, xLabel: string, yLabel: string): string {
  const parts: string[] = [];
  parts.push(
    `<rect x="${MARGIN}" y="${MARGIN}" width="${WIDTH - 2 * MARGIN}" height="${
      HEIGHT - 2 * MARGIN
    }" fill="none" stroke="#333" stroke-width="1"/>`
  );
  const ticks = 5;
  for (let i = 0; i <= ticks; i++) {
    const xv = scale.xLo + ((scale.xHi - scale.xLo) * i) / ticks;
    const yv = scale.yLo + ((scale.yHi - scale.yLo) * i) / ticks;
    parts.push(
      text(scale.toX(xv), HEIGHT - MARGIN + 18, fmt(Number(xv.toPrecision(3))))
    );
    parts.push(
      text(MARGIN - 8, scale.toY(yv) + 4, fmt(Number(yv.toPrecision(3))), "end")
    );
  }
  parts.push(text(WIDTH / 2, HEIGHT - 12, xLabel));
  parts.push(
    `<text x="16" y="${HEIGHT / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 ${
      HEIGHT / 2
    })">${yLabel}</text>`
  );
  return parts.join("\n");
}

export function document(body: string, width = WIDTH, height = HEIGHT): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n` +
    body +
    "\n</svg>\n"
  );
}
