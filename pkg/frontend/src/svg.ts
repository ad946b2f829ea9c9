/**
 * Minimal deterministic SVG scene builder.
 *
 * All coordinates are emitted with fixed precision and elements in insertion
 * order; there are no timestamps, ids or random attributes, so rendering the
 * same data twice yields byte-identical files.
 */

const FMT = (v: number): string => (Number.isFinite(v) ? v.toFixed(2) : "0.00");

export interface Extent {
  lo: number;
  hi: number;
}

export function extentOf(values: number[], padFrac = 0.05): Extent {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!(lo < hi)) {
    lo = lo === Infinity ? 0 : lo;
    hi = lo + 1;
  }
  const pad = (hi - lo) * padFrac;
  return { lo: lo - pad, hi: hi + pad };
}

export function logExtent(values: number[]): Extent {
  return extentOf(values.filter((v) => v > 0).map(Math.log10), 0.05);
}

export class Panel {
  private parts: string[] = [];

  constructor(
    readonly x0: number,
    readonly y0: number,
    readonly width: number,
    readonly height: number,
    readonly xr: Extent,
    readonly yr: Extent,
    readonly title = "",
  ) {}

  sx(x: number): number {
    return this.x0 + ((x - this.xr.lo) / (this.xr.hi - this.xr.lo)) * this.width;
  }

  sy(y: number): number {
    return this.y0 + this.height - ((y - this.yr.lo) / (this.yr.hi - this.yr.lo)) * this.height;
  }

  frame(xLabel = "", yLabel = ""): void {
    this.parts.push(
      `<rect x="${FMT(this.x0)}" y="${FMT(this.y0)}" width="${FMT(this.width)}" ` +
        `height="${FMT(this.height)}" fill="none" stroke="#333" stroke-width="1"/>`,
    );
    if (this.title) {
      this.parts.push(
        `<text x="${FMT(this.x0 + this.width / 2)}" y="${FMT(this.y0 - 6)}" ` +
          `font-size="12" text-anchor="middle" fill="#111">${esc(this.title)}</text>`,
      );
    }
    for (const frac of [0, 0.25, 0.5, 0.75, 1]) {
      const xv = this.xr.lo + frac * (this.xr.hi - this.xr.lo);
      const yv = this.yr.lo + frac * (this.yr.hi - this.yr.lo);
      const px = this.sx(xv);
      const py = this.sy(yv);
      this.parts.push(
        `<line x1="${FMT(px)}" y1="${FMT(this.y0 + this.height)}" x2="${FMT(px)}" ` +
          `y2="${FMT(this.y0 + this.height + 4)}" stroke="#333" stroke-width="1"/>`,
        `<text x="${FMT(px)}" y="${FMT(this.y0 + this.height + 15)}" font-size="9" ` +
          `text-anchor="middle" fill="#333">${fmtTick(xv)}</text>`,
        `<line x1="${FMT(this.x0 - 4)}" y1="${FMT(py)}" x2="${FMT(this.x0)}" ` +
          `y2="${FMT(py)}" stroke="#333" stroke-width="1"/>`,
        `<text x="${FMT(this.x0 - 6)}" y="${FMT(py + 3)}" font-size="9" ` +
          `text-anchor="end" fill="#333">${fmtTick(yv)}</text>`,
      );
    }
    if (xLabel) {
      this.parts.push(
        `<text x="${FMT(this.x0 + this.width / 2)}" y="${FMT(this.y0 + this.height + 30)}" ` +
          `font-size="11" text-anchor="middle" fill="#111">${esc(xLabel)}</text>`,
      );
    }
    if (yLabel) {
      const cx = this.x0 - 38;
      const cy = this.y0 + this.height / 2;
      this.parts.push(
        `<text x="${FMT(cx)}" y="${FMT(cy)}" font-size="11" text-anchor="middle" ` +
          `transform="rotate(-90 ${FMT(cx)} ${FMT(cy)})" fill="#111">${esc(yLabel)}</text>`,
      );
    }
  }

  polyline(xs: number[], ys: number[], color: string, width = 1.5, dash = ""): void {
    const pts: string[] = [];
    for (let i = 0; i < xs.length; i++) {
      if (!Number.isFinite(xs[i]) || !Number.isFinite(ys[i])) continue;
      pts.push(`${FMT(this.sx(xs[i]))},${FMT(this.sy(ys[i]))}`);
    }
    if (pts.length < 2) return;
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<polyline points="${pts.join(" ")}" fill="none" stroke="${color}" ` +
        `stroke-width="${width}"${dashAttr}/>`,
    );
  }

  dots(xs: number[], ys: number[], color: string, r = 2): void {
    for (let i = 0; i < xs.length; i++) {
      if (!Number.isFinite(xs[i]) || !Number.isFinite(ys[i])) continue;
      this.parts.push(
        `<circle cx="${FMT(this.sx(xs[i]))}" cy="${FMT(this.sy(ys[i]))}" r="${r}" ` +
          `fill="${color}"/>`,
      );
    }
  }

  bars(xs: number[], ys: number[], barWidth: number, color: string): void {
    const y0 = this.sy(Math.max(this.yr.lo, 0));
    for (let i = 0; i < xs.length; i++) {
      if (!Number.isFinite(ys[i]) || ys[i] <= 0) continue;
      const px = this.sx(xs[i] - barWidth / 2);
      const pw = this.sx(xs[i] + barWidth / 2) - px;
      const py = this.sy(ys[i]);
      this.parts.push(
        `<rect x="${FMT(px)}" y="${FMT(py)}" width="${FMT(pw)}" ` +
          `height="${FMT(Math.max(0, y0 - py))}" fill="${color}" fill-opacity="0.55"/>`,
      );
    }
  }

  cells(xs: number[], ys: number[], values: number[], cell: number): void {
    let vmax = 0;
    for (const v of values) if (Number.isFinite(v) && v > vmax) vmax = v;
    if (vmax <= 0) vmax = 1;
    for (let i = 0; i < xs.length; i++) {
      const frac = Math.max(0, Math.min(1, values[i] / vmax));
      if (frac < 0.004) continue;
      const shade = Math.round(255 * (1 - frac));
      const px = this.sx(xs[i] - cell / 2);
      const pw = this.sx(xs[i] + cell / 2) - px;
      const py = this.sy(ys[i] + cell / 2);
      const ph = this.sy(ys[i] - cell / 2) - py;
      this.parts.push(
        `<rect x="${FMT(px)}" y="${FMT(py)}" width="${FMT(pw)}" height="${FMT(ph)}" ` +
          `fill="rgb(${shade},${shade},255)"/>`,
      );
    }
  }

  label(x: number, y: number, text: string, color = "#111"): void {
    this.parts.push(
      `<text x="${FMT(this.sx(x))}" y="${FMT(this.sy(y))}" font-size="10" ` +
        `fill="${color}">${esc(text)}</text>`,
    );
  }

  render(): string {
    return this.parts.join("\n");
  }
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function fmtTick(v: number): string {
  const a = Math.abs(v);
  if (a >= 1000 || (a > 0 && a < 0.01)) return v.toExponential(1);
  return Number(v.toFixed(2)).toString();
}

export function document(width: number, height: number, panels: Panel[], title: string): string {
  const body = panels.map((p) => p.render()).join("\n");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="Helvetica,Arial,sans-serif">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n` +
    `<text x="${width / 2}" y="18" font-size="14" text-anchor="middle" fill="#000">` +
    `${esc(title)}</text>\n${body}\n</svg>\n`
  );
}
