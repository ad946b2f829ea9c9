/**
 * The five figure kinds rendered from simulator output tables:
 * density snapshots, trajectory overlays, click histograms, step curves and
 * log-log scaling panels. Pure functions from parsed tables to an SVG string.
 */

import { Table, TrajectoryRecord, column, columnsMatching, requireColumns } from "./csv.js";
import { Extent, Panel, document as svgDocument, extentOf, logExtent } from "./svg.js";

const COLORS = ["#d95f02", "#1b9e77", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

export function densitySnapshots(tables: { label: string; table: Table }[], title: string): string {
  const per = 220;
  const panels: Panel[] = [];
  tables.forEach(({ label, table }, i) => {
    requireColumns(table, ["x", "y", "density"], label);
    const xs = column(table, "x");
    const ys = column(table, "y");
    const dens = column(table, "density");
    const xr = extentOf(xs, 0.02);
    const yr = extentOf(ys, 0.02);
    const col = i % 2;
    const row = Math.floor(i / 2);
    const p = new Panel(60 + col * (per + 60), 40 + row * (per + 50), per, per, xr, yr, label);
    const cell = uniqueStep(xs);
    p.cells(xs, ys, dens, cell);
    p.frame("x", col === 0 ? "y" : "");
    panels.push(p);
  });
  const rows = Math.ceil(tables.length / 2);
  return svgDocument(2 * per + 180, rows * (per + 50) + 40, panels, title);
}

function uniqueStep(values: number[]): number {
  const sorted = [...new Set(values)].sort((a, b) => a - b);
  let step = Infinity;
  for (let i = 1; i < sorted.length; i++) {
    const d = sorted[i] - sorted[i - 1];
    if (d > 1e-12 && d < step) step = d;
  }
  return Number.isFinite(step) ? step : 1;
}

export function trajectoryOverlay(records: TrajectoryRecord[], meanTable: Table | null,
                                  title: string, maxTrajectories = 8): string {
  const shown = records.slice(0, maxTrajectories);
  const ts: number[] = [];
  const xs: number[] = [];
  for (const rec of records) {
    for (const [t, m] of rec.events) {
      ts.push(t);
      xs.push(Array.isArray(m) ? m[0] : (m as number));
    }
  }
  const xr = extentOf(ts);
  const yr = extentOf(xs);
  const p = new Panel(70, 40, 560, 320, xr, yr, "");
  shown.forEach((rec, i) => {
    const et = rec.events.map((e) => e[0]);
    const em = rec.events.map((e) => (Array.isArray(e[1]) ? e[1][0] : (e[1] as number)));
    p.polyline(et, em, COLORS[i % COLORS.length], 1.0);
    p.dots(et, em, COLORS[i % COLORS.length], 2);
  });
  if (meanTable) {
    requireColumns(meanTable, ["t", "mean_x"], "mean_x.csv");
    p.polyline(column(meanTable, "t"), column(meanTable, "mean_x"), "#000", 2.0, "6,3");
  }
  p.frame("t", "clicked position index");
  return svgDocument(700, 420, [p], title);
}

export function trajectoryPlane(records: TrajectoryRecord[], title: string,
                                maxTrajectories = 4): string {
  const all: { x: number[]; y: number[] }[] = [];
  for (const rec of records.slice(0, maxTrajectories)) {
    const x: number[] = [];
    const y: number[] = [];
    for (const [, m] of rec.events) {
      if (!Array.isArray(m)) continue;
      x.push(m[0]);
      y.push(m[1]);
    }
    all.push({ x, y });
  }
  const flatX = all.flatMap((s) => s.x);
  const flatY = all.flatMap((s) => s.y);
  const xr = extentOf(flatX.length ? flatX : [0, 1]);
  const yr = extentOf(flatY.length ? flatY : [0, 1]);
  const p = new Panel(70, 40, 400, 400, xr, yr, "");
  all.forEach((s, i) => {
    p.polyline(s.x, s.y, COLORS[i % COLORS.length], 1.0);
    p.dots(s.x, s.y, COLORS[i % COLORS.length], 2.5);
  });
  p.frame("position index x", "position index y");
  return svgDocument(540, 500, [p], title);
}

export function clickHistogram(hist: Table, density: Table, title: string): string {
  requireColumns(hist, ["t", "count_total", "expected_total"], "first_click_hist.csv");
  requireColumns(density, ["t", "f_t1"], "f_t1.csv");
  const t = column(hist, "t");
  const counts = column(hist, "count_total");
  const expected = column(hist, "expected_total");
  const binW = t.length > 1 ? t[1] - t[0] : 0.02;
  const xr = extentOf(t, 0.02);
  const yr = extentOf([...counts, ...expected, 0]);
  const p = new Panel(70, 40, 560, 320, xr, yr, "");
  p.bars(t, counts, binW, "#7570b3");
  const detCols = columnsMatching(hist, "count_m");
  detCols.forEach((name, i) => {
    p.polyline(t, column(hist, name), COLORS[i % COLORS.length], 1.0);
  });
  p.polyline(t, expected, "#000", 1.8, "5,3");
  p.frame("first-click time", "counts per bin");
  return svgDocument(700, 420, [p], title);
}

export function stepCurve(mean: Table, title: string,
                          retardation: Record<string, unknown> | null): string {
  requireColumns(mean, ["t"], "mean_x.csv");
  const t = column(mean, "t");
  const curves = mean.columns.filter((c) => c.startsWith("mean_x"));
  const ys = curves.flatMap((c) => column(mean, c)).filter(Number.isFinite);
  const p = new Panel(70, 40, 560, 340, extentOf(t, 0.02), extentOf([...ys, 0]), "");
  curves.forEach((name, i) => {
    p.polyline(t, column(mean, name), COLORS[i % COLORS.length], 1.6);
  });
  if (mean.columns.includes("profile_theory")) {
    p.polyline(t, column(mean, "profile_theory"), "#000", 1.5, "6,3");
  }
  if (retardation) {
    let i = 0;
    for (const key of Object.keys(retardation).sort()) {
      const entry = retardation[key] as { t_r?: number; v_fit?: number };
      if (entry && typeof entry.t_r === "number" && typeof entry.v_fit === "number") {
        const tEnd = t[t.length - 1];
        p.polyline([entry.t_r, tEnd],
                   [0, entry.v_fit * (tEnd - entry.t_r)], "#888", 1.0, "2,3");
        p.dots([entry.t_r], [0], COLORS[i % COLORS.length], 4);
        p.label(entry.t_r, -0.05 * Math.max(...ys), `t_r=${entry.t_r.toFixed(2)}`);
      }
      i += 1;
    }
  }
  p.frame("t", "mean clicked position");
  return svgDocument(700, 440, [p], title);
}

export interface ScalingPanelSpec {
  label: string;
  mean: Table;
  std: Table;
  fit?: { exponent: number; label: string };
}

export function scalingLogLog(jumpX: ScalingPanelSpec, jumpK: ScalingPanelSpec,
                              filterX: ScalingPanelSpec, filterK: ScalingPanelSpec,
                              title: string): string {
  const panels: Panel[] = [];
  const specs = [
    { spec: jumpX, pos: 0, what: "std_x" },
    { spec: filterX, pos: 1, what: "std_x" },
    { spec: jumpK, pos: 2, what: "std_k" },
    { spec: filterK, pos: 3, what: "std_k" },
  ];
  for (const { spec, pos, what } of specs) {
    requireColumns(spec.std, ["t", what], spec.label);
    const t = column(spec.std, "t");
    const y = column(spec.std, what);
    const pts = t.map((tv, i) => [tv, y[i]] as const)
      .filter(([a, b]) => a > 0 && Number.isFinite(b) && b > 0);
    const lx = pts.map(([a]) => Math.log10(a));
    const ly = pts.map(([, b]) => Math.log10(b));
    const col = pos % 2;
    const row = Math.floor(pos / 2);
    const p = new Panel(70 + col * 340, 50 + row * 240, 280, 180,
                        extentOf(lx, 0.03), extentOf(ly, 0.05), spec.label);
    p.polyline(lx, ly, COLORS[pos % COLORS.length], 1.6);
    if (spec.fit) {
      const x0 = lx[Math.floor(lx.length / 2)];
      const y0 = ly[Math.floor(ly.length / 2)];
      const xe: [number, number] = [lx[0], lx[lx.length - 1]];
      p.polyline([xe[0], xe[1]],
                 [y0 + spec.fit.exponent * (xe[0] - x0), y0 + spec.fit.exponent * (xe[1] - x0)],
                 "#000", 1.0, "4,3");
      p.label(xe[0], y0 + spec.fit.exponent * (xe[1] - x0), spec.fit.label);
    }
    p.frame("log10 t", `log10 ${what}`);
    panels.push(p);
  }
  return svgDocument(740, 540, panels, title);
}
